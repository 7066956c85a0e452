#include "ovpath/synth.hpp"

#include "ovpath/error.hpp"
#include "ovpath/hash.hpp"
#include "ovpath/image_io.hpp"
#include "ovpath/json_util.hpp"
#include "ovpath/parallel.hpp"
#include "ovpath/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

namespace ovpath {

using nlohmann::json;

ClassParams ClassParams::hgsoc_defaults() { return ClassParams{}; }

ClassParams ClassParams::sbot_defaults() {
  ClassParams p;
  p.tumor_radius_mean = 3.2;
  p.tumor_radius_std = 0.4;
  p.tumor_aspect_std = 0.05;
  p.tumor_hema_mean = 0.7;
  p.tumor_hema_std = 0.1;
  return p;
}

void ClassParams::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw Error(ErrorKind::ConfigError, std::string(what) + " must be positive");
  };
  auto non_negative = [](double v, const char* what) {
    if (!(v >= 0.0)) throw Error(ErrorKind::ConfigError, std::string(what) + " must be non-negative");
  };
  positive(tumor_radius_mean, "tumor_radius_mean");
  positive(tumor_radius_min, "tumor_radius_min");
  positive(stroma_semi_major, "stroma_semi_major");
  positive(stroma_semi_minor, "stroma_semi_minor");
  positive(tumor_density, "tumor_density");
  positive(stroma_density, "stroma_density");
  positive(cluster_sigma, "cluster_sigma");
  positive(tumor_hema_mean, "tumor_hema_mean");
  positive(stroma_hema_mean, "stroma_hema_mean");
  non_negative(tumor_radius_std, "tumor_radius_std");
  non_negative(tumor_aspect_std, "tumor_aspect_std");
  non_negative(tumor_hema_std, "tumor_hema_std");
  non_negative(stroma_hema_std, "stroma_hema_std");
  non_negative(tumor_eosin_mean, "tumor_eosin_mean");
  non_negative(tumor_eosin_std, "tumor_eosin_std");
  non_negative(stroma_eosin_mean, "stroma_eosin_mean");
  non_negative(stroma_eosin_std, "stroma_eosin_std");
  if (stroma_semi_minor > stroma_semi_major) {
    throw Error(ErrorKind::ConfigError, "stroma_semi_minor exceeds stroma_semi_major");
  }
  if (clusters_per_roi < 1) throw Error(ErrorKind::ConfigError, "clusters_per_roi must be >= 1");
}

void CohortSpec::validate() const {
  if (n_subjects_per_class < 1) throw Error(ErrorKind::ConfigError, "n_subjects_per_class must be >= 1");
  if (rois_per_subject < 1) throw Error(ErrorKind::ConfigError, "rois_per_subject must be >= 1");
  if (roi_size < 512) throw Error(ErrorKind::ConfigError, "roi_size must be >= 512 px");
  if (!(pixel_size > 0.0)) throw Error(ErrorKind::ConfigError, "pixel_size must be positive");
  if (!(min_gap >= 0.0) || !(cytoplasm_margin >= 0.0) || !(background_eosin >= 0.0) || !(noise_std >= 0.0)) {
    throw Error(ErrorKind::ConfigError, "gap, margin, background and noise must be non-negative");
  }
  if (max_attempts < 1) throw Error(ErrorKind::ConfigError, "max_attempts must be >= 1");
  if (!(max_drop_fraction >= 0.0 && max_drop_fraction <= 1.0)) {
    throw Error(ErrorKind::ConfigError, "max_drop_fraction must lie in [0, 1]");
  }
  hgsoc.validate();
  sbot.validate();
}

namespace {

json class_to_json(const ClassParams& p) {
  return {{"tumor_radius_mean", p.tumor_radius_mean},
          {"tumor_radius_std", p.tumor_radius_std},
          {"tumor_radius_min", p.tumor_radius_min},
          {"tumor_aspect_std", p.tumor_aspect_std},
          {"tumor_hema_mean", p.tumor_hema_mean},
          {"tumor_hema_std", p.tumor_hema_std},
          {"tumor_eosin_mean", p.tumor_eosin_mean},
          {"tumor_eosin_std", p.tumor_eosin_std},
          {"stroma_semi_major", p.stroma_semi_major},
          {"stroma_semi_minor", p.stroma_semi_minor},
          {"stroma_hema_mean", p.stroma_hema_mean},
          {"stroma_hema_std", p.stroma_hema_std},
          {"stroma_eosin_mean", p.stroma_eosin_mean},
          {"stroma_eosin_std", p.stroma_eosin_std},
          {"tumor_density", p.tumor_density},
          {"stroma_density", p.stroma_density},
          {"cluster_sigma", p.cluster_sigma},
          {"clusters_per_roi", p.clusters_per_roi}};
}

ClassParams class_from_json(const json& j, ClassParams p, const std::string& ctx) {
  StrictObject o(j, ctx);
  o.get("tumor_radius_mean", p.tumor_radius_mean);
  o.get("tumor_radius_std", p.tumor_radius_std);
  o.get("tumor_radius_min", p.tumor_radius_min);
  o.get("tumor_aspect_std", p.tumor_aspect_std);
  o.get("tumor_hema_mean", p.tumor_hema_mean);
  o.get("tumor_hema_std", p.tumor_hema_std);
  o.get("tumor_eosin_mean", p.tumor_eosin_mean);
  o.get("tumor_eosin_std", p.tumor_eosin_std);
  o.get("stroma_semi_major", p.stroma_semi_major);
  o.get("stroma_semi_minor", p.stroma_semi_minor);
  o.get("stroma_hema_mean", p.stroma_hema_mean);
  o.get("stroma_hema_std", p.stroma_hema_std);
  o.get("stroma_eosin_mean", p.stroma_eosin_mean);
  o.get("stroma_eosin_std", p.stroma_eosin_std);
  o.get("tumor_density", p.tumor_density);
  o.get("stroma_density", p.stroma_density);
  o.get("cluster_sigma", p.cluster_sigma);
  o.get("clusters_per_roi", p.clusters_per_roi);
  o.finish();
  return p;
}

}  // namespace

json CohortSpec::to_json() const {
  return {{"n_subjects_per_class", n_subjects_per_class},
          {"rois_per_subject", rois_per_subject},
          {"roi_size", roi_size},
          {"pixel_size", pixel_size},
          {"hgsoc", class_to_json(hgsoc)},
          {"sbot", class_to_json(sbot)},
          {"min_gap", min_gap},
          {"cytoplasm_margin", cytoplasm_margin},
          {"background_eosin", background_eosin},
          {"noise_std", noise_std},
          {"max_attempts", max_attempts},
          {"max_drop_fraction", max_drop_fraction},
          {"seed", seed}};
}

CohortSpec CohortSpec::from_json(const json& j) {
  CohortSpec s;
  StrictObject o(j, "synth");
  o.get("n_subjects_per_class", s.n_subjects_per_class);
  o.get("rois_per_subject", s.rois_per_subject);
  o.get("roi_size", s.roi_size);
  o.get("pixel_size", s.pixel_size);
  if (const json* c = o.child("hgsoc")) s.hgsoc = class_from_json(*c, s.hgsoc, "synth.hgsoc");
  if (const json* c = o.child("sbot")) s.sbot = class_from_json(*c, s.sbot, "synth.sbot");
  o.get("min_gap", s.min_gap);
  o.get("cytoplasm_margin", s.cytoplasm_margin);
  o.get("background_eosin", s.background_eosin);
  o.get("noise_std", s.noise_std);
  o.get("max_attempts", s.max_attempts);
  o.get("max_drop_fraction", s.max_drop_fraction);
  o.get("seed", s.seed);
  o.finish();
  s.validate();
  return s;
}

std::string subject_name(Histotype h, int subject_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%02d", std::string(to_string(h)).c_str(), subject_index + 1);
  return buf;
}

std::string roi_name(int roi_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "roi_%02d", roi_index);
  return buf;
}

namespace {

// Uniform bucket grid over nucleus bounding circles for overlap rejection.
class OccupancyGrid {
 public:
  OccupancyGrid(double extent, double bucket) : bucket_(bucket), n_(static_cast<int>(std::ceil(extent / bucket)) + 1) {
    cells_.resize(static_cast<std::size_t>(n_) * n_);
  }

  bool free(double x, double y, double r, double gap, double max_r) const {
    const double reach = r + gap + max_r;
    const int x0 = index(x - reach), x1 = index(x + reach);
    const int y0 = index(y - reach), y1 = index(y + reach);
    for (int by = y0; by <= y1; ++by) {
      for (int bx = x0; bx <= x1; ++bx) {
        for (const Disk& d : cells_[static_cast<std::size_t>(by) * n_ + bx]) {
          const double need = r + d.r + gap;
          if ((d.x - x) * (d.x - x) + (d.y - y) * (d.y - y) < need * need) return false;
        }
      }
    }
    return true;
  }

  void add(double x, double y, double r) { cells_[static_cast<std::size_t>(index(y)) * n_ + index(x)].push_back({x, y, r}); }

 private:
  struct Disk {
    double x, y, r;
  };
  int index(double v) const { return std::clamp(static_cast<int>(std::floor(v / bucket_)), 0, n_ - 1); }
  double bucket_;
  int n_;
  std::vector<std::vector<Disk>> cells_;
};

double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lower) {
  std::normal_distribution<double> dist(mean, sd);
  for (int i = 0; i < 1000; ++i) {
    const double v = dist(rng);
    if (v > lower) return v;
  }
  return std::max(lower, mean);
}

// Adds amplitude * coverage of an ellipse (4x4 supersampled at the rim).
// combine(current, value) selects additive or max blending.
template <typename Combine>
void render_ellipse(Plane& plane, double cx, double cy, double a, double b, double angle, double amplitude,
                    Combine combine) {
  const int w = static_cast<int>(plane.cols()), h = static_cast<int>(plane.rows());
  const double ca = std::cos(angle), sa = std::sin(angle);
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - a - 1))), x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + a + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - a - 1))), y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + a + 1)));
  auto q = [&](double px, double py) {
    const double dx = px - cx, dy = py - cy;
    const double u = (dx * ca + dy * sa) / a, v = (-dx * sa + dy * ca) / b;
    return u * u + v * v;
  };
  const double band = 1.5 / b;  // in normalized radius, wider than half a pixel diagonal
  const double inner = (1.0 - band) > 0.0 ? (1.0 - band) * (1.0 - band) : -1.0;
  const double outer = (1.0 + band) * (1.0 + band);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double qc = q(x + 0.5, y + 0.5);
      double cover;
      if (qc <= inner) {
        cover = 1.0;
      } else if (qc >= outer) {
        continue;
      } else {
        int hits = 0;
        for (int sy = 0; sy < 4; ++sy)
          for (int sx = 0; sx < 4; ++sx) hits += q(x + (sx + 0.5) / 4.0, y + (sy + 0.5) / 4.0) <= 1.0;
        if (hits == 0) continue;
        cover = hits / 16.0;
      }
      plane(y, x) = combine(plane(y, x), cover * amplitude);
    }
  }
}

Polygon circle_polygon(double cx, double cy, double r, int n = 64) {
  Polygon ring;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * i / n;
    ring.emplace_back(cx + r * std::cos(t), cy + r * std::sin(t));
  }
  return ring;
}

// Sutherland-Hodgman against the square [0, extent]^2.
Polygon clip_to_square(Polygon ring, double extent) {
  auto clip = [&ring](auto inside, auto cross) {
    Polygon out;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const Point2& a = ring[i];
      const Point2& b = ring[(i + 1) % ring.size()];
      const bool ia = inside(a), ib = inside(b);
      if (ia) out.push_back(a);
      if (ia != ib) out.push_back(cross(a, b));
    }
    ring = std::move(out);
  };
  for (int axis = 0; axis < 2; ++axis) {
    for (double bound : {0.0, extent}) {
      const bool lower = bound == 0.0;
      clip([&](const Point2& q) { return lower ? q(axis) >= bound : q(axis) <= bound; },
           [&](const Point2& a, const Point2& b) {
             Point2 r = a + (b - a) * ((bound - a(axis)) / (b(axis) - a(axis)));
             r(axis) = bound;
             return r;
           });
    }
  }
  return ring;
}

CellLabel polygon_label(const std::vector<AnnotatedPolygon>& polys, const Point2& p) {
  // Tumor polygons are clipped inside the whole-ROI stroma square, so any tumor hit wins.
  for (const auto& poly : polys)
    if (poly.label == CellLabel::Tumor && poly.contains(p)) return CellLabel::Tumor;
  for (const auto& poly : polys)
    if (poly.contains(p)) return poly.label;
  return CellLabel::Unlabeled;
}

}  // namespace

RoiSample generate_roi(const CohortSpec& spec, Histotype histotype, int subject_index, int roi_index) {
  spec.validate();
  const ClassParams& p = spec.params(histotype);
  const double ps = spec.pixel_size;
  const double extent = spec.roi_size * ps;  // µm
  const double area_mm2 = extent * extent * 1e-6;

  GroundTruth truth;
  truth.histotype = histotype;
  truth.subject_index = subject_index;
  truth.roi_index = roi_index;
  truth.subject_id = subject_name(histotype, subject_index);
  truth.roi_id = truth.subject_id + "/" + roi_name(roi_index);
  truth.seed = derive_seed(spec.seed, static_cast<int>(histotype), subject_index, roi_index);
  std::mt19937_64 rng = make_rng(truth.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // One cluster centre per quadrant (cycling), drawn in the quadrant's central half.
  std::vector<Point2> centres;
  for (int k = 0; k < p.clusters_per_roi; ++k) {
    const int quad = k % 4;
    const double qx = (quad % 2) * extent / 2.0, qy = (quad / 2) * extent / 2.0;
    centres.emplace_back(qx + extent * (0.125 + 0.25 * unit(rng)), qy + extent * (0.125 + 0.25 * unit(rng)));
  }

  truth.requested_tumor = static_cast<int>(std::lround(p.tumor_density * area_mm2));
  truth.requested_stroma = static_cast<int>(std::lround(p.stroma_density * area_mm2));
  const double max_r = std::max({p.tumor_radius_mean + 6.0 * p.tumor_radius_std, p.stroma_semi_major, 1.0}) * 1.5;
  OccupancyGrid grid(extent, 2.0 * max_r + spec.min_gap);

  auto place = [&](CellLabel label) {
    CellRecord c;
    c.label = label;
    if (label == CellLabel::Tumor) {
      const double r = truncated_normal(rng, p.tumor_radius_mean, p.tumor_radius_std, p.tumor_radius_min);
      const double aspect = 1.0 + std::abs(normal(rng)) * p.tumor_aspect_std;
      c.semi_major = r * std::sqrt(aspect);
      c.semi_minor = r / std::sqrt(aspect);
      c.hema = std::max(0.05, p.tumor_hema_mean + p.tumor_hema_std * normal(rng));
      c.eosin = std::max(0.0, p.tumor_eosin_mean + p.tumor_eosin_std * normal(rng));
    } else {
      c.semi_major = p.stroma_semi_major;
      c.semi_minor = p.stroma_semi_minor;
      c.hema = std::max(0.05, p.stroma_hema_mean + p.stroma_hema_std * normal(rng));
      c.eosin = std::max(0.0, p.stroma_eosin_mean + p.stroma_eosin_std * normal(rng));
    }
    c.angle = std::numbers::pi * unit(rng);
    const double bound = c.semi_major;
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
      double x, y;
      int cluster = -1;
      if (label == CellLabel::Tumor) {
        cluster = static_cast<int>(unit(rng) * centres.size()) % static_cast<int>(centres.size());
        x = centres[cluster].x() + p.cluster_sigma * normal(rng);
        y = centres[cluster].y() + p.cluster_sigma * normal(rng);
      } else {
        x = extent * unit(rng);
        y = extent * unit(rng);
      }
      if (x < 0.0 || y < 0.0 || x >= extent || y >= extent) continue;
      if (!grid.free(x, y, bound, spec.min_gap, max_r)) continue;
      grid.add(x, y, bound);
      c.x = x;
      c.y = y;
      c.cluster = cluster;
      c.id = static_cast<int>(truth.cells.size()) + 1;
      truth.cells.push_back(c);
      return;
    }
    ++truth.dropped;
  };
  for (int i = 0; i < truth.requested_tumor; ++i) place(CellLabel::Tumor);
  for (int i = 0; i < truth.requested_stroma; ++i) place(CellLabel::Stroma);
  const int requested = truth.requested_tumor + truth.requested_stroma;
  if (truth.dropped > spec.max_drop_fraction * requested) {
    throw Error(ErrorKind::PlacementOverflow, truth.roi_id + ": dropped " + std::to_string(truth.dropped) + " of " +
                                                  std::to_string(requested) + " cells");
  }

  // Concentration planes.
  const int n = spec.roi_size;
  truth.hema = Plane::Zero(n, n);
  truth.eosin = Plane::Constant(n, n, spec.background_eosin);
  auto add = [](double a, double b) { return a + b; };
  auto take_max = [](double a, double b) { return std::max(a, b); };
  for (const CellRecord& c : truth.cells) {
    const double cx = c.x / ps, cy = c.y / ps;
    const double margin = spec.cytoplasm_margin / ps;
    render_ellipse(truth.eosin, cx, cy, c.semi_major / ps + margin, c.semi_minor / ps + margin, c.angle, c.eosin, take_max);
    render_ellipse(truth.hema, cx, cy, c.semi_major / ps, c.semi_minor / ps, c.angle, c.hema, add);
  }
  if (spec.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    for (Eigen::Index i = 0; i < truth.hema.size(); ++i) truth.hema.data()[i] = std::max(0.0, truth.hema.data()[i] + noise(rng));
    for (Eigen::Index i = 0; i < truth.eosin.size(); ++i) truth.eosin.data()[i] = std::max(0.0, truth.eosin.data()[i] + noise(rng));
  }

  RoiSample out;
  out.tile = od_to_rgb(compose_od(truth.hema, truth.eosin, StainMatrix::defaults()), kDefaultWhite, ps);

  // Annotations: whole-ROI stroma, one tumor circle per cluster, and points
  // wherever the polygons would mislabel a cell at or near its centre.
  AnnotationSet& ann = truth.annotations;
  ann.roi_id = truth.roi_id;
  ann.polygons.push_back({{Polygon{{0.0, 0.0}, {extent, 0.0}, {extent, extent}, {0.0, extent}}}, CellLabel::Stroma});
  for (const Point2& c : centres) {
    Polygon ring = clip_to_square(circle_polygon(c.x(), c.y(), 2.0 * p.cluster_sigma), extent);
    if (ring.size() >= 3) ann.polygons.push_back({{std::move(ring)}, CellLabel::Tumor});
  }
  constexpr double kProbe = 1.5;  // µm
  for (const CellRecord& c : truth.cells) {
    bool wrong = polygon_label(ann.polygons, {c.x, c.y}) != c.label;
    for (int k = 0; k < 8 && !wrong; ++k) {
      const double t = std::numbers::pi * k / 4.0;
      wrong = polygon_label(ann.polygons, {c.x + kProbe * std::cos(t), c.y + kProbe * std::sin(t)}) != c.label;
    }
    if (wrong) ann.points.push_back({{c.x, c.y}, c.label});
  }
  out.truth = std::move(truth);
  return out;
}

namespace fs = std::filesystem;

json generate_cohort(const CohortSpec& spec, const std::string& out_dir, int workers) {
  spec.validate();
  struct Job {
    Histotype h;
    int subject;
    int roi;
  };
  std::vector<Job> jobs;
  for (Histotype h : {Histotype::HGSOC, Histotype::SBOT})
    for (int s = 0; s < spec.n_subjects_per_class; ++s)
      for (int r = 0; r < spec.rois_per_subject; ++r) jobs.push_back({h, s, r});

  std::vector<json> roi_entries(jobs.size());
  std::vector<json> file_entries(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    const RoiSample sample = generate_roi(spec, job.h, job.subject, job.roi);
    const std::string rel_dir = std::string(to_string(job.h)) + "/" + sample.truth.subject_id;
    const fs::path dir = fs::path(out_dir) / rel_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string());
    const std::string stem = roi_name(job.roi);
    const auto png = encode_png(sample.tile);
    {
      std::ofstream f(dir / (stem + ".png"), std::ios::binary);
      f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
      if (!f) throw Error(ErrorKind::IoError, "cannot write " + (dir / (stem + ".png")).string());
    }
    const std::string geojson = annotations_to_geojson(sample.truth.annotations);
    {
      std::ofstream f(dir / (stem + ".geojson"), std::ios::binary);
      f << geojson;
      if (!f) throw Error(ErrorKind::IoError, "cannot write " + (dir / (stem + ".geojson")).string());
    }
    int n_tumor = 0;
    for (const auto& c : sample.truth.cells) n_tumor += c.label == CellLabel::Tumor;
    roi_entries[i] = {{"class", std::string(to_string(job.h))},
                      {"subject", sample.truth.subject_id},
                      {"roi", stem},
                      {"seed", sample.truth.seed},
                      {"n_tumor", n_tumor},
                      {"n_stroma", static_cast<int>(sample.truth.cells.size()) - n_tumor},
                      {"dropped", sample.truth.dropped},
                      {"n_points", sample.truth.annotations.points.size()}};
    file_entries[i] = json::array({json{{"path", rel_dir + "/" + stem + ".png"}, {"sha256", sha256_hex(png)}},
                                   json{{"path", rel_dir + "/" + stem + ".geojson"}, {"sha256", sha256_hex(geojson)}}});
  });

  json files = json::array();
  for (const json& pair : file_entries)
    for (const json& f : pair) files.push_back(f);
  json manifest = {{"spec", spec.to_json()}, {"rois", roi_entries}, {"files", files}};
  std::ofstream f(fs::path(out_dir) / "manifest.json", std::ios::binary);
  f << manifest.dump(2) << '\n';
  if (!f) throw Error(ErrorKind::IoError, "cannot write manifest in " + out_dir);
  return manifest;
}

}  // namespace ovpath

#include "ovpath/cell_features.hpp"

#include "ovpath/csv.hpp"
#include "ovpath/error.hpp"
#include "ovpath/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ovpath {

const std::array<FeatureName, kCellFeatureCount>& cell_feature_parts() {
  static const std::array<FeatureName, kCellFeatureCount> parts = {{
      {"Nucleus", "Area"},
      {"Nucleus", "Perimeter"},
      {"Nucleus", "Circularity"},
      {"Nucleus", "Max caliper"},
      {"Nucleus", "Min caliper"},
      {"Nucleus", "Eccentricity"},
      {"Nucleus", "Hematoxylin OD mean"},
      {"Nucleus", "Hematoxylin OD sum"},
      {"Nucleus", "Hematoxylin OD std dev"},
      {"Nucleus", "Hematoxylin OD max"},
      {"Nucleus", "Hematoxylin OD min"},
      {"Nucleus", "Hematoxylin OD range"},
      {"Nucleus", "Eosin OD mean"},
      {"Nucleus", "Eosin OD sum"},
      {"Nucleus", "Eosin OD std dev"},
      {"Nucleus", "Eosin OD max"},
      {"Nucleus", "Eosin OD min"},
      {"Nucleus", "Eosin OD range"},
      {"Cell", "Area"},
      {"Cell", "Perimeter"},
      {"Cell", "Circularity"},
      {"Cell", "Max caliper"},
      {"Cell", "Min caliper"},
      {"Cell", "Eccentricity"},
      {"Cell", "Hematoxylin OD mean"},
      {"Cell", "Hematoxylin OD std dev"},
      {"Cell", "Hematoxylin OD max"},
      {"Cell", "Hematoxylin OD min"},
      {"Cell", "Eosin OD mean"},
      {"Cell", "Eosin OD std dev"},
      {"Cell", "Eosin OD max"},
      {"Cell", "Eosin OD min"},
      {"Cytoplasm", "Hematoxylin OD mean"},
      {"Cytoplasm", "Hematoxylin OD std dev"},
      {"Cytoplasm", "Hematoxylin OD max"},
      {"Cytoplasm", "Hematoxylin OD min"},
      {"Cytoplasm", "Eosin OD mean"},
      {"Cytoplasm", "Eosin OD std dev"},
      {"Cytoplasm", "Eosin OD max"},
      {"Cytoplasm", "Eosin OD min"},
      {"Cell", "Nucleus/Cell area ratio"},
  }};
  return parts;
}

const std::vector<std::string>& cell_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const FeatureName& f : cell_feature_parts()) {
      if (f.measurement == "Nucleus/Cell area ratio") {
        out.emplace_back(f.measurement);
      } else {
        out.push_back(std::string(f.compartment) + ": " + std::string(f.measurement));
      }
    }
    return out;
  }();
  return names;
}

ShapeFeatures shape_features(const PixelSet& mask, double pixel_size) {
  if (mask.empty()) throw Error(ErrorKind::EmptyMask, "shape features of an empty mask");
  ShapeFeatures s;
  const double n = static_cast<double>(mask.size());
  s.area = n * pixel_size * pixel_size;
  s.perimeter = smoothed_contour_length(mask) * pixel_size;
  // Digitised round shapes can exceed 1 slightly.
  s.circularity = s.perimeter > 0.0
                      ? std::min(1.0, 4.0 * std::numbers::pi * s.area / (s.perimeter * s.perimeter))
                      : 1.0;

  // Hull of pixel corners; the extreme pixels of each row are sufficient.
  std::vector<Point2> corners;
  for (std::size_t i = 0; i < mask.size();) {
    std::size_t j = i;
    while (j + 1 < mask.size() && mask[j + 1].y == mask[i].y) ++j;
    const double y = mask[i].y;
    const double xl = mask[i].x;
    const double xr = mask[j].x + 1.0;
    corners.insert(corners.end(), {{xl, y}, {xl, y + 1}, {xr, y}, {xr, y + 1}});
    i = j + 1;
  }
  const Calipers cal = rotating_calipers(convex_hull(std::move(corners)));
  s.max_caliper = cal.max_diameter * pixel_size;
  s.min_caliper = cal.min_width * pixel_size;

  double mx = 0.0, my = 0.0;
  for (const Pixel& p : mask) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Pixel& p : mask) {
    const double dx = p.x - mx, dy = p.y - my;
    cov(0, 0) += dx * dx;
    cov(0, 1) += dx * dy;
    cov(1, 1) += dy * dy;
  }
  cov /= n;
  // closed-form eigenvalues of the symmetric 2x2 moment matrix
  const double half_trace = 0.5 * (cov(0, 0) + cov(1, 1));
  const double spread = std::hypot(0.5 * (cov(0, 0) - cov(1, 1)), cov(0, 1));
  const double l1 = half_trace + spread;
  s.eccentricity = l1 > 0.0 ? std::sqrt(std::min(1.0, 2.0 * spread / l1)) : 0.0;
  return s;
}

IntensityFeatures intensity_features(const PixelSet& mask, const Plane& plane) {
  if (mask.empty()) throw Error(ErrorKind::EmptyMask, "intensity features of an empty mask");
  IntensityFeatures f;
  f.min = f.max = plane(mask.front().y, mask.front().x);
  for (const Pixel& p : mask) {
    const double v = plane(p.y, p.x);
    f.sum += v;
    f.min = std::min(f.min, v);
    f.max = std::max(f.max, v);
  }
  const double n = static_cast<double>(mask.size());
  f.mean = f.sum / n;
  double ss = 0.0;
  for (const Pixel& p : mask) {
    const double d = plane(p.y, p.x) - f.mean;
    ss += d * d;
  }
  f.std = std::sqrt(ss / n);
  f.range = f.max - f.min;
  return f;
}

CellFeatureVector cell_feature_vector(const CellObject& cell, const Plane& hema, const Plane& eosin,
                                      double pixel_size) {
  CellFeatureVector out;
  out.cell_id = cell.id;
  auto& v = out.values;
  int k = 0;
  auto put_shape = [&](const ShapeFeatures& s) {
    for (double x : {s.area, s.perimeter, s.circularity, s.max_caliper, s.min_caliper, s.eccentricity}) v(k++) = x;
  };
  auto put_full = [&](const IntensityFeatures& f) {
    for (double x : {f.mean, f.sum, f.std, f.max, f.min, f.range}) v(k++) = x;
  };
  auto put_short = [&](const IntensityFeatures& f) {
    for (double x : {f.mean, f.std, f.max, f.min}) v(k++) = x;
  };

  const ShapeFeatures nucleus = shape_features(cell.nucleus_mask, pixel_size);
  put_shape(nucleus);
  put_full(intensity_features(cell.nucleus_mask, hema));
  put_full(intensity_features(cell.nucleus_mask, eosin));

  const PixelSet& cell_mask = cell.cell_mask.empty() ? cell.nucleus_mask : cell.cell_mask;
  const ShapeFeatures whole = shape_features(cell_mask, pixel_size);
  put_shape(whole);
  put_short(intensity_features(cell_mask, hema));
  put_short(intensity_features(cell_mask, eosin));

  if (cell.cytoplasm_mask.empty()) {
    out.degenerate_cytoplasm = true;
    k += 8;  // already zero
  } else {
    put_short(intensity_features(cell.cytoplasm_mask, hema));
    put_short(intensity_features(cell.cytoplasm_mask, eosin));
  }
  v(k++) = nucleus.area / whole.area;
  return out;
}

std::string feature_csv_string(std::vector<CellFeatureVector> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CellFeatureVector& a, const CellFeatureVector& b) { return a.cell_id < b.cell_id; });
  std::string out = "label";
  for (const std::string& name : cell_feature_names()) out += "," + name;
  out += '\n';
  for (const CellFeatureVector& r : rows) {
    out += to_string(r.label);
    for (int j = 0; j < kCellFeatureCount; ++j) out += "," + csv::format_g6(r.values(j));
    out += '\n';
  }
  return out;
}

void export_feature_csv(std::vector<CellFeatureVector> rows, const std::string& path) {
  csv::write_text(path, feature_csv_string(std::move(rows)));
}

std::vector<CellFeatureVector> parse_feature_csv(const std::string& text) {
  const auto table = csv::parse(text);
  if (table.empty()) throw Error(ErrorKind::ParseError, "feature CSV without header");
  const auto& header = table.front();
  const auto& names = cell_feature_names();
  if (header.size() != names.size() + 1 || header[0] != "label" ||
      !std::equal(names.begin(), names.end(), header.begin() + 1)) {
    throw Error(ErrorKind::ParseError, "feature CSV header does not match the canonical names");
  }
  std::vector<CellFeatureVector> rows;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& f = table[i];
    if (f.size() != header.size()) throw Error(ErrorKind::ParseError, "ragged feature CSV row");
    CellFeatureVector r;
    r.cell_id = static_cast<int>(i);
    const auto lab = parse_cell_label(f[0]);
    if (!lab) throw Error(ErrorKind::UnknownLabel, f[0]);
    r.label = *lab;
    try {
      for (int j = 0; j < kCellFeatureCount; ++j) r.values(j) = std::stod(f[j + 1]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ParseError, "non-numeric feature value in row " + std::to_string(i));
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<CellFeatureVector> read_feature_csv(const std::string& path) {
  return parse_feature_csv(csv::read_text(path));
}

}  // namespace ovpath

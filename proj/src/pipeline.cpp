#include "ovpath/pipeline.hpp"

#include "ovpath/annotation.hpp"
#include "ovpath/cell_classifier.hpp"
#include "ovpath/cell_features.hpp"
#include "ovpath/csv.hpp"
#include "ovpath/error.hpp"
#include "ovpath/hash.hpp"
#include "ovpath/image_io.hpp"
#include "ovpath/overlay.hpp"
#include "ovpath/parallel.hpp"
#include "ovpath/patch_classifier.hpp"
#include "ovpath/patch_features.hpp"
#include "ovpath/rng.hpp"
#include "ovpath/segment.hpp"
#include "ovpath/stain.hpp"
#include "ovpath/svm.hpp"
#include "ovpath/synth.hpp"
#include "ovpath/version.hpp"

#include <openssl/opensslv.h>
#include <png.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <unordered_map>

namespace ovpath {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------------ helpers

std::vector<RoiRef> discover_rois(const std::string& cohort_dir) {
  std::vector<RoiRef> out;
  for (Histotype h : {Histotype::HGSOC, Histotype::SBOT}) {
    const fs::path class_dir = fs::path(cohort_dir) / std::string(to_string(h));
    if (!fs::is_directory(class_dir)) continue;
    for (const auto& subject : fs::directory_iterator(class_dir)) {
      if (!subject.is_directory()) continue;
      for (const auto& file : fs::directory_iterator(subject.path())) {
        if (!file.is_regular_file() || file.path().extension() != ".png") continue;
        out.push_back({h, subject.path().filename().string(), file.path().stem().string()});
      }
    }
  }
  if (out.empty()) throw Error(ErrorKind::MissingInput, "no ROI tiles under " + cohort_dir);
  std::sort(out.begin(), out.end(), [](const RoiRef& a, const RoiRef& b) {
    return std::tie(a.histotype, a.subject, a.roi) < std::tie(b.histotype, b.subject, b.roi);
  });
  return out;
}

void Logger::log(const std::string& level, const json& fields) const {
  if (!sink_) return;
  json line = {{"level", level}};
  line.update(fields);
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  *sink_ << line.dump() << '\n';
  sink_->flush();
}

namespace {

std::string stage_dir_name(std::string_view stage) {
  std::string s(stage);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

std::string fmt(double v) { return csv::format_exact(v); }

std::string json_text(const json& j) { return j.dump(2) + '\n'; }

std::vector<std::vector<std::string>> read_table(const std::string& path, std::size_t min_columns) {
  auto t = csv::read(path);
  if (t.empty()) throw Error(ErrorKind::ParseError, path + ": empty CSV");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].size() < min_columns) throw Error(ErrorKind::ParseError, path + ": short row " + std::to_string(i));
  }
  return t;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, where + ": not a number: " + s);
  }
}

int to_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, where + ": not an integer: " + s);
  }
}

CellLabel to_label(const std::string& s) {
  const auto l = parse_cell_label(s);
  if (!l) throw Error(ErrorKind::UnknownLabel, s);
  return *l;
}

std::string subject_of(const std::string& roi_id) { return roi_id.substr(0, roi_id.find('/')); }

struct RoiMeta {
  int width = 0;
  int height = 0;
};

struct CellRow {
  int cell_id = 0;
  double x_um = 0.0;
  double y_um = 0.0;
  CellLabel annotated = CellLabel::Unlabeled;
  CellLabel predicted = CellLabel::Unlabeled;
  double decision = 0.0;
};

}  // namespace

// ------------------------------------------------------------------ writer

class Pipeline::Writer {
 public:
  Writer(fs::path base, std::string prefix) : base_(std::move(base)), prefix_(std::move(prefix)) {}

  void bytes(const std::string& rel, std::span<const std::uint8_t> data) {
    const fs::path path = base_ / prefix_ / rel;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    record(prefix_ + "/" + rel, sha256_hex(data));
  }

  void text(const std::string& rel, const std::string& content) {
    bytes(rel, std::span(reinterpret_cast<const std::uint8_t*>(content.data()), content.size()));
  }

  void record(const std::string& key, const std::string& hash) {
    std::lock_guard lock(mutex_);
    outputs_[key] = hash;
  }

  std::map<std::string, std::string> take() { return std::move(outputs_); }

 private:
  fs::path base_;
  std::string prefix_;
  std::mutex mutex_;
  std::map<std::string, std::string> outputs_;
};

// ------------------------------------------------------------------ pipeline

Pipeline::Pipeline(PipelineConfig config, Logger logger) : config_(std::move(config)), logger_(logger) {
  config_.validate();
}

const std::vector<std::string>& Pipeline::stage_names() {
  static const std::vector<std::string> names{"synth",        "deconvolve",  "segment",     "label",
                                              "features",     "train-cell",  "predict-cell", "patchify",
                                              "train-patch",  "predict-patch", "subjects",  "report"};
  return names;
}

std::string Pipeline::stage_path(std::string_view stage, const std::string& rel) const {
  return (fs::path(config_.output_dir) / stage_dir_name(stage) / rel).string();
}

std::string Pipeline::require(std::string_view stage, const std::string& rel) const {
  const std::string path = stage_path(stage, rel);
  if (!fs::exists(path)) {
    throw Error(ErrorKind::MissingInput, path + " (run the \"" + std::string(stage) + "\" stage first)");
  }
  return path;
}

StageResult Pipeline::run(std::string_view stage) {
  using Fn = void (Pipeline::*)(Writer&);
  static const std::map<std::string, Fn, std::less<>> table{
      {"synth", &Pipeline::synth},
      {"deconvolve", &Pipeline::deconvolve},
      {"segment", &Pipeline::segment},
      {"label", &Pipeline::label},
      {"features", &Pipeline::features},
      {"train-cell", &Pipeline::train_cell},
      {"predict-cell", &Pipeline::predict_cell},
      {"patchify", &Pipeline::patchify},
      {"train-patch", &Pipeline::train_patch},
      {"predict-patch", &Pipeline::predict_patch},
      {"subjects", &Pipeline::subjects},
      {"report", &Pipeline::report}};
  const auto it = table.find(stage);
  if (it == table.end()) throw Error(ErrorKind::ConfigError, "unknown stage \"" + std::string(stage) + "\"");

  const auto start = std::chrono::steady_clock::now();
  logger_.log("info", {{"stage", stage}, {"event", "start"}});
  const bool is_synth = stage == "synth";
  const fs::path base = is_synth ? fs::path(config_.cohort_dir) : fs::path(config_.output_dir);
  Writer writer(base, is_synth ? "" : stage_dir_name(stage));
  try {
    if (!is_synth) {
      std::error_code ec;
      fs::remove_all(fs::path(config_.output_dir) / stage_dir_name(stage), ec);
    }
    (this->*(it->second))(writer);
  } catch (const Error& e) {
    logger_.log("error", {{"stage", stage}, {"event", "failed"}, {"kind", to_string(e.kind())}, {"message", e.what()}});
    if (e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::MissingInput) throw;
    throw Error(ErrorKind::StageFailure, std::string(stage) + ": " + e.what());
  } catch (const std::exception& e) {
    logger_.log("error", {{"stage", stage}, {"event", "failed"}, {"message", e.what()}});
    throw Error(ErrorKind::StageFailure, std::string(stage) + ": " + e.what());
  }
  StageResult result;
  result.stage = std::string(stage);
  result.outputs = writer.take();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  logger_.log("info", {{"stage", stage}, {"event", "done"}, {"files", result.outputs.size()}, {"seconds", result.seconds}});
  return result;
}

json Pipeline::run_all() {
  json stages = json::object();
  json timings = json::object();
  for (const std::string& name : stage_names()) {
    const StageResult r = run(name);
    stages[name] = r.outputs;
    timings[name] = r.seconds;
  }
  json inputs = json::object();
  for (const auto& [path, hash] : stages["synth"].items()) inputs[path] = hash;

  json subjects = json::array();
  const json boot = json::parse(csv::read_text(stage_path("subjects", "bootstrap.json")));
  for (const auto& row : read_table(stage_path("subjects", "subject_calls.csv"), 7)) {
    if (row[0] == "subject_id") continue;
    json s = {{"subject_id", row[0]}, {"n_patches", to_int(row[1], "subject_calls")}, {"fraction_positive", row[2]},
              {"median", row[3]}, {"predicted", row[4]}, {"true", row[5]}, {"correct", row[6] == "1"}};
    if (boot.contains(row[0])) s["replicate_means"] = boot[row[0]]["replicate_means"];
    subjects.push_back(s);
  }
  const json summary = json::parse(csv::read_text(stage_path("report", "summary.json")));

  json manifest = {{"config", config_.to_json()},
                   {"versions",
                    {{"ovpath", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"libpng", PNG_LIBPNG_VER_STRING},
                     {"openssl", OPENSSL_VERSION_TEXT}}},
                   {"inputs", inputs},
                   {"stages", stages},
                   {"summary", summary},
                   {"subjects", subjects}};
  csv::write_text((fs::path(config_.output_dir) / "manifest.json").string(), json_text(manifest));
  csv::write_text((fs::path(config_.output_dir) / "timings.json").string(), json_text(timings));
  return manifest;
}

// ------------------------------------------------------------------ stages

void Pipeline::synth(Writer& w) {
  const fs::path root(config_.cohort_dir);
  std::error_code ec;
  for (Histotype h : {Histotype::HGSOC, Histotype::SBOT}) fs::remove_all(root / std::string(to_string(h)), ec);
  fs::remove(root / "manifest.json", ec);
  fs::create_directories(root, ec);
  const json manifest = generate_cohort(config_.synth, config_.cohort_dir, config_.workers);
  for (const json& f : manifest["files"]) w.record("cohort/" + f["path"].get<std::string>(), f["sha256"].get<std::string>());
  w.record("cohort/manifest.json", sha256_file((root / "manifest.json").string()));
  logger_.log("info", {{"stage", "synth"}, {"rois", manifest["rois"].size()}});
}

void Pipeline::deconvolve(Writer& w) {
  const auto rois = discover_rois(config_.cohort_dir);
  const StainMatrix stains =
      config_.stain_matrix.empty() ? StainMatrix::defaults() : StainMatrix::from_json_file(config_.stain_matrix);
  const double ps = config_.segmentation.pixel_size;
  parallel_for(rois.size(), config_.workers, [&](std::size_t i) {
    const RoiRef& r = rois[i];
    const RgbTile tile = read_rgb((fs::path(config_.cohort_dir) / (r.rel() + ".png")).string(), ps);
    const OdTileSet od = decompose_tile(tile, stains);
    w.bytes(r.rel() + ".hema.png", encode_png16(quantize_od(od.hema)));
    w.bytes(r.rel() + ".eosin.png", encode_png16(quantize_od(od.eosin)));
    w.text(r.rel() + ".json", json_text({{"roi_id", r.id()},
                                         {"width", tile.width},
                                         {"height", tile.height},
                                         {"residual_mean", od.residual_norm.mean()}}));
  });
  logger_.log("info", {{"stage", "deconvolve"}, {"rois", rois.size()}});
}

void Pipeline::segment(Writer& w) {
  const auto rois = discover_rois(config_.cohort_dir);
  for (const RoiRef& r : rois) require("deconvolve", r.rel() + ".hema.png");
  std::vector<std::size_t> counts(rois.size());
  parallel_for(rois.size(), config_.workers, [&](std::size_t i) {
    const RoiRef& r = rois[i];
    const Plane hema = read_od_png(stage_path("deconvolve", r.rel() + ".hema.png"));
    const auto cells = segment_cells(hema, config_.segmentation, r.id());
    const int width = static_cast<int>(hema.cols()), height = static_cast<int>(hema.rows());
    std::vector<PixelSet> nuclei, masks;
    for (const CellObject& c : cells) {
      nuclei.push_back(c.nucleus_mask);
      masks.push_back(c.cell_mask);
    }
    w.bytes(r.rel() + ".nuclei.png", encode_png16(label_plane_u16(labels_from_pixel_sets(nuclei, width, height))));
    w.bytes(r.rel() + ".cells.png", encode_png16(label_plane_u16(labels_from_pixel_sets(masks, width, height))));
    w.text(r.rel() + ".geojson", cells_to_geojson(cells, config_.segmentation.pixel_size, r.id()));
    w.text(r.rel() + ".json",
           json_text({{"roi_id", r.id()}, {"width", width}, {"height", height}, {"n_cells", cells.size()}}));
    counts[i] = cells.size();
  });
  logger_.log("info", {{"stage", "segment"}, {"rois", rois.size()},
                       {"cells", std::accumulate(counts.begin(), counts.end(), std::size_t{0})}});
}

namespace {

std::vector<CellObject> load_cells(const std::string& nuclei_png, const std::string& cells_png, double ps,
                                   const std::string& id) {
  return cells_from_labels(read_label_png(nuclei_png), read_label_png(cells_png), ps, id);
}

RoiMeta load_meta(const std::string& path) {
  const json j = json::parse(csv::read_text(path));
  return {j.at("width").get<int>(), j.at("height").get<int>()};
}

}  // namespace

void Pipeline::label(Writer& w) {
  const auto rois = discover_rois(config_.cohort_dir);
  for (const RoiRef& r : rois) {
    require("segment", r.rel() + ".nuclei.png");
    require("segment", r.rel() + ".cells.png");
    if (!fs::exists(fs::path(config_.cohort_dir) / (r.rel() + ".geojson"))) {
      throw Error(ErrorKind::MissingInput, "annotation " + r.rel() + ".geojson");
    }
  }
  const double ps = config_.segmentation.pixel_size;
  parallel_for(rois.size(), config_.workers, [&](std::size_t i) {
    const RoiRef& r = rois[i];
    const auto cells = load_cells(stage_path("segment", r.rel() + ".nuclei.png"),
                                  stage_path("segment", r.rel() + ".cells.png"), ps, r.id());
    const AnnotationSet ann = read_annotations((fs::path(config_.cohort_dir) / (r.rel() + ".geojson")).string());
    const LabelAssignment assignment = assign_labels(cells, ann, ps);
    std::string out = "cell_id,centroid_x_um,centroid_y_um,label,label_source\n";
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const LabeledCell& lc = assignment.cells[k];
      out += std::to_string(lc.cell_id) + "," + fmt(cells[k].centroid_x) + "," + fmt(cells[k].centroid_y) + "," +
             std::string(to_string(lc.label)) + "," + std::string(to_string(lc.label_source)) + "\n";
    }
    w.text(r.rel() + ".labels.csv", out);
    w.text(r.rel() + ".warnings.json", json_text({{"roi_id", r.id()},
                                                  {"warnings", ann.warnings},
                                                  {"points_outside_cells", assignment.points_outside_cells}}));
  });
}

namespace {

struct LabelRow {
  int cell_id;
  double x_um;
  double y_um;
  CellLabel label;
};

std::vector<LabelRow> read_labels(const std::string& path) {
  std::vector<LabelRow> out;
  const auto t = read_table(path, 5);
  for (std::size_t i = 1; i < t.size(); ++i) {
    out.push_back({to_int(t[i][0], path), to_double(t[i][1], path), to_double(t[i][2], path), to_label(t[i][3])});
  }
  return out;
}

}  // namespace

void Pipeline::features(Writer& w) {
  const auto rois = discover_rois(config_.cohort_dir);
  for (const RoiRef& r : rois) {
    require("segment", r.rel() + ".nuclei.png");
    require("deconvolve", r.rel() + ".hema.png");
    require("label", r.rel() + ".labels.csv");
  }
  const double ps = config_.segmentation.pixel_size;
  parallel_for(rois.size(), config_.workers, [&](std::size_t i) {
    const RoiRef& r = rois[i];
    const auto cells = load_cells(stage_path("segment", r.rel() + ".nuclei.png"),
                                  stage_path("segment", r.rel() + ".cells.png"), ps, r.id());
    const Plane hema = read_od_png(stage_path("deconvolve", r.rel() + ".hema.png"));
    const Plane eosin = read_od_png(stage_path("deconvolve", r.rel() + ".eosin.png"));
    const auto labels = read_labels(stage_path("label", r.rel() + ".labels.csv"));
    if (labels.size() != cells.size()) throw Error(ErrorKind::LengthMismatch, r.id() + ": labels and cells differ");
    std::vector<CellFeatureVector> rows;
    json degenerate = json::object();
    for (std::size_t k = 0; k < cells.size(); ++k) {
      CellFeatureVector v = cell_feature_vector(cells[k], hema, eosin, ps);
      v.label = labels[k].label;
      if (v.degenerate_cytoplasm) degenerate[std::to_string(v.cell_id)] = true;
      rows.push_back(v);
    }
    w.text(r.rel() + ".features.csv", feature_csv_string(rows));
    w.text(r.rel() + ".degenerate.json", json_text(degenerate));
  });
}

namespace {

std::set<std::string> training_rois(const std::vector<RoiRef>& rois, int per_subject) {
  std::map<std::string, int> seen;
  std::set<std::string> out;
  for (const RoiRef& r : rois) {
    if (seen[r.subject]++ < per_subject) out.insert(r.id());
  }
  return out;
}

std::string confusion_rows(const std::string& scope, const ConfusionMatrix& m) {
  return scope + ",tumor," + std::to_string(m.counts[0][0]) + "," + std::to_string(m.counts[0][1]) + "," +
         fmt(m.accuracy) + "\n" + scope + ",stroma," + std::to_string(m.counts[1][0]) + "," +
         std::to_string(m.counts[1][1]) + "," + fmt(m.accuracy) + "\n";
}

}  // namespace

void Pipeline::train_cell(Writer& w) {
  const auto rois = discover_rois(config_.cohort_dir);
  const auto train = training_rois(rois, config_.cell_train_rois);
  std::vector<CellFeatureVector> pool;
  std::vector<std::pair<std::string, int>> origin;
  for (const RoiRef& r : rois) {
    if (!train.count(r.id())) continue;
    for (const CellFeatureVector& v : read_feature_csv(require("features", r.rel() + ".features.csv"))) {
      if (v.label == CellLabel::Unlabeled) continue;
      pool.push_back(v);
      origin.emplace_back(r.id(), v.cell_id);
    }
  }
  std::vector<std::size_t> pick(pool.size());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  if (pick.size() > static_cast<std::size_t>(config_.cell_train_max)) {
    std::mt19937_64 rng(derive_seed(config_.seed, fnv1a("train-cell")));
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(static_cast<std::size_t>(config_.cell_train_max));
    std::sort(pick.begin(), pick.end());
  }
  std::vector<CellFeatureVector> rows;
  std::string listing = "roi_id,cell_id,label\n";
  for (std::size_t k : pick) {
    rows.push_back(pool[k]);
    listing += origin[k].first + "," + std::to_string(origin[k].second) + "," + std::string(to_string(pool[k].label)) + "\n";
  }
  SvmTrace trace;
  const LinearModel model = train_cell_classifier(rows, config_.svm, &trace);
  w.text("cell_svm.json", json_text(model.to_json()));
  w.text("training_cells.csv", listing);

  std::string trace_csv = "epoch,dual_objective,primal_objective\n";
  for (std::size_t e = 0; e < trace.dual_objective.size(); ++e) {
    trace_csv += std::to_string(e + 1) + "," + fmt(trace.dual_objective[e]) + "," + fmt(trace.primal_objective[e]) + "\n";
  }
  w.text("trace.csv", trace_csv);

  std::string importance = "rank,feature,importance\n";
  int rank = 0;
  for (const FeatureImportance& f : feature_importance(model)) {
    importance += std::to_string(++rank) + "," + f.name + "," + fmt(f.importance) + "\n";
  }
  w.text("importance.csv", importance);

  const Eigen::MatrixXd x = feature_matrix(rows);
  std::vector<CellLabel> truth, predicted;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    truth.push_back(rows[i].label);
    predicted.push_back(predict_label(model.decision(x.row(i).transpose())));
  }
  w.text("training_confusion.csv", "scope,true_label,predicted_tumor,predicted_stroma,accuracy\n" +
                                       confusion_rows("training", confusion(truth, predicted)));

  if (x.rows() >= 3) {
    const CorrelationAnalysis corr = feature_correlation(x);
    const auto& names = cell_feature_names();
    std::string csv = "feature";
    for (int j : corr.leaf_order) csv += "," + names[j];
    csv += "\n";
    for (Eigen::Index a = 0; a < corr.reordered.rows(); ++a) {
      csv += names[corr.leaf_order[a]];
      for (Eigen::Index b = 0; b < corr.reordered.cols(); ++b) csv += "," + fmt(corr.reordered(a, b));
      csv += "\n";
    }
    w.text("correlation.csv", csv);
    std::string merges = "step,left,right,height\n";
    for (std::size_t m = 0; m < corr.merges.size(); ++m) {
      const auto& [l, r, h] = corr.merges[m];
      merges += std::to_string(m) + "," + std::to_string(l) + "," + std::to_string(r) + "," + fmt(h) + "\n";
    }
    w.text("dendrogram.csv", merges);
  }
  logger_.log("info", {{"stage", "train-cell"}, {"cells", rows.size()}, {"iterations", trace.iterations},
                       {"epochs", trace.dual_objective.size()}});
}

void Pipeline::predict_cell(Writer& w) {
  const auto rois = discover_rois(config_.cohort_dir);
  const LinearModel model = LinearModel::load(require("train-cell", "cell_svm.json"));
  const auto train = training_rois(rois, config_.cell_train_rois);
  for (const RoiRef& r : rois) {
    require("features", r.rel() + ".features.csv");
    require("label", r.rel() + ".labels.csv");
  }

  struct Held {
    std::vector<CellLabel> truth, predicted;
    std::vector<std::tuple<int, double, CellLabel, CellLabel>> wrong;  // cell id, decision, truth, predicted
    std::vector<CellFeatureValues> wrong_features;
  };
  std::vector<Held> held(rois.size());
  parallel_for(rois.size(), config_.workers, [&](std::size_t i) {
    const RoiRef& r = rois[i];
    const auto features = read_feature_csv(stage_path("features", r.rel() + ".features.csv"));
    const auto labels = read_labels(stage_path("label", r.rel() + ".labels.csv"));
    if (features.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, r.id() + ": features and labels differ");
    std::string out = "cell_id,centroid_x_um,centroid_y_um,annotated,predicted,decision,distance\n";
    const bool evaluate = !train.count(r.id());
    for (std::size_t k = 0; k < features.size(); ++k) {
      const Eigen::VectorXd x = features[k].values;
      const double d = model.decision(x);
      const CellLabel pred = predict_label(d);
      out += std::to_string(labels[k].cell_id) + "," + fmt(labels[k].x_um) + "," + fmt(labels[k].y_um) + "," +
             std::string(to_string(labels[k].label)) + "," + std::string(to_string(pred)) + "," + fmt(d) + "," +
             fmt(model.distance(x)) + "\n";
      if (evaluate && labels[k].label != CellLabel::Unlabeled) {
        held[i].truth.push_back(labels[k].label);
        held[i].predicted.push_back(pred);
        if (pred != labels[k].label) {
          held[i].wrong.emplace_back(labels[k].cell_id, d, labels[k].label, pred);
          held[i].wrong_features.push_back(features[k].values);
        }
      }
    }
    w.text(r.rel() + ".predictions.csv", out);
  });

  std::vector<CellLabel> all_t, all_p;
  std::map<Histotype, std::pair<std::vector<CellLabel>, std::vector<CellLabel>>> by_class;
  for (std::size_t i = 0; i < rois.size(); ++i) {
    all_t.insert(all_t.end(), held[i].truth.begin(), held[i].truth.end());
    all_p.insert(all_p.end(), held[i].predicted.begin(), held[i].predicted.end());
    auto& [t, p] = by_class[rois[i].histotype];
    t.insert(t.end(), held[i].truth.begin(), held[i].truth.end());
    p.insert(p.end(), held[i].predicted.begin(), held[i].predicted.end());
  }
  std::string conf = "scope,true_label,predicted_tumor,predicted_stroma,accuracy\n";
  json eval = json::object();
  if (!all_t.empty()) {
    const ConfusionMatrix m = confusion(all_t, all_p);
    conf += confusion_rows("held_out", m);
    eval["held_out"] = {{"accuracy", m.accuracy}, {"cells", m.total()}};
  }
  for (const auto& [h, tp] : by_class) {
    if (tp.first.empty()) continue;
    const ConfusionMatrix m = confusion(tp.first, tp.second);
    conf += confusion_rows(std::string(to_string(h)), m);
    eval[std::string(to_string(h))] = {{"accuracy", m.accuracy}, {"cells", m.total()}};
  }
  w.text("confusion.csv", conf);
  w.text("evaluation.json", json_text(eval));

  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t i = 0; i < rois.size(); ++i)
    for (std::size_t k = 0; k < held[i].wrong.size(); ++k) index.emplace_back(i, k);
  std::string mis = "roi_id,cell_id,true,predicted,decision,cluster,representative\n";
  if (!index.empty()) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(index.size()), kCellFeatureCount);
    for (std::size_t n = 0; n < index.size(); ++n) x.row(n) = held[index[n].first].wrong_features[index[n].second].transpose();
    const Clustering cl = cluster_misclassified(x, config_.misclassified_clusters, derive_seed(config_.seed, fnv1a("misclassified")));
    std::set<int> reps(cl.representative.begin(), cl.representative.end());
    for (std::size_t n = 0; n < index.size(); ++n) {
      const auto& [id, d, t, p] = held[index[n].first].wrong[index[n].second];
      mis += rois[index[n].first].id() + "," + std::to_string(id) + "," + std::string(to_string(t)) + "," +
             std::string(to_string(p)) + "," + fmt(d) + "," + std::to_string(cl.assignment[n]) + "," +
             (reps.count(static_cast<int>(n)) ? "1" : "0") + "\n";
    }
  }
  w.text("misclassified.csv", mis);
  logger_.log("info", {{"stage", "predict-cell"}, {"evaluation", eval}});
}

namespace {

std::vector<CellRow> read_predictions(const std::string& path) {
  std::vector<CellRow> out;
  const auto t = read_table(path, 7);
  for (std::size_t i = 1; i < t.size(); ++i) {
    out.push_back({to_int(t[i][0], path), to_double(t[i][1], path), to_double(t[i][2], path), to_label(t[i][3]),
                   to_label(t[i][4]), to_double(t[i][5], path)});
  }
  return out;
}

}  // namespace

void Pipeline::patchify(Writer& w) {
  const auto rois = discover_rois(config_.cohort_dir);
  for (const RoiRef& r : rois) {
    require("predict-cell", r.rel() + ".predictions.csv");
    require("features", r.rel() + ".features.csv");
    require("segment", r.rel() + ".json");
  }
  const double ps = config_.segmentation.pixel_size;
  std::vector<std::vector<Patch>> patches(rois.size());
  std::vector<std::vector<PatchDescriptor>> descriptors(rois.size());
  parallel_for(rois.size(), config_.workers, [&](std::size_t i) {
    const RoiRef& r = rois[i];
    const RoiMeta meta = load_meta(stage_path("segment", r.rel() + ".json"));
    const auto preds = read_predictions(stage_path("predict-cell", r.rel() + ".predictions.csv"));
    std::unordered_map<int, CellFeatureVector> features;
    for (const CellFeatureVector& v : read_feature_csv(stage_path("features", r.rel() + ".features.csv"))) {
      features.emplace(v.cell_id, v);
    }
    std::vector<PatchCell> cells;
    for (const CellRow& c : preds) cells.push_back({c.cell_id, c.predicted, c.x_um / ps, c.y_um / ps});
    if (meta.width < config_.patch_size || meta.height < config_.patch_size) {
      throw Error(ErrorKind::RoiTooSmall, r.id());
    }
    patches[i] = tile_patches(meta.width, meta.height, cells, r.id(), config_.patch_size, config_.min_cells_per_type);
    for (const Patch& p : patches[i]) {
      if (!p.eligible) continue;
      PatchDescriptor d = patch_descriptor(p, features, config_.bandwidths, config_.min_cells_per_type);
      d.label = std::string(to_string(r.histotype));
      descriptors[i].push_back(std::move(d));
    }
  });
  std::vector<Patch> all_patches;
  std::vector<PatchDescriptor> all;
  for (std::size_t i = 0; i < rois.size(); ++i) {
    all_patches.insert(all_patches.end(), patches[i].begin(), patches[i].end());
    all.insert(all.end(), descriptors[i].begin(), descriptors[i].end());
  }
  if (all.empty()) throw Error(ErrorKind::NoEligiblePatches, "no patch meets the eligibility threshold");
  w.text("patches.csv", patch_descriptor_csv(all, config_.bandwidths));
  w.text("eligibility.csv", eligibility_csv(all_patches));
  logger_.log("info", {{"stage", "patchify"}, {"patches", all_patches.size()}, {"eligible", all.size()}});
}

namespace {

struct PatchTable {
  std::vector<PatchDescriptor> rows;
  std::vector<std::string> names;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> subjects;
};

PatchTable load_patches(const std::string& path) {
  PatchTable t;
  t.rows = parse_patch_descriptor_csv(csv::read_text(path), &t.names);
  if (t.rows.empty()) throw Error(ErrorKind::NoEligiblePatches, path);
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  t.x.resize(n, t.rows.front().values.size());
  t.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PatchDescriptor& d = t.rows[i];
    t.x.row(i) = d.values.transpose();
    const auto h = parse_histotype(d.label);
    if (!h) throw Error(ErrorKind::UnknownLabel, "patch label \"" + d.label + "\"");
    t.y(i) = sign_of(*h);
    t.subjects.push_back(subject_of(d.roi_id));
  }
  return t;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(idx[i]);
  return out;
}

}  // namespace

void Pipeline::train_patch(Writer& w) {
  const PatchTable t = load_patches(require("patchify", "patches.csv"));

  // Subject-level folds, stratified by histotype.
  std::map<std::string, int> subject_sign;
  for (std::size_t i = 0; i < t.subjects.size(); ++i) subject_sign[t.subjects[i]] = static_cast<int>(t.y(i));
  std::vector<std::string> pos, neg;
  for (const auto& [s, sign] : subject_sign) (sign > 0 ? pos : neg).push_back(s);
  std::mt19937_64 rng(derive_seed(config_.seed, fnv1a("patch-folds")));
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::map<std::string, int> fold_of;
  const int folds = std::min<int>(config_.patch_cv_folds, static_cast<int>(subject_sign.size()));
  int next = 0;
  for (const auto* group : {&pos, &neg})
    for (const std::string& s : *group) fold_of[s] = next++ % folds;
  std::string folds_csv = "subject_id,fold\n";
  for (const auto& [s, f] : fold_of) folds_csv += s + "," + std::to_string(f) + "\n";
  w.text("folds.csv", folds_csv);

  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train;
    for (std::size_t i = 0; i < t.subjects.size(); ++i)
      if (fold_of[t.subjects[i]] != f) train.push_back(static_cast<Eigen::Index>(i));
    const LinearModel m = svm_train_raw(select_rows(t.x, train), select_rows(t.y, train), t.names, config_.svm);
    w.text("patch_svm_fold" + std::to_string(f) + ".json", json_text(m.to_json()));
  }
  SvmTrace trace;
  const LinearModel final_model = svm_train_raw(t.x, t.y, t.names, config_.svm, &trace);
  w.text("patch_svm.json", json_text(final_model.to_json()));

  const LassoSelection sel = lasso_select(t.x, t.y, t.names, config_.lasso, &t.subjects, config_.lasso_solver);
  w.text("lasso.json", json_text(sel.fit.model.to_json()));
  w.text("table2.csv", lasso_table_csv(sel.fit));
  std::string path_csv = "index,lambda,cv_mean,cv_se,nonzero\n";
  for (std::size_t k = 0; k < sel.lambdas.size(); ++k) {
    const int nz = k < sel.fit.path.size() ? sel.fit.path[k].second : -1;
    path_csv += std::to_string(k) + "," + fmt(sel.lambdas[k]) + "," + fmt(sel.cv_mean[k]) + "," + fmt(sel.cv_se[k]) +
                "," + std::to_string(nz) + "\n";
  }
  w.text("lasso_path.csv", path_csv);
  w.text("lasso_selection.json", json_text({{"index_min", sel.index_min},
                                            {"index_1se", sel.index_1se},
                                            {"lambda", sel.fit.lambda},
                                            {"selected", sel.fit.nonzero.size()}}));
  logger_.log("info", {{"stage", "train-patch"}, {"patches", t.rows.size()}, {"folds", folds},
                       {"lasso_selected", sel.fit.nonzero.size()}, {"svm_epochs", trace.dual_objective.size()}});
}

void Pipeline::predict_patch(Writer& w) {
  const PatchTable t = load_patches(require("patchify", "patches.csv"));
  std::map<std::string, int> fold_of;
  for (const auto& row : read_table(require("train-patch", "folds.csv"), 2)) {
    if (row[0] != "subject_id") fold_of[row[0]] = to_int(row[1], "folds.csv");
  }
  std::map<int, LinearModel> fold_models;
  for (const auto& [s, f] : fold_of) {
    if (!fold_models.count(f)) {
      fold_models.emplace(f, LinearModel::load(require("train-patch", "patch_svm_fold" + std::to_string(f) + ".json")));
    }
  }
  const LinearModel final_model = LinearModel::load(require("train-patch", "patch_svm.json"));
  const LinearModel lasso = LinearModel::load(require("train-patch", "lasso.json"));
  std::string out = "roi_id,grid_row,grid_col,subject_id,label,fold,decision,predicted,final_decision,lasso_score\n";
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto it = fold_of.find(t.subjects[i]);
    if (it == fold_of.end()) throw Error(ErrorKind::MissingInput, "no fold for subject " + t.subjects[i]);
    const Eigen::VectorXd x = t.x.row(static_cast<Eigen::Index>(i)).transpose();
    const double d = fold_models.at(it->second).decision(x);
    const PatchDescriptor& p = t.rows[i];
    out += p.roi_id + "," + std::to_string(p.grid_row) + "," + std::to_string(p.grid_col) + "," + t.subjects[i] + "," +
           p.label + "," + std::to_string(it->second) + "," + fmt(d) + "," + (d > 0.0 ? "HGSOC" : "SBOT") + "," +
           fmt(final_model.decision(x)) + "," + fmt(lasso.decision(x)) + "\n";
  }
  w.text("decisions.csv", out);
}

namespace {

struct DecisionRow {
  std::string subject;
  double label;  // +1 HGSOC
  double decision;
};

std::vector<DecisionRow> read_decisions(const std::string& path) {
  std::vector<DecisionRow> out;
  const auto t = read_table(path, 10);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const auto h = parse_histotype(t[i][4]);
    if (!h) throw Error(ErrorKind::UnknownLabel, t[i][4]);
    out.push_back({t[i][3], static_cast<double>(sign_of(*h)), to_double(t[i][6], path)});
  }
  return out;
}

}  // namespace

void Pipeline::subjects(Writer& w) {
  const auto rois = discover_rois(config_.cohort_dir);
  const auto decisions = read_decisions(require("predict-patch", "decisions.csv"));
  std::map<std::string, Histotype> truth;
  for (const RoiRef& r : rois) truth[r.subject] = r.histotype;
  std::map<std::string, std::vector<double>> by_subject;
  for (const DecisionRow& d : decisions) by_subject[d.subject].push_back(d.decision);

  std::string csv = "subject_id,n_patches,fraction_positive,median,predicted,true,correct\n";
  json boot = json::object();
  int correct = 0;
  for (const auto& [subject, h] : truth) {
    const auto it = by_subject.find(subject);
    if (it == by_subject.end()) {
      csv += subject + ",0,,,undetermined," + std::string(to_string(h)) + ",0\n";
      continue;
    }
    const SubjectCall call = subject_bootstrap(subject, it->second, config_.bootstrap_replicates, config_.seed);
    const bool ok = call.predicted == h;
    correct += ok;
    csv += subject + "," + std::to_string(call.n_patches) + "," + fmt(call.fraction_positive) + "," + fmt(call.median) +
           "," + std::string(to_string(call.predicted)) + "," + std::string(to_string(h)) + "," + (ok ? "1" : "0") + "\n";
    boot[subject] = {{"seed", call.seed}, {"replicate_means", call.replicate_means}};
  }
  w.text("subject_calls.csv", csv);
  w.text("bootstrap.json", json_text(boot));
  logger_.log("info", {{"stage", "subjects"}, {"subjects", truth.size()}, {"correct", correct}});
}

void Pipeline::report(Writer& w) {
  const auto rois = discover_rois(config_.cohort_dir);
  json summary = json::object();

  // Cell level.
  w.text("cell_confusion.csv", csv::read_text(require("predict-cell", "confusion.csv")));
  w.text("cell_importance.csv", csv::read_text(require("train-cell", "importance.csv")));
  w.text("misclassified_cells.csv", csv::read_text(require("predict-cell", "misclassified.csv")));
  const json cell_eval = json::parse(csv::read_text(require("predict-cell", "evaluation.json")));
  summary["cell"] = cell_eval;

  // Patch level, held-out decisions.
  const auto decisions = read_decisions(require("predict-patch", "decisions.csv"));
  Eigen::VectorXd d(static_cast<Eigen::Index>(decisions.size())), y(static_cast<Eigen::Index>(decisions.size()));
  std::int64_t counts[2][2] = {{0, 0}, {0, 0}};  // [true HGSOC/SBOT][pred HGSOC/SBOT]
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    d(static_cast<Eigen::Index>(i)) = decisions[i].decision;
    y(static_cast<Eigen::Index>(i)) = decisions[i].label;
    ++counts[decisions[i].label > 0 ? 0 : 1][decisions[i].decision > 0.0 ? 0 : 1];
  }
  const double patch_acc = decisions.empty() ? 0.0 : double(counts[0][0] + counts[1][1]) / double(decisions.size());
  w.text("patch_confusion.csv", "true_label,predicted_HGSOC,predicted_SBOT\nHGSOC," + std::to_string(counts[0][0]) +
                                    "," + std::to_string(counts[0][1]) + "\nSBOT," + std::to_string(counts[1][0]) +
                                    "," + std::to_string(counts[1][1]) + "\n");
  summary["patch"] = {{"accuracy", patch_acc}, {"patches", decisions.size()}};
  if ((y.array() > 0).any() && (y.array() < 0).any()) {
    const RocCurve roc = roc_auc(d, y);
    w.text("roc.csv", roc_csv(roc));
    summary["patch"]["auc"] = roc.auc;
  }
  if (!decisions.empty()) w.text("histogram.csv", histogram_csv(decision_histogram(d, y, 50)));
  w.text("table2.csv", csv::read_text(require("train-patch", "table2.csv")));

  // Subject level.
  const std::string calls = csv::read_text(require("subjects", "subject_calls.csv"));
  w.text("subject_calls.csv", calls);
  int n_subjects = 0, n_correct = 0;
  for (const auto& row : csv::parse(calls)) {
    if (row.size() < 7 || row[0] == "subject_id") continue;
    ++n_subjects;
    n_correct += row[6] == "1";
  }
  summary["subject"] = {{"subjects", n_subjects},
                        {"correct", n_correct},
                        {"accuracy", n_subjects ? double(n_correct) / n_subjects : 0.0}};

  // Overlays.
  if (config_.overlays) {
    const double ps = config_.segmentation.pixel_size;
    std::vector<OverlayLegend> legends(rois.size());
    parallel_for(rois.size(), config_.workers, [&](std::size_t i) {
      const RoiRef& r = rois[i];
      const RgbTile tile = read_rgb((fs::path(config_.cohort_dir) / (r.rel() + ".png")).string(), ps);
      const auto cells = load_cells(require("segment", r.rel() + ".nuclei.png"),
                                    require("segment", r.rel() + ".cells.png"), ps, r.id());
      const auto preds = read_predictions(require("predict-cell", r.rel() + ".predictions.csv"));
      if (preds.size() != cells.size()) throw Error(ErrorKind::LengthMismatch, r.id() + ": predictions and cells differ");
      std::vector<CellLabel> labels;
      for (const CellRow& p : preds) labels.push_back(p.predicted);
      const RgbTile overlay = emit_overlays(tile, cells, labels, &legends[i]);
      w.bytes("overlays/" + r.rel() + ".png", encode_png(overlay));
      w.text("overlays/" + r.rel() + ".legend.json",
             json_text({{"tumor", legends[i].tumor}, {"stroma", legends[i].stroma}, {"unlabeled", legends[i].unlabeled}}));
    });
  }
  w.text("summary.json", json_text(summary));
  logger_.log("info", {{"stage", "report"}, {"summary", summary}});
}

}  // namespace ovpath

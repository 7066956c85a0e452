#pragma once

#include "ovpath/config.hpp"
#include "ovpath/labels.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ovpath {

/// One ROI tile of the cohort tree <class>/<subject>/<roi>.png.
struct RoiRef {
  Histotype histotype = Histotype::HGSOC;
  std::string subject;
  std::string roi;

  std::string id() const { return subject + "/" + roi; }
  std::string rel() const { return std::string(to_string(histotype)) + "/" + subject + "/" + roi; }
};

/// Sorted by (class, subject, roi). Throws MissingInput when nothing is found.
std::vector<RoiRef> discover_rois(const std::string& cohort_dir);

/// Line-delimited JSON events.
class Logger {
 public:
  explicit Logger(std::ostream* sink = nullptr) : sink_(sink) {}
  void log(const std::string& level, const nlohmann::json& fields) const;

 private:
  std::ostream* sink_;
};

struct StageResult {
  std::string stage;
  std::map<std::string, std::string> outputs;  // path relative to output_dir -> sha256
  double seconds = 0.0;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, Logger logger = Logger{});

  static const std::vector<std::string>& stage_names();

  /// Runs one stage by name; stage errors other than ConfigError and
  /// MissingInput surface as StageFailure naming the stage.
  StageResult run(std::string_view stage);

  /// Chains every stage and writes manifest.json (deterministic) and
  /// timings.json (wall clock) to the output directory.
  nlohmann::json run_all();

  const PipelineConfig& config() const { return config_; }

 private:
  class Writer;

  void synth(Writer& w);
  void deconvolve(Writer& w);
  void segment(Writer& w);
  void label(Writer& w);
  void features(Writer& w);
  void train_cell(Writer& w);
  void predict_cell(Writer& w);
  void patchify(Writer& w);
  void train_patch(Writer& w);
  void predict_patch(Writer& w);
  void subjects(Writer& w);
  void report(Writer& w);

  std::string stage_path(std::string_view stage, const std::string& rel) const;
  std::string require(std::string_view stage, const std::string& rel) const;

  PipelineConfig config_;
  Logger logger_;
};

}  // namespace ovpath

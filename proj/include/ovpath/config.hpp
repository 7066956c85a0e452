#pragma once

#include "ovpath/patch_classifier.hpp"
#include "ovpath/patch_features.hpp"
#include "ovpath/segment.hpp"
#include "ovpath/svm.hpp"
#include "ovpath/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ovpath {

struct PipelineConfig {
  std::string cohort_dir = "cohort";
  std::string output_dir = "out";
  SegmentationParams segmentation;
  std::string stain_matrix;  // JSON file; empty selects the default basis
  SvmOptions svm;
  LassoPathSpec lasso;
  LassoOptions lasso_solver;
  std::vector<double> bandwidths = kDefaultBandwidths;
  int patch_size = kPatchSize;
  int min_cells_per_type = kMinCellsPerType;
  int patch_cv_folds = 5;
  int cell_train_rois = 1;      // leading ROIs per subject used to train the cell SVM
  int cell_train_max = 8000;    // subsample cap for cell SVM training
  int misclassified_clusters = 10;
  int bootstrap_replicates = 1000;
  bool overlays = true;
  std::uint64_t seed = 7;
  int workers = 1;
  CohortSpec synth;

  /// Propagates the global seed into every seeded component.
  void apply_seed(std::uint64_t s);
  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  /// Missing keys keep defaults; unknown keys and out-of-range values raise ConfigError.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);
};

}  // namespace ovpath

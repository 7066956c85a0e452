#include "ovpath/config.hpp"

#include "ovpath/csv.hpp"
#include "ovpath/error.hpp"
#include "ovpath/json_util.hpp"

namespace ovpath {

using nlohmann::json;

void PipelineConfig::apply_seed(std::uint64_t s) {
  seed = s;
  svm.seed = s;
  lasso.seed = s;
  synth.seed = s;
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); };
  if (cohort_dir.empty()) fail("cohort_dir must not be empty");
  if (output_dir.empty()) fail("output_dir must not be empty");
  segmentation.validate();
  if (!(svm.c > 0.0)) fail("svm.c must be positive");
  if (!(svm.kkt_tolerance > 0.0)) fail("svm.kkt_tolerance must be positive");
  if (!(svm.relative_change >= 0.0)) fail("svm.relative_change must be non-negative");
  if (svm.max_epochs < 1) fail("svm.max_epochs must be >= 1");
  if (lasso.n_lambda < 2) fail("lasso.n_lambda must be >= 2");
  if (!(lasso.min_ratio > 0.0 && lasso.min_ratio < 1.0)) fail("lasso.min_ratio must lie in (0, 1)");
  if (lasso.folds < 2) fail("lasso.folds must be >= 2");
  if (!(lasso.max_dev_ratio > 0.0 && lasso.max_dev_ratio <= 1.0)) fail("lasso.max_dev_ratio must lie in (0, 1]");
  if (!(lasso_solver.tolerance > 0.0)) fail("lasso.tolerance must be positive");
  if (bandwidths.empty()) fail("patch.bandwidths must not be empty");
  for (double h : bandwidths)
    if (!(h > 0.0)) fail("patch.bandwidths must be positive");
  if (patch_size < 16) fail("patch.size must be >= 16");
  if (min_cells_per_type < 1) fail("patch.min_cells_per_type must be >= 1");
  if (patch_cv_folds < 2) fail("patch.cv_folds must be >= 2");
  if (cell_train_rois < 1) fail("cell_training.rois_per_subject must be >= 1");
  if (cell_train_max < 2) fail("cell_training.max_cells must be >= 2");
  if (misclassified_clusters < 1) fail("cell_training.misclassified_clusters must be >= 1");
  if (bootstrap_replicates < 1) fail("bootstrap_replicates must be >= 1");
  if (workers < 1 || workers > 1024) fail("workers must lie in [1, 1024]");
  synth.validate();
}

json PipelineConfig::to_json() const {
  json synth_json = synth.to_json();
  synth_json.erase("seed");
  return {{"cohort_dir", cohort_dir},
          {"output_dir", output_dir},
          {"segmentation",
           {{"pixel_size", segmentation.pixel_size},
            {"gaussian_sigma", segmentation.gaussian_sigma},
            {"background_radius", segmentation.background_radius},
            {"od_threshold", segmentation.od_threshold},
            {"min_nucleus_area", segmentation.min_nucleus_area},
            {"max_nucleus_area", segmentation.max_nucleus_area},
            {"cell_expansion", segmentation.cell_expansion},
            {"seed_merge_distance_px", segmentation.seed_merge_distance_px}}},
          {"stain_matrix", stain_matrix},
          {"svm",
           {{"c", svm.c},
            {"kkt_tolerance", svm.kkt_tolerance},
            {"relative_change", svm.relative_change},
            {"max_epochs", svm.max_epochs}}},
          {"lasso",
           {{"n_lambda", lasso.n_lambda},
            {"min_ratio", lasso.min_ratio},
            {"folds", lasso.folds},
            {"max_dev_ratio", lasso.max_dev_ratio},
            {"tolerance", lasso_solver.tolerance},
            {"max_sweeps", lasso_solver.max_sweeps}}},
          {"patch",
           {{"size", patch_size},
            {"min_cells_per_type", min_cells_per_type},
            {"bandwidths", bandwidths},
            {"cv_folds", patch_cv_folds}}},
          {"cell_training",
           {{"rois_per_subject", cell_train_rois},
            {"max_cells", cell_train_max},
            {"misclassified_clusters", misclassified_clusters}}},
          {"bootstrap_replicates", bootstrap_replicates},
          {"overlays", overlays},
          {"seed", seed},
          {"workers", workers},
          {"synth", synth_json}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  StrictObject o(j, "config");
  o.get("cohort_dir", c.cohort_dir);
  o.get("output_dir", c.output_dir);
  if (const json* s = o.child("segmentation")) {
    StrictObject so(*s, "config.segmentation");
    so.get("pixel_size", c.segmentation.pixel_size);
    so.get("gaussian_sigma", c.segmentation.gaussian_sigma);
    so.get("background_radius", c.segmentation.background_radius);
    so.get("od_threshold", c.segmentation.od_threshold);
    so.get("min_nucleus_area", c.segmentation.min_nucleus_area);
    so.get("max_nucleus_area", c.segmentation.max_nucleus_area);
    so.get("cell_expansion", c.segmentation.cell_expansion);
    so.get("seed_merge_distance_px", c.segmentation.seed_merge_distance_px);
    so.finish();
  }
  o.get("stain_matrix", c.stain_matrix);
  if (const json* s = o.child("svm")) {
    StrictObject so(*s, "config.svm");
    so.get("c", c.svm.c);
    so.get("kkt_tolerance", c.svm.kkt_tolerance);
    so.get("relative_change", c.svm.relative_change);
    so.get("max_epochs", c.svm.max_epochs);
    so.finish();
  }
  if (const json* s = o.child("lasso")) {
    StrictObject so(*s, "config.lasso");
    so.get("n_lambda", c.lasso.n_lambda);
    so.get("min_ratio", c.lasso.min_ratio);
    so.get("folds", c.lasso.folds);
    so.get("max_dev_ratio", c.lasso.max_dev_ratio);
    so.get("tolerance", c.lasso_solver.tolerance);
    so.get("max_sweeps", c.lasso_solver.max_sweeps);
    so.finish();
  }
  if (const json* s = o.child("patch")) {
    StrictObject so(*s, "config.patch");
    so.get("size", c.patch_size);
    so.get("min_cells_per_type", c.min_cells_per_type);
    so.get("bandwidths", c.bandwidths);
    so.get("cv_folds", c.patch_cv_folds);
    so.finish();
  }
  if (const json* s = o.child("cell_training")) {
    StrictObject so(*s, "config.cell_training");
    so.get("rois_per_subject", c.cell_train_rois);
    so.get("max_cells", c.cell_train_max);
    so.get("misclassified_clusters", c.misclassified_clusters);
    so.finish();
  }
  o.get("bootstrap_replicates", c.bootstrap_replicates);
  o.get("overlays", c.overlays);
  std::uint64_t seed = c.seed;
  o.get("seed", seed);
  o.get("workers", c.workers);
  if (const json* s = o.child("synth")) {
    if (s->is_object() && s->contains("seed")) {
      throw Error(ErrorKind::ConfigError, "config.synth: the generator uses the top-level \"seed\"");
    }
    c.synth = CohortSpec::from_json(*s);
  }
  o.finish();
  c.apply_seed(seed);
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  json j;
  try {
    j = json::parse(csv::read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, path + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace ovpath

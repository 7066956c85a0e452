#pragma once

#include "ovpath/annotation.hpp"
#include "ovpath/image.hpp"
#include "ovpath/labels.hpp"
#include "ovpath/stain.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ovpath {

/// Per-histotype population parameters. Lengths in µm, densities per mm².
struct ClassParams {
  double tumor_radius_mean = 4.0;
  double tumor_radius_std = 1.2;
  double tumor_radius_min = 2.0;
  double tumor_aspect_std = 0.15;  // aspect = 1 + |N(0, s)|, area preserving
  double tumor_hema_mean = 0.9;
  double tumor_hema_std = 0.2;
  double tumor_eosin_mean = 0.3;
  double tumor_eosin_std = 0.05;
  double stroma_semi_major = 4.0;
  double stroma_semi_minor = 1.5;
  double stroma_hema_mean = 0.8;
  double stroma_hema_std = 0.1;
  double stroma_eosin_mean = 0.55;
  double stroma_eosin_std = 0.05;
  double tumor_density = 4000.0;
  double stroma_density = 2500.0;
  double cluster_sigma = 40.0;
  int clusters_per_roi = 4;

  static ClassParams hgsoc_defaults();
  static ClassParams sbot_defaults();
  void validate() const;  // throws ConfigError
};

struct CohortSpec {
  int n_subjects_per_class = 15;
  int rois_per_subject = 10;
  int roi_size = 1024;  // px, square
  double pixel_size = 0.25;
  ClassParams hgsoc = ClassParams::hgsoc_defaults();
  ClassParams sbot = ClassParams::sbot_defaults();
  double min_gap = 1.0;            // µm between nucleus bounding circles
  double cytoplasm_margin = 2.5;   // µm of eosin beyond the nucleus
  double background_eosin = 0.08;  // OD concentration outside cells
  double noise_std = 0.01;         // per-plane concentration noise
  int max_attempts = 100;
  double max_drop_fraction = 0.2;
  std::uint64_t seed = 7;

  const ClassParams& params(Histotype h) const { return h == Histotype::HGSOC ? hgsoc : sbot; }
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys raise ConfigError.
  static CohortSpec from_json(const nlohmann::json& j);
};

struct CellRecord {
  int id = 0;
  double x = 0.0;  // µm, ROI frame
  double y = 0.0;
  double semi_major = 0.0;  // µm
  double semi_minor = 0.0;
  double angle = 0.0;  // radians
  CellLabel label = CellLabel::Tumor;
  double hema = 0.0;
  double eosin = 0.0;
  int cluster = -1;  // -1 for stroma
};

struct GroundTruth {
  Histotype histotype = Histotype::HGSOC;
  int subject_index = 0;
  int roi_index = 0;
  std::string subject_id;
  std::string roi_id;  // "<subject>/<roi>"
  std::uint64_t seed = 0;
  std::vector<CellRecord> cells;
  int requested_tumor = 0;
  int requested_stroma = 0;
  int dropped = 0;
  AnnotationSet annotations;
  Plane hema;  // planted concentrations
  Plane eosin;
};

struct RoiSample {
  RgbTile tile;
  GroundTruth truth;
};

std::string subject_name(Histotype h, int subject_index);  // "HGSOC_01"
std::string roi_name(int roi_index);                       // "roi_00"

RoiSample generate_roi(const CohortSpec& spec, Histotype histotype, int subject_index, int roi_index);

/// Writes cohort/<class>/<subject>/<roi>.png + .geojson and manifest.json;
/// returns the manifest.
nlohmann::json generate_cohort(const CohortSpec& spec, const std::string& out_dir, int workers = 1);

}  // namespace ovpath

#pragma once

#include "ovpath/image.hpp"
#include "ovpath/labels.hpp"
#include "ovpath/segment.hpp"

#include <Eigen/Core>

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace ovpath {

inline constexpr int kCellFeatureCount = 41;
using CellFeatureValues = Eigen::Matrix<double, kCellFeatureCount, 1>;

/// Compartment and measurement of each canonical feature; the CSV column name
/// is "<Compartment>: <Measurement>" except for the area ratio.
struct FeatureName {
  std::string_view compartment;
  std::string_view measurement;
};

const std::array<FeatureName, kCellFeatureCount>& cell_feature_parts();
const std::vector<std::string>& cell_feature_names();

struct ShapeFeatures {
  double area = 0, perimeter = 0, circularity = 0, max_caliper = 0, min_caliper = 0,
         eccentricity = 0;
};

ShapeFeatures shape_features(const PixelSet& mask, double pixel_size);

struct IntensityFeatures {
  double mean = 0, sum = 0, std = 0, max = 0, min = 0, range = 0;
};

/// Population statistics of `plane` over the mask.
IntensityFeatures intensity_features(const PixelSet& mask, const Plane& plane);

struct CellFeatureVector {
  int cell_id = 0;
  CellLabel label = CellLabel::Unlabeled;
  CellFeatureValues values = CellFeatureValues::Zero();
  bool degenerate_cytoplasm = false;
};

CellFeatureVector cell_feature_vector(const CellObject& cell, const Plane& hema, const Plane& eosin,
                                      double pixel_size);

/// Header "label" + canonical names; rows ordered by cell id; %.6g values; LF.
void export_feature_csv(std::vector<CellFeatureVector> rows, const std::string& path);
std::string feature_csv_string(std::vector<CellFeatureVector> rows);

/// Rows come back in file order; cell ids are the 1-based row positions.
std::vector<CellFeatureVector> read_feature_csv(const std::string& path);
std::vector<CellFeatureVector> parse_feature_csv(const std::string& text);

}  // namespace ovpath

#pragma once

#include "ovpath/geometry.hpp"
#include "ovpath/labels.hpp"
#include "ovpath/segment.hpp"

#include <string>
#include <vector>

namespace ovpath {

/// Pathologist annotations in the ROI frame (µm). Only tumor and stroma are
/// valid labels.
struct AnnotatedPolygon {
  std::vector<Polygon> rings;  // exterior first, then holes
  CellLabel label = CellLabel::Tumor;

  double area() const;  // exterior minus holes
  bool contains(const Point2& p) const;
};

struct AnnotatedPoint {
  Point2 position;
  CellLabel label = CellLabel::Tumor;
};

struct AnnotationSet {
  std::vector<AnnotatedPolygon> polygons;
  std::vector<AnnotatedPoint> points;
  std::string roi_id;
  std::vector<std::string> warnings;
};

AnnotationSet parse_annotations(const std::string& geojson);
AnnotationSet read_annotations(const std::string& path);
std::string annotations_to_geojson(const AnnotationSet& set);

struct LabeledCell {
  int cell_id = 0;
  CellLabel label = CellLabel::Unlabeled;
  LabelSource label_source = LabelSource::None;
};

struct LabelAssignment {
  std::vector<LabeledCell> cells;    // same order as the input cells
  int points_outside_cells = 0;
};

/// Polygon containing the nucleus centroid (innermost = smallest area wins);
/// a point inside a cell mask overrides it.
LabelAssignment assign_labels(const std::vector<CellObject>& cells, const AnnotationSet& ann,
                              double pixel_size);

/// FeatureCollection of nucleus and cell outlines in µm.
std::string cells_to_geojson(const std::vector<CellObject>& cells, double pixel_size,
                             const std::string& roi_id);

}  // namespace ovpath

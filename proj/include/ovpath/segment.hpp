#pragma once

#include "ovpath/image.hpp"

#include <string>
#include <vector>

namespace ovpath {

/// Lengths in µm, areas in µm^2, threshold in OD units.
struct SegmentationParams {
  double pixel_size = 0.25;
  double gaussian_sigma = 1.5;
  double background_radius = 8.0;
  double od_threshold = 0.1;
  double min_nucleus_area = 10.0;
  double max_nucleus_area = 400.0;
  double cell_expansion = 5.0;
  double seed_merge_distance_px = 4.0;

  void validate() const;  // throws ConfigError

  double sigma_px() const { return gaussian_sigma / pixel_size; }
  double background_radius_px() const { return background_radius / pixel_size; }
  double expansion_px() const { return cell_expansion / pixel_size; }
  double min_area_px() const { return min_nucleus_area / (pixel_size * pixel_size); }
  double max_area_px() const { return max_nucleus_area / (pixel_size * pixel_size); }
};

struct CellObject {
  int id = 0;
  PixelSet nucleus_mask;
  PixelSet cytoplasm_mask;
  PixelSet cell_mask;
  double centroid_x = 0.0;  // µm, nucleus centroid with pixel centres at (i + 0.5) * pixel_size
  double centroid_y = 0.0;
  std::string tile_id;
};

/// Gaussian blur followed by subtraction of a disk-opening background estimate.
Plane preprocess(const Plane& hema, const SegmentationParams& params);

/// Threshold, distance-transform watershed, area filter. Masks are returned in
/// raster order of their first pixel and are pairwise disjoint.
std::vector<PixelSet> segment_nuclei(const Plane& smoothed, const SegmentationParams& params);

/// Grows each nucleus by up to cell_expansion; contested pixels go to the
/// nearest nucleus, ties to the lower id. Cell ids are 1-based positions.
std::vector<CellObject> expand_cells(const std::vector<PixelSet>& nuclei,
                                     const SegmentationParams& params, int width, int height,
                                     const std::string& tile_id = {});

/// preprocess -> segment_nuclei -> expand_cells.
std::vector<CellObject> segment_cells(const Plane& hema, const SegmentationParams& params,
                                      const std::string& tile_id = {});

/// Reassembles cells from nucleus and cell label planes (0 = background, k = id).
std::vector<CellObject> cells_from_labels(const LabelPlane& nuclei, const LabelPlane& cells,
                                          double pixel_size, const std::string& tile_id = {});

std::pair<double, double> centroid_um(const PixelSet& mask, double pixel_size);

}  // namespace ovpath

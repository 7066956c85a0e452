#pragma once

#include "ovpath/cell_features.hpp"
#include "ovpath/error.hpp"
#include "ovpath/labels.hpp"
#include "ovpath/stats.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

namespace ovpath {

inline constexpr int kPatchSize = 512;
inline constexpr int kMinCellsPerType = 10;
inline constexpr int kKdeStatsCount = 35;
inline constexpr int kCellStatsCount = kCellFeatureCount * 2 * 7;  // 574
inline constexpr int kPatchFeatureCount = kCellStatsCount + kKdeStatsCount;
inline const std::vector<double> kDefaultBandwidths{16, 20, 24, 30, 34};

struct PatchCell {
  int cell_id = 0;
  CellLabel label = CellLabel::Unlabeled;  // predicted
  double x = 0.0;                          // centroid, px relative to the ROI origin
  double y = 0.0;
};

struct Patch {
  std::string roi_id;
  int grid_row = 0;
  int grid_col = 0;
  int origin_x = 0;
  int origin_y = 0;
  int size = kPatchSize;
  std::vector<PatchCell> members;
  bool eligible = false;

  int count(CellLabel l) const;
};

/// Non-overlapping grid anchored at the ROI origin; partial strips dropped;
/// cells assigned by centroid with half-open intervals.
std::vector<Patch> tile_patches(int roi_width, int roi_height, const std::vector<PatchCell>& cells,
                                const std::string& roi_id = {}, int patch_size = kPatchSize,
                                int min_per_type = kMinCellsPerType);

bool check_eligibility(const Patch& patch, int min_per_type = kMinCellsPerType);

/// Normalised Gaussian density of the tumor centroids evaluated at each
/// stroma centroid: (1/n_t) sum_i exp(-|s - t_i|^2 / (2h^2)) / (2 pi h^2).
template <typename Derived1, typename Derived2>
Eigen::Matrix<typename Derived1::Scalar, Eigen::Dynamic, 1> kde_scores(const Eigen::MatrixBase<Derived1>& tumor,
                                                                      const Eigen::MatrixBase<Derived2>& stroma,
                                                                      typename Derived1::Scalar bandwidth) {
  using Scalar = typename Derived1::Scalar;
  if (tumor.rows() == 0) throw Error(ErrorKind::NoTumorCells, "KDE needs at least one tumor cell");
  if (stroma.rows() == 0) throw Error(ErrorKind::EmptyInput, "KDE needs at least one stroma cell");
  if (!(bandwidth > Scalar(0))) throw Error(ErrorKind::ConfigError, "KDE bandwidth must be positive");
  const Scalar h2 = bandwidth * bandwidth;
  const Scalar norm = Scalar(1) / (Scalar(2) * std::numbers::pi_v<Scalar> * h2);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(stroma.rows());
  for (Eigen::Index s = 0; s < stroma.rows(); ++s) {
    Scalar acc(0);
    for (Eigen::Index t = 0; t < tumor.rows(); ++t) {
      const Scalar d2 = (stroma.row(s) - tumor.row(t)).squaredNorm();
      acc += norm * std::exp(-d2 / (Scalar(2) * h2));
    }
    out(s) = acc / static_cast<Scalar>(tumor.rows());
  }
  return out;
}

/// "<celltype>_<Compartment>:<Measurement>:<Statistic>" for the 574 cell
/// statistics (tumor block first), then "interaction:KDE_h<width>:<Statistic>".
std::vector<std::string> patch_feature_names(const std::vector<double>& bandwidths = kDefaultBandwidths);

struct PatchDescriptor {
  std::string roi_id;
  int grid_row = 0;
  int grid_col = 0;
  std::string label;  // subject histotype, may be empty
  int n_tumor = 0;
  int n_stroma = 0;
  Eigen::VectorXd values;
};

/// `features` maps cell id to its descriptor. Throws IneligiblePatch.
PatchDescriptor patch_descriptor(const Patch& patch, const std::unordered_map<int, CellFeatureVector>& features,
                                 const std::vector<double>& bandwidths = kDefaultBandwidths,
                                 int min_per_type = kMinCellsPerType);

std::string patch_descriptor_csv(const std::vector<PatchDescriptor>& rows,
                                 const std::vector<double>& bandwidths = kDefaultBandwidths);
std::vector<PatchDescriptor> parse_patch_descriptor_csv(const std::string& text,
                                                        std::vector<std::string>* names = nullptr);

std::string eligibility_csv(const std::vector<Patch>& patches);

}  // namespace ovpath

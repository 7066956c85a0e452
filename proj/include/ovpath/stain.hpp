#pragma once

#include "ovpath/image.hpp"

#include <Eigen/Core>

#include <array>
#include <string>

namespace ovpath {

using OdPlanes = std::array<Plane, 3>;
using WhitePoint = std::array<double, 3>;

inline constexpr WhitePoint kDefaultWhite{255.0, 255.0, 255.0};

/// Hematoxylin and eosin absorbance directions in OD space, unit norm.
struct StainMatrix {
  Eigen::Vector3d hema;
  Eigen::Vector3d eosin;

  StainMatrix(const Eigen::Vector3d& h, const Eigen::Vector3d& e);

  /// Widely used H&E reference basis.
  static StainMatrix defaults();
  static StainMatrix from_json_file(const std::string& path);
  void to_json_file(const std::string& path) const;

  /// Columns H, E.
  Eigen::Matrix<double, 3, 2> basis() const;
};

struct OdTileSet {
  int width = 0;
  int height = 0;
  OdPlanes od_rgb;
  Plane hema;
  Plane eosin;
  Plane residual_norm;
};

/// OD = -log10(max(I, 1) / white), per channel.
OdPlanes rgb_to_od(const RgbTile& tile, const WhitePoint& white = kDefaultWhite);

/// I = round(white * 10^-OD), rounding half away from zero, clamped to [0, 255].
RgbTile od_to_rgb(const OdPlanes& od, const WhitePoint& white = kDefaultWhite,
                  double pixel_size = 0.25);

struct Concentrations {
  Plane hema;
  Plane eosin;
  Plane residual_norm;
};

/// Per-pixel least squares od ~ c_h H + c_e E. The residual is measured on the
/// unconstrained solution; negative concentrations are clamped to zero after.
Concentrations deconvolve(const OdPlanes& od, const StainMatrix& stains);

OdTileSet decompose_tile(const RgbTile& tile, const StainMatrix& stains,
                         const WhitePoint& white = kDefaultWhite);

/// Renders concentration planes back to OD, od = c_h H + c_e E.
OdPlanes compose_od(const Plane& hema, const Plane& eosin, const StainMatrix& stains);

}  // namespace ovpath

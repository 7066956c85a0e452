#include "ovpath/stain.hpp"

#include "ovpath/error.hpp"

#include <Eigen/LU>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ovpath {

namespace {

constexpr double kSingularDet = 1e-12;

Eigen::Vector3d unit(const Eigen::Vector3d& v, const char* which) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorKind::SingularStainMatrix, std::string(which) + " vector has zero norm");
  }
  return v / n;
}

Eigen::Matrix2d normal_matrix(const Eigen::Matrix<double, 3, 2>& a) {
  Eigen::Matrix2d m = a.transpose() * a;
  if (std::abs(m.determinant()) < kSingularDet) {
    throw Error(ErrorKind::SingularStainMatrix, "stain vectors are linearly dependent");
  }
  return m;
}

}  // namespace

StainMatrix::StainMatrix(const Eigen::Vector3d& h, const Eigen::Vector3d& e)
    : hema(unit(h, "hematoxylin")), eosin(unit(e, "eosin")) {}

StainMatrix StainMatrix::defaults() {
  return {Eigen::Vector3d(0.650, 0.704, 0.286), Eigen::Vector3d(0.072, 0.990, 0.105)};
}

Eigen::Matrix<double, 3, 2> StainMatrix::basis() const {
  Eigen::Matrix<double, 3, 2> a;
  a.col(0) = hema;
  a.col(1) = eosin;
  return a;
}

StainMatrix StainMatrix::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open stain matrix " + path);
  nlohmann::json doc;
  try {
    in >> doc;
    auto vec = [&](const char* key) {
      const auto& arr = doc.at(key);
      if (!arr.is_array() || arr.size() != 3) {
        throw Error(ErrorKind::ParseError, std::string(key) + " must be a 3-vector");
      }
      return Eigen::Vector3d(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
    };
    return {vec("hematoxylin"), vec("eosin")};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

void StainMatrix::to_json_file(const std::string& path) const {
  nlohmann::json doc;
  doc["hematoxylin"] = {hema.x(), hema.y(), hema.z()};
  doc["eosin"] = {eosin.x(), eosin.y(), eosin.z()};
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

OdPlanes rgb_to_od(const RgbTile& tile, const WhitePoint& white) {
  // One lookup table per channel; intensities are 8-bit.
  std::array<std::array<double, 256>, 3> lut{};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 256; ++i) {
      lut[c][i] = -std::log10(std::max(i, 1) / white[c]);
    }
  }
  OdPlanes od;
  for (auto& p : od) p.resize(tile.height, tile.width);
  for (int y = 0; y < tile.height; ++y) {
    for (int x = 0; x < tile.width; ++x) {
      for (int c = 0; c < 3; ++c) od[c](y, x) = lut[c][tile.at(x, y, c)];
    }
  }
  return od;
}

RgbTile od_to_rgb(const OdPlanes& od, const WhitePoint& white, double pixel_size) {
  const int h = static_cast<int>(od[0].rows());
  const int w = static_cast<int>(od[0].cols());
  RgbTile tile(w, h, pixel_size);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = white[c] * std::pow(10.0, -od[c](y, x));
        tile.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return tile;
}

Concentrations deconvolve(const OdPlanes& od, const StainMatrix& stains) {
  const Eigen::Matrix<double, 3, 2> a = stains.basis();
  const Eigen::Matrix<double, 2, 3> pinv = normal_matrix(a).inverse() * a.transpose();

  const Eigen::Index h = od[0].rows();
  const Eigen::Index w = od[0].cols();
  Concentrations out{Plane(h, w), Plane(h, w), Plane(h, w)};
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const Eigen::Vector3d v(od[0](y, x), od[1](y, x), od[2](y, x));
      const Eigen::Vector2d c = pinv * v;
      out.residual_norm(y, x) = (v - a * c).norm();
      out.hema(y, x) = std::max(c.x(), 0.0);
      out.eosin(y, x) = std::max(c.y(), 0.0);
    }
  }
  return out;
}

OdTileSet decompose_tile(const RgbTile& tile, const StainMatrix& stains, const WhitePoint& white) {
  OdTileSet set;
  set.width = tile.width;
  set.height = tile.height;
  set.od_rgb = rgb_to_od(tile, white);
  Concentrations c = deconvolve(set.od_rgb, stains);
  set.hema = std::move(c.hema);
  set.eosin = std::move(c.eosin);
  set.residual_norm = std::move(c.residual_norm);
  return set;
}

OdPlanes compose_od(const Plane& hema, const Plane& eosin, const StainMatrix& stains) {
  OdPlanes od;
  for (int c = 0; c < 3; ++c) od[c] = hema * stains.hema(c) + eosin * stains.eosin(c);
  return od;
}

}  // namespace ovpath

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace ovpath {

/// Single-channel raster indexed (row, col) == (y, x).
template <typename Scalar>
using PlaneT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Plane = PlaneT<double>;
using LabelPlane = PlaneT<std::int32_t>;

struct RgbTile {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples
  double pixel_size = 0.25;          // µm / pixel

  RgbTile() = default;
  RgbTile(int w, int h, double px = 0.25)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 255), pixel_size(px) {}

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const RgbTile&) const = default;
};

struct Pixel {
  int x = 0;
  int y = 0;
  auto operator<=>(const Pixel& o) const {
    if (auto c = y <=> o.y; c != 0) return c;
    return x <=> o.x;
  }
  bool operator==(const Pixel&) const = default;
};

/// A set of pixel coordinates kept sorted in raster order.
using PixelSet = std::vector<Pixel>;

void normalize(PixelSet& set);
PixelSet set_union(const PixelSet& a, const PixelSet& b);
PixelSet set_difference(const PixelSet& a, const PixelSet& b);
bool intersects(const PixelSet& a, const PixelSet& b);

/// Pixels of `labels` equal to each id 1..max_id, in raster order.
std::vector<PixelSet> pixel_sets_from_labels(const LabelPlane& labels, int max_id);
LabelPlane labels_from_pixel_sets(const std::vector<PixelSet>& sets, int width, int height);

}  // namespace ovpath

#include "ovpath/image.hpp"

#include <algorithm>
#include <iterator>

namespace ovpath {

void normalize(PixelSet& set) {
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
}

PixelSet set_union(const PixelSet& a, const PixelSet& b) {
  PixelSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

PixelSet set_difference(const PixelSet& a, const PixelSet& b) {
  PixelSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool intersects(const PixelSet& a, const PixelSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      return true;
    }
  }
  return false;
}

std::vector<PixelSet> pixel_sets_from_labels(const LabelPlane& labels, int max_id) {
  std::vector<PixelSet> sets(static_cast<std::size_t>(std::max(max_id, 0)));
  for (int y = 0; y < labels.rows(); ++y) {
    for (int x = 0; x < labels.cols(); ++x) {
      const int id = labels(y, x);
      if (id > 0 && id <= max_id) sets[id - 1].push_back({x, y});
    }
  }
  return sets;
}

LabelPlane labels_from_pixel_sets(const std::vector<PixelSet>& sets, int width, int height) {
  LabelPlane labels = LabelPlane::Zero(height, width);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (const Pixel& p : sets[i]) labels(p.y, p.x) = static_cast<std::int32_t>(i + 1);
  }
  return labels;
}

}  // namespace ovpath

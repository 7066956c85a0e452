#include "ovpath/segment.hpp"

#include "ovpath/error.hpp"
#include "ovpath/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <tuple>

namespace ovpath {

void SegmentationParams::validate() const {
  const double values[] = {pixel_size,       gaussian_sigma,   background_radius,
                           od_threshold,     min_nucleus_area, max_nucleus_area,
                           cell_expansion,   seed_merge_distance_px};
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::ConfigError, "segmentation parameters must be strictly positive");
    }
  }
  if (!(min_nucleus_area < max_nucleus_area)) {
    throw Error(ErrorKind::ConfigError, "min_nucleus_area must be below max_nucleus_area");
  }
}

Plane preprocess(const Plane& hema, const SegmentationParams& params) {
  Plane blurred = gaussian_blur(hema, params.sigma_px());
  const Plane background = open_disk(blurred, params.background_radius_px());
  return (blurred - background).max(0.0);
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

constexpr int kDx8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
constexpr int kDy8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDx4[4] = {0, -1, 1, 0};
constexpr int kDy4[4] = {-1, 0, 0, 1};

}  // namespace

std::vector<PixelSet> segment_nuclei(const Plane& smoothed, const SegmentationParams& params) {
  const int rows = static_cast<int>(smoothed.rows());
  const int cols = static_cast<int>(smoothed.cols());
  if (rows == 0 || cols == 0) return {};

  // Pad by one background pixel so blobs touching the border measure their
  // distance to the tile edge.
  PlaneT<bool> background = PlaneT<bool>::Constant(rows + 2, cols + 2, true);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) background(y + 1, x + 1) = !(smoothed(y, x) > params.od_threshold);
  const Plane padded = squared_distance_to(background);
  const Plane dist2 = padded.block(1, 1, rows, cols);
  auto fg = [&](int x, int y) { return dist2(y, x) > 0.0; };

  // Regional maxima: 8-connected plateaus with no strictly higher neighbour.
  std::vector<int> plateau(static_cast<std::size_t>(rows) * cols, -1);
  std::vector<std::vector<Pixel>> maxima;
  std::vector<Pixel> stack;
  std::vector<Pixel> members;
  int plateau_count = 0;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      if (!fg(x, y) || plateau[y * cols + x] >= 0) continue;
      const double level = dist2(y, x);
      const int tag = plateau_count++;
      bool is_max = true;
      members.clear();
      stack.assign(1, {x, y});
      plateau[y * cols + x] = tag;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        members.push_back(p);
        for (int k = 0; k < 8; ++k) {
          const int nx = p.x + kDx8[k];
          const int ny = p.y + kDy8[k];
          if (nx < 0 || ny < 0 || nx >= cols || ny >= rows) continue;
          const double v = dist2(ny, nx);
          if (v > level) {
            is_max = false;
          } else if (v == level && plateau[ny * cols + nx] < 0) {
            plateau[ny * cols + nx] = tag;
            stack.push_back({nx, ny});
          }
        }
      }
      if (is_max) {
        std::sort(members.begin(), members.end());
        maxima.push_back(members);
      }
    }
  }

  // Merge maxima whose centroids are closer than the merge distance.
  const int nmax = static_cast<int>(maxima.size());
  std::vector<double> mx(nmax), my(nmax);
  for (int i = 0; i < nmax; ++i) {
    double sx = 0, sy = 0;
    for (const Pixel& p : maxima[i]) {
      sx += p.x;
      sy += p.y;
    }
    mx[i] = sx / maxima[i].size();
    my[i] = sy / maxima[i].size();
  }
  UnionFind uf(nmax);
  const double merge2 = params.seed_merge_distance_px * params.seed_merge_distance_px;
  std::vector<int> order(nmax);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return my[a] < my[b]; });
  for (int a = 0; a < nmax; ++a) {
    for (int b = a + 1; b < nmax; ++b) {
      const int i = order[a];
      const int j = order[b];
      const double dy = my[j] - my[i];
      if (dy * dy >= merge2) break;
      const double dx = mx[j] - mx[i];
      if (dx * dx + dy * dy < merge2) uf.unite(i, j);
    }
  }

  // Marker-controlled flooding from the seeds, highest distance first, FIFO
  // among equal distances. Squared distances are integers, so a bucket queue
  // reproduces the (-dist2, insertion order) priority exactly.
  std::vector<std::int32_t> label(static_cast<std::size_t>(rows) * cols, 0);
  const int top = static_cast<int>(dist2.maxCoeff());
  struct Entry {
    int index;
    int label;
  };
  std::vector<std::vector<Entry>> buckets(static_cast<std::size_t>(top) + 1);
  std::vector<std::size_t> heads(buckets.size(), 0);
  int level = -1;
  auto push = [&](int index, int lab) {
    const int l = static_cast<int>(dist2.data()[index]);
    buckets[l].push_back({index, lab});
    level = std::max(level, l);
  };
  for (int i = 0; i < nmax; ++i) {
    const int root = uf.find(i) + 1;
    for (const Pixel& p : maxima[i]) push(p.y * cols + p.x, root);
  }
  while (level >= 0) {
    if (heads[level] == buckets[level].size()) {
      buckets[level].clear();
      heads[level] = 0;
      --level;
      continue;
    }
    const Entry e = buckets[level][heads[level]++];
    if (label[e.index] != 0) continue;
    label[e.index] = e.label;
    const int x = e.index % cols;
    const int y = e.index / cols;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx4[k];
      const int ny = y + kDy4[k];
      if (nx < 0 || ny < 0 || nx >= cols || ny >= rows) continue;
      const int ni = ny * cols + nx;
      if (label[ni] == 0 && fg(nx, ny)) push(ni, e.label);
    }
  }

  std::vector<PixelSet> regions(nmax + 1);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x)
      if (const int l = label[y * cols + x]; l > 0) regions[l].push_back({x, y});

  const double min_area = params.min_area_px();
  const double max_area = params.max_area_px();
  std::vector<PixelSet> out;
  for (auto& r : regions) {
    const double area = static_cast<double>(r.size());
    if (!r.empty() && area >= min_area - 1e-9 && area <= max_area + 1e-9) out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const PixelSet& a, const PixelSet& b) { return a.front() < b.front(); });
  return out;
}

std::pair<double, double> centroid_um(const PixelSet& mask, double pixel_size) {
  if (mask.empty()) throw Error(ErrorKind::EmptyMask, "centroid of empty mask");
  double sx = 0.0, sy = 0.0;
  for (const Pixel& p : mask) {
    sx += p.x + 0.5;
    sy += p.y + 0.5;
  }
  const double n = static_cast<double>(mask.size());
  return {sx / n * pixel_size, sy / n * pixel_size};
}

std::vector<CellObject> expand_cells(const std::vector<PixelSet>& nuclei,
                                     const SegmentationParams& params, int width, int height,
                                     const std::string& tile_id) {
  const double reach = params.expansion_px();
  const double reach2 = reach * reach + 1e-9;
  const int margin = static_cast<int>(std::ceil(reach));

  constexpr double kUnset = std::numeric_limits<double>::infinity();
  Plane best = Plane::Constant(height, width, kUnset);
  LabelPlane owner = LabelPlane::Zero(height, width);

  for (std::size_t i = 0; i < nuclei.size(); ++i) {
    const PixelSet& nucleus = nuclei[i];
    if (nucleus.empty()) continue;
    int x0 = width, x1 = -1, y0 = height, y1 = -1;
    for (const Pixel& p : nucleus) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    x0 = std::max(0, x0 - margin);
    y0 = std::max(0, y0 - margin);
    x1 = std::min(width - 1, x1 + margin);
    y1 = std::min(height - 1, y1 + margin);
    PlaneT<bool> source = PlaneT<bool>::Constant(y1 - y0 + 1, x1 - x0 + 1, false);
    for (const Pixel& p : nucleus) source(p.y - y0, p.x - x0) = true;
    const Plane d2 = squared_distance_to(source);
    const auto id = static_cast<std::int32_t>(i + 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = d2(y - y0, x - x0);
        // strict comparison keeps the earlier (lower) id on ties
        if (d <= reach2 && d < best(y, x)) {
          best(y, x) = d;
          owner(y, x) = id;
        }
      }
    }
  }

  std::vector<CellObject> cells(nuclei.size());
  std::vector<PixelSet> cell_masks = pixel_sets_from_labels(owner, static_cast<int>(nuclei.size()));
  for (std::size_t i = 0; i < nuclei.size(); ++i) {
    CellObject& c = cells[i];
    c.id = static_cast<int>(i + 1);
    c.tile_id = tile_id;
    c.nucleus_mask = nuclei[i];
    normalize(c.nucleus_mask);
    c.cell_mask = std::move(cell_masks[i]);
    c.cytoplasm_mask = set_difference(c.cell_mask, c.nucleus_mask);
    std::tie(c.centroid_x, c.centroid_y) = centroid_um(c.nucleus_mask, params.pixel_size);
  }
  return cells;
}

std::vector<CellObject> segment_cells(const Plane& hema, const SegmentationParams& params,
                                      const std::string& tile_id) {
  const Plane smoothed = preprocess(hema, params);
  const auto nuclei = segment_nuclei(smoothed, params);
  return expand_cells(nuclei, params, static_cast<int>(hema.cols()), static_cast<int>(hema.rows()),
                      tile_id);
}

std::vector<CellObject> cells_from_labels(const LabelPlane& nuclei, const LabelPlane& cells,
                                          double pixel_size, const std::string& tile_id) {
  if (nuclei.rows() != cells.rows() || nuclei.cols() != cells.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "nucleus and cell label planes differ in size");
  }
  const int max_id = std::max(nuclei.maxCoeff(), cells.maxCoeff());
  auto nucleus_sets = pixel_sets_from_labels(nuclei, max_id);
  auto cell_sets = pixel_sets_from_labels(cells, max_id);
  std::vector<CellObject> out;
  for (int i = 0; i < max_id; ++i) {
    if (nucleus_sets[i].empty()) continue;
    CellObject c;
    c.id = i + 1;
    c.tile_id = tile_id;
    c.nucleus_mask = std::move(nucleus_sets[i]);
    c.cell_mask = set_union(cell_sets[i], c.nucleus_mask);
    c.cytoplasm_mask = set_difference(c.cell_mask, c.nucleus_mask);
    std::tie(c.centroid_x, c.centroid_y) = centroid_um(c.nucleus_mask, pixel_size);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace ovpath

#include "ovpath/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace ovpath {

double signed_area(const Polygon& ring) {
  double a = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = ring[i];
    const Point2& q = ring[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

bool contains(const Polygon& ring, const Point2& p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = ring[i];
    const Point2& b = ring[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double xcross = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < xcross) inside = !inside;
    }
  }
  return inside;
}

Polygon convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Point2& o, const Point2& a, const Point2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

Calipers rotating_calipers(const Polygon& hull) {
  Calipers c;
  const std::size_t n = hull.size();
  if (n == 0) return c;
  if (n == 1) return c;
  if (n == 2) {
    c.max_diameter = (hull[1] - hull[0]).norm();
    return c;
  }
  // Max diameter over antipodal pairs; min width over edge directions. n is
  // small (hull of a nucleus), so the quadratic sweep stays cheap and exact.
  double max_d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) max_d2 = std::max(max_d2, (hull[i] - hull[j]).squaredNorm());
  double min_w = std::numeric_limits<double>::infinity();
  std::size_t far = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % n];
    const Point2 e = b - a;
    const double len = e.norm();
    if (len == 0.0) continue;
    auto height = [&](std::size_t k) {
      const Point2 d = hull[k % n] - a;
      return std::abs(e.x() * d.y() - e.y() * d.x()) / len;
    };
    while (height(far + 1) >= height(far) && (far + 1) % n != i) far = (far + 1) % n;
    min_w = std::min(min_w, height(far));
  }
  c.max_diameter = std::sqrt(max_d2);
  c.min_width = std::isfinite(min_w) ? min_w : 0.0;
  return c;
}

namespace {

struct Box {
  int x0, y0, x1, y1;
};

Box bounds(const PixelSet& mask) {
  Box b{mask.front().x, mask.front().y, mask.front().x, mask.front().y};
  for (const Pixel& p : mask) {
    b.x0 = std::min(b.x0, p.x);
    b.x1 = std::max(b.x1, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

// Local raster with a one-pixel empty border.
struct Local {
  Box box;
  int w, h;
  std::vector<unsigned char> v;
  unsigned char at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Local rasterize(const PixelSet& mask) {
  Local l;
  l.box = bounds(mask);
  l.w = l.box.x1 - l.box.x0 + 3;
  l.h = l.box.y1 - l.box.y0 + 3;
  l.v.assign(static_cast<std::size_t>(l.w) * l.h, 0);
  for (const Pixel& p : mask) l.v[static_cast<std::size_t>(p.y - l.box.y0 + 1) * l.w + (p.x - l.box.x0 + 1)] = 1;
  return l;
}

}  // namespace

PixelSet fill_holes(const PixelSet& mask) {
  if (mask.empty()) return mask;
  Local l = rasterize(mask);
  std::vector<unsigned char> outside(l.v.size(), 0);
  std::vector<int> stack{0};
  outside[0] = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int x = i % l.w, y = i / l.w;
    const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
    for (const auto& n : nb) {
      if (n[0] < 0 || n[1] < 0 || n[0] >= l.w || n[1] >= l.h) continue;
      const int j = n[1] * l.w + n[0];
      if (!outside[j] && !l.v[j]) {
        outside[j] = 1;
        stack.push_back(j);
      }
    }
  }
  PixelSet out;
  for (int y = 1; y < l.h - 1; ++y)
    for (int x = 1; x < l.w - 1; ++x)
      if (!outside[y * l.w + x]) out.push_back({x - 1 + l.box.x0, y - 1 + l.box.y0});
  return out;
}

double contour_length(const PixelSet& mask) {
  if (mask.empty()) return 0.0;
  const PixelSet filled = fill_holes(mask);
  const Local l = rasterize(filled);
  constexpr double kDiag = 0.70710678118654752440;
  double length = 0.0;
  for (int y = 0; y + 1 < l.h; ++y) {
    for (int x = 0; x + 1 < l.w; ++x) {
      const int a = l.at(x, y), b = l.at(x + 1, y), c = l.at(x + 1, y + 1), d = l.at(x, y + 1);
      const int n = a + b + c + d;
      if (n == 1 || n == 3) {
        length += kDiag;
      } else if (n == 2) {
        length += (a == c) ? 2.0 * kDiag : 1.0;  // saddle: two cuts around the background corners
      }
    }
  }
  return length;
}

namespace {

using Corner = std::pair<int, int>;

// Unit-step corner ring of the outer boundary in local raster coordinates.
std::vector<Corner> corner_ring(const PixelSet& filled, const Local& l) {
  // Directed boundary edges between pixel corners with the foreground on the
  // left when walking in an x-right/y-up frame (i.e. on the right in image
  // coordinates where y grows downward). Corner (cx, cy) is the top-left
  // corner of local pixel (cx, cy).
  std::multimap<Corner, Corner> next;
  for (int y = 1; y < l.h - 1; ++y) {
    for (int x = 1; x < l.w - 1; ++x) {
      if (!l.at(x, y)) continue;
      if (!l.at(x, y - 1)) next.emplace(Corner{x + 1, y}, Corner{x, y});          // top edge, leftward
      if (!l.at(x - 1, y)) next.emplace(Corner{x, y}, Corner{x, y + 1});          // left edge, downward
      if (!l.at(x, y + 1)) next.emplace(Corner{x, y + 1}, Corner{x + 1, y + 1});  // bottom edge, rightward
      if (!l.at(x + 1, y)) next.emplace(Corner{x + 1, y + 1}, Corner{x + 1, y});  // right edge, upward
    }
  }
  // Start at the topmost-leftmost corner of the first pixel's top edge.
  const Pixel first = filled.front();
  const Corner start{first.x - l.box.x0 + 2, first.y - l.box.y0 + 1};
  std::vector<Corner> ring;
  Corner cur = start;
  Corner prev_dir{0, 0};
  do {
    ring.push_back(cur);
    auto range = next.equal_range(cur);
    auto chosen = range.first;
    if (std::distance(range.first, range.second) > 1) {
      // Diagonal touch: keep 8-connected foreground together by turning
      // toward the foreground side (right turn in image coordinates).
      for (auto it = range.first; it != range.second; ++it) {
        const Corner dir{it->second.first - cur.first, it->second.second - cur.second};
        const int cross = prev_dir.first * dir.second - prev_dir.second * dir.first;
        if (cross > 0) chosen = it;
      }
    }
    const Corner to = chosen->second;
    prev_dir = {to.first - cur.first, to.second - cur.second};
    next.erase(chosen);
    cur = to;
  } while (cur != start && ring.size() <= 4 * filled.size() + 4);
  return ring;
}

}  // namespace

double smoothed_contour_length(const PixelSet& mask) {
  if (mask.empty()) return 0.0;
  const PixelSet filled = fill_holes(mask);
  const std::vector<Corner> ring = corner_ring(filled, rasterize(filled));
  const std::size_t n = ring.size();
  std::vector<Point2> mid(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Corner& a = ring[i];
    const Corner& b = ring[(i + 1) % n];
    mid[i] = Point2(0.5 * (a.first + b.first), 0.5 * (a.second + b.second));
  }
  std::vector<Point2> sm(n);
  for (std::size_t i = 0; i < n; ++i) sm[i] = 0.25 * (mid[(i + n - 1) % n] + mid[(i + 1) % n]) + 0.5 * mid[i];
  double length = 0.0;
  for (std::size_t i = 0; i < n; ++i) length += (sm[(i + 1) % n] - sm[i]).norm();
  return length;
}

Polygon trace_outline(const PixelSet& mask) {
  if (mask.empty()) return {};
  const PixelSet filled = fill_holes(mask);
  const Local l = rasterize(filled);
  const std::vector<Corner> ring = corner_ring(filled, l);

  // Drop collinear vertices, convert to image coordinates.
  Polygon out;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Corner& a = ring[(i + n - 1) % n];
    const Corner& b = ring[i];
    const Corner& c = ring[(i + 1) % n];
    const int cross = (b.first - a.first) * (c.second - b.second) - (b.second - a.second) * (c.first - b.first);
    if (cross != 0) out.emplace_back(b.first - 1 + l.box.x0, b.second - 1 + l.box.y0);
  }
  if (signed_area(out) < 0) std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace ovpath

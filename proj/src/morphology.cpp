#include "ovpath/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace ovpath {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

// Sliding extremum over the centred window [x - w, x + w] (van Herk /
// Gil-Werman); positions outside the row are ignored.
template <typename Cmp>
void sliding_extremum(const double* row, int n, int w, double* out, double fill, Cmp better,
                      std::vector<double>& pad, std::vector<double>& g, std::vector<double>& h) {
  const int k = 2 * w + 1;
  const int len = n + 2 * w;
  const int blocks = (len + k - 1) / k;
  const int total = blocks * k;
  pad.assign(total, fill);
  std::copy(row, row + n, pad.begin() + w);
  g.resize(total);
  h.resize(total);
  for (int b = 0; b < blocks; ++b) {
    const int s = b * k;
    g[s] = pad[s];
    for (int i = 1; i < k; ++i) g[s + i] = better(pad[s + i], g[s + i - 1]) ? pad[s + i] : g[s + i - 1];
    h[s + k - 1] = pad[s + k - 1];
    for (int i = k - 2; i >= 0; --i) h[s + i] = better(pad[s + i], h[s + i + 1]) ? pad[s + i] : h[s + i + 1];
  }
  for (int x = 0; x < n; ++x) {
    // window in padded coordinates is [x, x + k - 1]
    const double a = h[x];
    const double b = g[x + k - 1];
    out[x] = better(a, b) ? a : b;
  }
}

template <typename Cmp>
Plane disk_filter(const Plane& in, double radius_px, double fill, Cmp better) {
  const int rows = static_cast<int>(in.rows());
  const int cols = static_cast<int>(in.cols());
  const int r = static_cast<int>(std::floor(radius_px));
  const double r2 = radius_px * radius_px;

  // Half-widths per vertical offset, grouped so each distinct width costs one
  // pass over the plane.
  std::map<int, std::vector<int>> offsets_by_width;
  for (int dy = -r; dy <= r; ++dy) {
    const int w = static_cast<int>(std::floor(std::sqrt(std::max(0.0, r2 - double(dy) * dy)) + 1e-9));
    offsets_by_width[w].push_back(dy);
  }

  Plane out = Plane::Constant(rows, cols, fill);
  Plane swept(rows, cols);
  std::vector<double> pad, g, h;
  for (const auto& [w, dys] : offsets_by_width) {
    for (int y = 0; y < rows; ++y) {
      sliding_extremum(&in(y, 0), cols, w, &swept(y, 0), fill, better, pad, g, h);
    }
    for (int dy : dys) {
      const int y0 = std::max(0, -dy);
      const int y1 = std::min(rows, rows - dy);
      for (int y = y0; y < y1; ++y) {
        double* o = &out(y, 0);
        const double* s = &swept(y + dy, 0);
        for (int x = 0; x < cols; ++x) o[x] = better(s[x], o[x]) ? s[x] : o[x];
      }
    }
  }
  return out;
}

}  // namespace

Plane gaussian_blur(const Plane& in, double sigma_px) {
  if (sigma_px <= 0.0) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_px));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma_px * sigma_px));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int rows = static_cast<int>(in.rows());
  const int cols = static_cast<int>(in.cols());
  Plane tmp(rows, cols);
  std::vector<double> line;
  for (int y = 0; y < rows; ++y) {
    line.resize(cols + 2 * radius);
    for (int i = 0; i < cols + 2 * radius; ++i) line[i] = in(y, mirror(i - radius, cols));
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int k = 0; k <= 2 * radius; ++k) acc += kernel[k] * line[x + k];
      tmp(y, x) = acc;
    }
  }
  Plane out(rows, cols);
  std::vector<const double*> src(2 * radius + 1);
  for (int y = 0; y < rows; ++y) {
    for (int k = 0; k <= 2 * radius; ++k) src[k] = &tmp(mirror(y + k - radius, rows), 0);
    double* o = &out(y, 0);
    std::fill(o, o + cols, 0.0);
    for (int k = 0; k <= 2 * radius; ++k) {
      const double kk = kernel[k];
      const double* s = src[k];
      for (int x = 0; x < cols; ++x) o[x] += kk * s[x];
    }
  }
  return out;
}

Plane erode_disk(const Plane& in, double radius_px) {
  return disk_filter(in, radius_px, kInf, [](double a, double b) { return a < b; });
}

Plane dilate_disk(const Plane& in, double radius_px) {
  return disk_filter(in, radius_px, -kInf, [](double a, double b) { return a > b; });
}

Plane open_disk(const Plane& in, double radius_px) {
  return dilate_disk(erode_disk(in, radius_px), radius_px);
}

void distance_transform_1d(const double* f, double* d, int n, int* v, double* z) {
  // Felzenszwalb & Huttenlocher lower envelope of parabolas.
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

Plane squared_distance_to(const PlaneT<bool>& source) {
  const int rows = static_cast<int>(source.rows());
  const int cols = static_cast<int>(source.cols());
  Plane out(rows, cols);
  const int n = std::max(rows, cols);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int x = 0; x < cols; ++x) {
    for (int y = 0; y < rows; ++y) f[y] = source(y, x) ? 0.0 : kInf;
    distance_transform_1d(f.data(), d.data(), rows, v.data(), z.data());
    for (int y = 0; y < rows; ++y) out(y, x) = d[y];
  }
  for (int y = 0; y < rows; ++y) {
    std::copy(&out(y, 0), &out(y, 0) + cols, f.begin());
    distance_transform_1d(f.data(), d.data(), cols, v.data(), z.data());
    std::copy(d.begin(), d.begin() + cols, &out(y, 0));
  }
  return out;
}

}  // namespace ovpath

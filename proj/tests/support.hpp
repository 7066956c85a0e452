#pragma once

#include "ovpath/image.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace ovpath::test {

inline PixelSet disk(double cx, double cy, double r, int width = 1 << 20, int height = 1 << 20) {
  PixelSet out;
  const int r0 = static_cast<int>(std::ceil(r)) + 1;
  for (int y = static_cast<int>(cy) - r0; y <= static_cast<int>(cy) + r0; ++y) {
    for (int x = static_cast<int>(cx) - r0; x <= static_cast<int>(cx) + r0; ++x) {
      if (x < 0 || y < 0 || x >= width || y >= height) continue;
      const double dx = x - cx;
      const double dy = y - cy;
      if (dx * dx + dy * dy <= r * r) out.push_back({x, y});
    }
  }
  normalize(out);
  return out;
}

inline PixelSet rect(int x0, int y0, int w, int h) {
  PixelSet out;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) out.push_back({x, y});
  return out;
}

inline void paint(Plane& plane, const PixelSet& set, double value) {
  for (const Pixel& p : set) plane(p.y, p.x) = value;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ovpath_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& rel = {}) const { return rel.empty() ? path_.string() : (path_ / rel).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace ovpath::test

#pragma once

#include "ovpath/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ovpath {

/// 8-bit RGB PNG or baseline uncompressed TIFF (chosen by extension/magic).
/// Grayscale and alpha inputs are expanded/dropped to RGB.
RgbTile read_rgb(const std::string& path, double pixel_size = 0.25);
void write_png(const std::string& path, const RgbTile& tile);

/// 16-bit grayscale PNG, e.g. label images (0 = background).
void write_png16(const std::string& path, const PlaneT<std::uint16_t>& plane);
PlaneT<std::uint16_t> read_png16(const std::string& path);

void write_label_png(const std::string& path, const LabelPlane& labels);
LabelPlane read_label_png(const std::string& path);

/// OD planes stored as 16-bit PNG with a fixed 1e-4 quantum (max 6.5535).
inline constexpr double kOdQuantum = 1e-4;
void write_od_png(const std::string& path, const Plane& od);
Plane read_od_png(const std::string& path);

/// In-memory encoders; the bytes equal what the file writers produce.
std::vector<std::uint8_t> encode_png(const RgbTile& tile);
std::vector<std::uint8_t> encode_png16(const PlaneT<std::uint16_t>& plane);
PlaneT<std::uint16_t> label_plane_u16(const LabelPlane& labels);  // throws IoError above 65535
PlaneT<std::uint16_t> quantize_od(const Plane& od);

RgbTile read_tiff(const std::string& path, double pixel_size = 0.25);
void write_tiff(const std::string& path, const RgbTile& tile);  // uncompressed, one strip

}  // namespace ovpath

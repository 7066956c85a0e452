#include "ovpath/image_io.hpp"

#include "ovpath/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace ovpath {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path);
  return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw Error(ErrorKind::IoError, msg); }
void png_warn(png_structp, png_const_charp) {}

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw Error(ErrorKind::IoError, "png_create_write_struct failed");
    info = png_create_info_struct(png);
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw Error(ErrorKind::IoError, "png_create_read_struct failed");
    info = png_create_info_struct(png);
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

void write_rows(png_structp png, png_infop info, int width, int height, int bit_depth, int color_type,
                const std::uint8_t* data, std::size_t stride) {
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 1);
  png_set_filter(png, 0, PNG_FILTER_SUB);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // host little-endian -> PNG big-endian
  for (int y = 0; y < height; ++y) png_write_row(png, const_cast<std::uint8_t*>(data + stride * y));
  png_write_end(png, nullptr);
}

void vector_write(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}
void vector_flush(png_structp) {}

bool little_endian_host() {
  const std::uint16_t v = 1;
  std::uint8_t b;
  std::memcpy(&b, &v, 1);
  return b == 1;
}

RgbTile read_png_rgb(const std::string& path, double pixel_size) {
  FilePtr f = open_file(path, "rb");
  PngReader r;
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);
  const int width = static_cast<int>(png_get_image_width(r.png, r.info));
  const int height = static_cast<int>(png_get_image_height(r.png, r.info));
  const int color = png_get_color_type(r.png, r.info);
  if (png_get_bit_depth(r.png, r.info) == 16) png_set_strip_16(r.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (png_get_bit_depth(r.png, r.info) < 8) png_set_packing(r.png);
  png_read_update_info(r.png, r.info);
  if (png_get_channels(r.png, r.info) != 3) throw Error(ErrorKind::IoError, path + ": unsupported PNG layout");
  RgbTile tile(width, height, pixel_size);
  for (int y = 0; y < height; ++y) png_read_row(r.png, tile.pixels.data() + static_cast<std::size_t>(y) * width * 3, nullptr);
  png_read_end(r.png, nullptr);
  return tile;
}

bool has_png_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

}  // namespace

RgbTile read_rgb(const std::string& path, double pixel_size) {
  if (has_png_magic(path)) return read_png_rgb(path, pixel_size);
  return read_tiff(path, pixel_size);
}

void write_png(const std::string& path, const RgbTile& tile) {
  FilePtr f = open_file(path, "wb");
  PngWriter w;
  png_init_io(w.png, f.get());
  write_rows(w.png, w.info, tile.width, tile.height, 8, PNG_COLOR_TYPE_RGB, tile.pixels.data(),
             static_cast<std::size_t>(tile.width) * 3);
}

std::vector<std::uint8_t> encode_png(const RgbTile& tile) {
  std::vector<std::uint8_t> out;
  PngWriter w;
  png_set_write_fn(w.png, &out, vector_write, vector_flush);
  write_rows(w.png, w.info, tile.width, tile.height, 8, PNG_COLOR_TYPE_RGB, tile.pixels.data(),
             static_cast<std::size_t>(tile.width) * 3);
  return out;
}

std::vector<std::uint8_t> encode_png16(const PlaneT<std::uint16_t>& plane) {
  if (!little_endian_host()) throw Error(ErrorKind::IoError, "big-endian hosts are not supported");
  std::vector<std::uint8_t> out;
  PngWriter w;
  png_set_write_fn(w.png, &out, vector_write, vector_flush);
  write_rows(w.png, w.info, static_cast<int>(plane.cols()), static_cast<int>(plane.rows()), 16, PNG_COLOR_TYPE_GRAY,
             reinterpret_cast<const std::uint8_t*>(plane.data()), static_cast<std::size_t>(plane.cols()) * 2);
  return out;
}

void write_png16(const std::string& path, const PlaneT<std::uint16_t>& plane) {
  const auto bytes = encode_png16(plane);
  FilePtr f = open_file(path, "wb");
  if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size()) throw Error(ErrorKind::IoError, "cannot write " + path);
}

PlaneT<std::uint16_t> read_png16(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  PngReader r;
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);
  const int width = static_cast<int>(png_get_image_width(r.png, r.info));
  const int height = static_cast<int>(png_get_image_height(r.png, r.info));
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(r.png, r.info) != 16) {
    throw Error(ErrorKind::IoError, path + ": expected a 16-bit grayscale PNG");
  }
  png_set_swap(r.png);
  png_read_update_info(r.png, r.info);
  PlaneT<std::uint16_t> plane(height, width);
  for (int y = 0; y < height; ++y) png_read_row(r.png, reinterpret_cast<png_bytep>(&plane(y, 0)), nullptr);
  png_read_end(r.png, nullptr);
  return plane;
}

PlaneT<std::uint16_t> label_plane_u16(const LabelPlane& labels) {
  if (labels.size() > 0 && (labels.maxCoeff() > 65535 || labels.minCoeff() < 0)) {
    throw Error(ErrorKind::IoError, "label ids exceed 16 bits");
  }
  return labels.cast<std::uint16_t>();
}

void write_label_png(const std::string& path, const LabelPlane& labels) { write_png16(path, label_plane_u16(labels)); }

LabelPlane read_label_png(const std::string& path) { return read_png16(path).cast<std::int32_t>(); }

PlaneT<std::uint16_t> quantize_od(const Plane& od) {
  PlaneT<std::uint16_t> q(od.rows(), od.cols());
  for (Eigen::Index i = 0; i < od.size(); ++i) {
    q.data()[i] = static_cast<std::uint16_t>(std::clamp(std::lround(od.data()[i] / kOdQuantum), 0L, 65535L));
  }
  return q;
}

void write_od_png(const std::string& path, const Plane& od) { write_png16(path, quantize_od(od)); }

Plane read_od_png(const std::string& path) { return read_png16(path).cast<double>() * kOdQuantum; }

// Baseline TIFF: little- or big-endian, uncompressed, 8-bit, chunky RGB or
// grayscale, any strip layout.
RgbTile read_tiff(const std::string& path, double pixel_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 8) throw Error(ErrorKind::IoError, path + ": not an image");
  bool le;
  if (buf[0] == 'I' && buf[1] == 'I') {
    le = true;
  } else if (buf[0] == 'M' && buf[1] == 'M') {
    le = false;
  } else {
    throw Error(ErrorKind::IoError, path + ": neither PNG nor TIFF");
  }
  auto u16 = [&](std::size_t o) -> std::uint32_t {
    if (o + 2 > buf.size()) throw Error(ErrorKind::IoError, path + ": truncated TIFF");
    return le ? buf[o] | (buf[o + 1] << 8) : (buf[o] << 8) | buf[o + 1];
  };
  auto u32 = [&](std::size_t o) -> std::uint32_t {
    if (o + 4 > buf.size()) throw Error(ErrorKind::IoError, path + ": truncated TIFF");
    return le ? buf[o] | (buf[o + 1] << 8) | (buf[o + 2] << 16) | (static_cast<std::uint32_t>(buf[o + 3]) << 24)
              : (static_cast<std::uint32_t>(buf[o]) << 24) | (buf[o + 1] << 16) | (buf[o + 2] << 8) | buf[o + 3];
  };
  if (u16(2) != 42) throw Error(ErrorKind::IoError, path + ": bad TIFF magic");
  const std::size_t ifd = u32(4);
  const std::uint32_t entries = u16(ifd);
  std::uint32_t width = 0, height = 0, compression = 1, spp = 1, rows_per_strip = 0, planar = 1;
  std::vector<std::uint32_t> offsets, counts;
  std::vector<std::uint32_t> bits;
  for (std::uint32_t e = 0; e < entries; ++e) {
    const std::size_t at = ifd + 2 + 12 * e;
    const std::uint32_t tag = u16(at), type = u16(at + 2), count = u32(at + 4);
    const std::size_t size = type == 3 ? 2 : 4;
    const std::size_t data = count * size <= 4 ? at + 8 : u32(at + 8);
    auto values = [&] {
      std::vector<std::uint32_t> v(count);
      for (std::uint32_t i = 0; i < count; ++i) v[i] = type == 3 ? u16(data + 2 * i) : u32(data + 4 * i);
      return v;
    };
    switch (tag) {
      case 256: width = values()[0]; break;
      case 257: height = values()[0]; break;
      case 258: bits = values(); break;
      case 259: compression = values()[0]; break;
      case 273: offsets = values(); break;
      case 277: spp = values()[0]; break;
      case 278: rows_per_strip = values()[0]; break;
      case 279: counts = values(); break;
      case 284: planar = values()[0]; break;
      default: break;
    }
  }
  if (compression != 1 || planar != 1) throw Error(ErrorKind::IoError, path + ": only uncompressed chunky TIFF is supported");
  for (std::uint32_t b : bits)
    if (b != 8) throw Error(ErrorKind::IoError, path + ": only 8-bit TIFF is supported");
  if (width == 0 || height == 0 || offsets.empty()) throw Error(ErrorKind::IoError, path + ": incomplete TIFF");
  if (rows_per_strip == 0) rows_per_strip = height;
  RgbTile tile(static_cast<int>(width), static_cast<int>(height), pixel_size);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * spp;
  for (std::uint32_t y = 0; y < height; ++y) {
    const std::size_t strip = y / rows_per_strip;
    if (strip >= offsets.size()) throw Error(ErrorKind::IoError, path + ": missing strip");
    const std::size_t base = offsets[strip] + (y % rows_per_strip) * row_bytes;
    if (base + row_bytes > buf.size()) throw Error(ErrorKind::IoError, path + ": truncated strip");
    for (std::uint32_t x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const std::size_t ch = spp >= 3 ? static_cast<std::size_t>(c) : 0;
        tile.at(static_cast<int>(x), static_cast<int>(y), c) = buf[base + x * spp + ch];
      }
    }
  }
  return tile;
}

void write_tiff(const std::string& path, const RgbTile& tile) {
  std::vector<std::uint8_t> out;
  auto p16 = [&](std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
  };
  auto p32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
  };
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(tile.pixels.size());
  const int n_entries = 9;
  const std::uint32_t ifd_offset = 8;
  const std::uint32_t bits_offset = ifd_offset + 2 + 12 * n_entries + 4;
  const std::uint32_t data_offset = bits_offset + 6;
  out.insert(out.end(), {'I', 'I'});
  p16(42);
  p32(ifd_offset);
  p16(n_entries);
  auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t count, std::uint32_t value) {
    p16(tag);
    p16(type);
    p32(count);
    if (type == 3 && count == 1) {
      p16(value);
      p16(0);
    } else {
      p32(value);
    }
  };
  entry(256, 4, 1, static_cast<std::uint32_t>(tile.width));
  entry(257, 4, 1, static_cast<std::uint32_t>(tile.height));
  entry(258, 3, 3, bits_offset);
  entry(259, 3, 1, 1);
  entry(262, 3, 1, 2);
  entry(273, 4, 1, data_offset);
  entry(277, 3, 1, 3);
  entry(278, 4, 1, static_cast<std::uint32_t>(tile.height));
  entry(279, 4, 1, data_bytes);
  p32(0);
  p16(8);
  p16(8);
  p16(8);
  out.insert(out.end(), tile.pixels.begin(), tile.pixels.end());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace ovpath

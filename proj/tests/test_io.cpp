#include "ovpath/csv.hpp"
#include "ovpath/error.hpp"
#include "ovpath/hash.hpp"
#include "ovpath/image_io.hpp"
#include "ovpath/overlay.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace ovpath;

namespace {

RgbTile random_tile(int w, int h, std::uint64_t seed) {
  RgbTile t(w, h);
  std::mt19937_64 rng(seed);
  for (auto& v : t.pixels) v = static_cast<std::uint8_t>(rng() & 0xff);
  return t;
}

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex(std::string_view("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  test::TempDir dir("hash");
  csv::write_text(dir.str("abc.txt"), "abc");
  CHECK(sha256_file(dir.str("abc.txt")) == sha256_hex(std::string_view("abc")));
  CHECK_THROWS_AS(sha256_file(dir.str("nope")), Error);
}

TEST_CASE("rgb png and tiff round trip") {
  test::TempDir dir("img");
  const RgbTile t = random_tile(37, 23, 1);
  write_png(dir.str("a.png"), t);
  CHECK(read_rgb(dir.str("a.png")) == t);
  write_tiff(dir.str("a.tif"), t);
  CHECK(read_rgb(dir.str("a.tif")) == t);
  CHECK(read_tiff(dir.str("a.tif")) == t);
  CHECK(read_rgb(dir.str("a.png"), 0.5).pixel_size == 0.5);
  CHECK(encode_png(t) == encode_png(t));
  CHECK(sha256_file(dir.str("a.png")) == sha256_hex(encode_png(t)));
}

TEST_CASE("unreadable images raise IoError") {
  test::TempDir dir("bad");
  csv::write_text(dir.str("junk.png"), "not a png at all");
  for (const char* name : {"junk.png", "absent.png"}) {
    try {
      read_rgb(dir.str(name));
      FAIL("expected IoError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IoError);
    }
  }
}

TEST_CASE("16-bit and label planes") {
  test::TempDir dir("png16");
  PlaneT<std::uint16_t> p(5, 9);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<std::uint16_t>(i * 1499);
  write_png16(dir.str("p.png"), p);
  CHECK((read_png16(dir.str("p.png")) == p).all());

  LabelPlane labels = LabelPlane::Zero(4, 6);
  labels(1, 2) = 7;
  labels(3, 5) = 65535;
  write_label_png(dir.str("l.png"), labels);
  CHECK((read_label_png(dir.str("l.png")) == labels).all());
  labels(0, 0) = 65536;
  try {
    label_plane_u16(labels);
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IoError);
  }
}

TEST_CASE("od planes keep a 1e-4 quantum") {
  test::TempDir dir("od");
  Plane od(3, 4);
  od << 0.0, 0.00004, 0.00005, 0.12345, 1.0, 2.5, 6.5535, 7.0, -0.2, 0.33333, 3.14159, 0.0001;
  write_od_png(dir.str("od.png"), od);
  const Plane back = read_od_png(dir.str("od.png"));
  CHECK(back(0, 0) == 0.0);
  CHECK(back(0, 1) == 0.0);
  CHECK(back(1, 3) == doctest::Approx(6.5535).epsilon(1e-12));  // clamped
  CHECK(back(2, 0) == 0.0);
  for (Eigen::Index i = 0; i < od.size(); ++i) {
    const double v = std::clamp(od.data()[i], 0.0, 6.5535);
    CHECK(std::abs(back.data()[i] - v) <= kOdQuantum / 2 + 1e-12);
  }
}

TEST_CASE("csv parse and number formatting") {
  const auto rows = csv::parse("a,b,c\r\n1,,3\n\n4,5,6\n");
  REQUIRE(rows.size() >= 3);
  CHECK(rows[0] == std::vector<std::string>{"a", "b", "c"});
  CHECK(rows[1] == std::vector<std::string>{"1", "", "3"});
  CHECK(rows.back() == std::vector<std::string>{"4", "5", "6"});
  CHECK(csv::format_g6(0.1234567) == "0.123457");
  CHECK(csv::format_g6(-0.0) == "0");
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1e3);
  for (int i = 0; i < 200; ++i) {
    const double v = g(rng) / 7.0;
    CHECK(std::stod(csv::format_exact(v)) == v);
  }
  CHECK_THROWS_AS(csv::read("/nonexistent/file.csv"), Error);
}

TEST_CASE("overlays") {
  const RgbTile tile = random_tile(40, 30, 2);
  OverlayLegend legend;
  CHECK(emit_overlays(tile, {}, {}, &legend) == tile);
  CHECK(legend.total() == 0);

  CellObject a, b, c;
  a.nucleus_mask = test::disk(10, 10, 5, 40, 30);
  b.nucleus_mask = test::disk(28, 15, 4, 40, 30);
  c.nucleus_mask = test::rect(2, 24, 3, 3);
  const RgbTile out = emit_overlays(tile, {a, b, c}, {CellLabel::Tumor, CellLabel::Stroma, CellLabel::Unlabeled}, &legend);
  CHECK(out.width == tile.width);
  CHECK(out.height == tile.height);
  CHECK(legend.tumor == 1);
  CHECK(legend.stroma == 1);
  CHECK(legend.unlabeled == 1);
  // boundary stroked, interior and background untouched
  CHECK(out.at(15, 10, 0) == kTumorColor[0]);
  CHECK(out.at(15, 10, 1) == kTumorColor[1]);
  CHECK(out.at(10, 10, 0) == tile.at(10, 10, 0));
  CHECK(out.at(32, 15, 1) == kStromaColor[1]);
  CHECK(out.at(3, 25, 2) == tile.at(3, 25, 2));
  CHECK(out.at(2, 24, 0) == kUnlabeledColor[0]);
  CHECK(out.at(39, 0, 0) == tile.at(39, 0, 0));

  CHECK_THROWS_AS(emit_overlays(tile, {a}, {}), Error);
}

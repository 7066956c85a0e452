#include "ovpath/cell_features.hpp"
#include "ovpath/error.hpp"
#include "ovpath/geometry.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace ovpath;

namespace {

const char* const kCanonicalHeader =
    "label,Nucleus: Area,Nucleus: Perimeter,Nucleus: Circularity,Nucleus: Max caliper,Nucleus: Min caliper,"
    "Nucleus: Eccentricity,Nucleus: Hematoxylin OD mean,Nucleus: Hematoxylin OD sum,Nucleus: Hematoxylin OD std dev,"
    "Nucleus: Hematoxylin OD max,Nucleus: Hematoxylin OD min,Nucleus: Hematoxylin OD range,Nucleus: Eosin OD mean,"
    "Nucleus: Eosin OD sum,Nucleus: Eosin OD std dev,Nucleus: Eosin OD max,Nucleus: Eosin OD min,"
    "Nucleus: Eosin OD range,Cell: Area,Cell: Perimeter,Cell: Circularity,Cell: Max caliper,Cell: Min caliper,"
    "Cell: Eccentricity,Cell: Hematoxylin OD mean,Cell: Hematoxylin OD std dev,Cell: Hematoxylin OD max,"
    "Cell: Hematoxylin OD min,Cell: Eosin OD mean,Cell: Eosin OD std dev,Cell: Eosin OD max,Cell: Eosin OD min,"
    "Cytoplasm: Hematoxylin OD mean,Cytoplasm: Hematoxylin OD std dev,Cytoplasm: Hematoxylin OD max,"
    "Cytoplasm: Hematoxylin OD min,Cytoplasm: Eosin OD mean,Cytoplasm: Eosin OD std dev,Cytoplasm: Eosin OD max,"
    "Cytoplasm: Eosin OD min,Nucleus/Cell area ratio";

CellObject isolated_cell(double cx, double cy, double r, int w, int h) {
  return expand_cells({test::disk(cx, cy, r, w, h)}, SegmentationParams{}, w, h)[0];
}

Plane noise_plane(int w, int h, std::uint64_t seed, double lo = 0.05, double hi = 1.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Plane p(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) p(y, x) = u(rng);
  return p;
}

PixelSet shifted(const PixelSet& s, int dx, int dy) {
  PixelSet out;
  for (const Pixel& p : s) out.push_back({p.x + dx, p.y + dy});
  return out;
}

}  // namespace

TEST_CASE("canonical feature names") {
  CHECK(cell_feature_names().size() == 41);
  CHECK(kCellFeatureCount == 41);
  std::string header = "label";
  for (const auto& n : cell_feature_names()) header += "," + n;
  CHECK(header == kCanonicalHeader);
}

TEST_CASE("shape features of a 10x10 square") {
  const ShapeFeatures s = shape_features(test::rect(5, 7, 10, 10), 0.25);
  CHECK(s.area == doctest::Approx(6.25));
  CHECK(std::abs(s.max_caliper - 3.5355339) < 1e-6);
  CHECK(std::abs(s.min_caliper - 2.5) < 1e-12);
  CHECK(std::abs(s.eccentricity) < 1e-9);
  CHECK(s.circularity <= 1.0);
  CHECK(s.circularity > 0.7);
}

TEST_CASE("shape features of a raster disk") {
  const ShapeFeatures s = shape_features(test::disk(100, 100, 40), 0.25);
  CHECK(s.circularity >= 0.95);
  CHECK(s.circularity <= 1.0);
  CHECK(s.eccentricity >= 0.0);
  CHECK(s.eccentricity <= 0.05);
  CHECK(s.max_caliper == doctest::Approx(20.0).epsilon(0.03));
}

TEST_CASE("eccentricity of an axis-aligned bar") {
  // second moments (w^2 - 1)/12 and (h^2 - 1)/12
  const ShapeFeatures s = shape_features(test::rect(0, 0, 21, 5), 1.0);
  const double l1 = (21.0 * 21.0 - 1.0) / 12.0;
  const double l2 = (5.0 * 5.0 - 1.0) / 12.0;
  CHECK(std::abs(s.eccentricity - std::sqrt(1.0 - l2 / l1)) < 1e-12);
  CHECK(std::abs(s.max_caliper - std::hypot(21.0, 5.0)) < 1e-12);
  CHECK(std::abs(s.min_caliper - 5.0) < 1e-12);
}

TEST_CASE("empty masks are rejected") {
  try {
    shape_features({}, 0.25);
    FAIL("expected EmptyMask");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyMask);
  }
  CHECK_THROWS_AS(intensity_features({}, Plane::Zero(2, 2)), Error);
}

TEST_CASE("intensity feature examples") {
  SUBCASE("constant") {
    const IntensityFeatures f = intensity_features(test::rect(0, 0, 3, 3), Plane::Constant(4, 4, 0.5));
    CHECK(f.mean == doctest::Approx(0.5));
    CHECK(f.std == doctest::Approx(0.0));
    CHECK(f.max == 0.5);
    CHECK(f.min == 0.5);
    CHECK(f.range == 0.0);
  }
  SUBCASE("two values") {
    Plane p(1, 2);
    p << 0.2, 0.6;
    const IntensityFeatures f = intensity_features(test::rect(0, 0, 2, 1), p);
    CHECK(f.mean == doctest::Approx(0.4));
    CHECK(f.sum == doctest::Approx(0.8));
    CHECK(f.std == doctest::Approx(0.2));
    CHECK(f.max == 0.6);
    CHECK(f.min == 0.2);
    CHECK(f.range == doctest::Approx(0.4));
  }
  SUBCASE("four values") {
    Plane p(1, 4);
    p << 0.1, 0.2, 0.3, 0.4;
    const IntensityFeatures f = intensity_features(test::rect(0, 0, 4, 1), p);
    CHECK(f.mean == doctest::Approx(0.25));
    CHECK(std::abs(f.std - 0.1118034) < 1e-6);
  }
}

TEST_CASE("feature vector on constant planes") {
  const CellObject c = isolated_cell(80, 80, 9, 160, 160);
  const CellFeatureVector v = cell_feature_vector(c, Plane::Constant(160, 160, 0.7), Plane::Constant(160, 160, 0.3), 0.25);
  CHECK(v.values.size() == 41);
  CHECK_FALSE(v.degenerate_cytoplasm);
  CHECK(v.values(32) == doctest::Approx(0.7));  // cytoplasm hematoxylin mean
  CHECK(v.values(36) == doctest::Approx(0.3));  // cytoplasm eosin mean
  CHECK(v.values(40) == doctest::Approx(double(c.nucleus_mask.size()) / double(c.cell_mask.size())));
  CHECK(v.values(18) == doctest::Approx(c.cell_mask.size() * 0.0625));
}

TEST_CASE("empty cytoplasm is flagged and zeroed") {
  CellObject c;
  c.id = 4;
  c.nucleus_mask = test::disk(20, 20, 6);
  c.cell_mask = c.nucleus_mask;
  const CellFeatureVector v = cell_feature_vector(c, Plane::Constant(40, 40, 0.9), Plane::Constant(40, 40, 0.2), 0.25);
  CHECK(v.degenerate_cytoplasm);
  for (int j = 32; j < 40; ++j) CHECK(v.values(j) == 0.0);
  CHECK(v.values(40) == 1.0);
}

TEST_CASE("feature vector invariants") {
  const int w = 200, h = 200;
  const Plane hema = noise_plane(w, h, 1);
  const Plane eosin = noise_plane(w, h, 2);
  const CellObject c = isolated_cell(90, 95, 10, w, h);
  const CellFeatureVector v = cell_feature_vector(c, hema, eosin, 0.25);

  CHECK(c.cell_mask.size() == c.nucleus_mask.size() + c.cytoplasm_mask.size());
  CHECK(v.values(40) > 0.0);
  CHECK(v.values(40) <= 1.0);
  // mean, std, max, min blocks for every compartment/stain
  for (int base : {6, 12}) {
    const double mean = v.values(base), sd = v.values(base + 2), mx = v.values(base + 3), mn = v.values(base + 4);
    CHECK(mn <= mean);
    CHECK(mean <= mx);
    CHECK(v.values(base + 5) == mx - mn);
    CHECK(sd <= (mx - mn) / 2 + 1e-12);
  }
  for (int base : {24, 28, 32, 36}) {
    const double mean = v.values(base), sd = v.values(base + 1), mx = v.values(base + 2), mn = v.values(base + 3);
    CHECK(mn >= 0.0);
    CHECK(mn <= mean);
    CHECK(mean <= mx);
    CHECK(sd <= (mx - mn) / 2 + 1e-12);
  }

  SUBCASE("integer translation leaves every feature unchanged") {
    CellObject moved = c;
    moved.nucleus_mask = shifted(c.nucleus_mask, 7, -5);
    moved.cell_mask = shifted(c.cell_mask, 7, -5);
    moved.cytoplasm_mask = shifted(c.cytoplasm_mask, 7, -5);
    Plane hema2 = Plane::Zero(h, w), eosin2 = Plane::Zero(h, w);
    for (const Pixel& p : c.cell_mask) {
      hema2(p.y - 5, p.x + 7) = hema(p.y, p.x);
      eosin2(p.y - 5, p.x + 7) = eosin(p.y, p.x);
    }
    const CellFeatureVector m = cell_feature_vector(moved, hema2, eosin2, 0.25);
    for (int j = 0; j < 41; ++j) CHECK(m.values(j) == doctest::Approx(v.values(j)).epsilon(1e-12));
  }
  SUBCASE("scaling the OD planes scales OD statistics only") {
    const double alpha = 2.5;
    const CellFeatureVector s = cell_feature_vector(c, hema * alpha, eosin * alpha, 0.25);
    for (int j = 0; j < 41; ++j) {
      const bool shape = j < 6 || (j >= 18 && j < 24) || j == 40;
      const double expect = shape ? v.values(j) : alpha * v.values(j);
      CHECK(s.values(j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("feature CSV export and parse") {
  SUBCASE("no cells gives a header-only file") { CHECK(feature_csv_string({}) == std::string(kCanonicalHeader) + "\n"); }
  SUBCASE("one labeled cell") {
    CellFeatureVector r;
    r.cell_id = 1;
    r.label = CellLabel::Tumor;
    const std::string text = feature_csv_string({r});
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.substr(text.find('\n') + 1, 6) == "tumor,");
  }
  SUBCASE("round trip to six significant digits and ordered by id") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3, 3);
    std::vector<CellFeatureVector> rows(5);
    for (int i = 0; i < 5; ++i) {
      rows[i].cell_id = 5 - i;
      rows[i].label = i % 2 ? CellLabel::Stroma : CellLabel::Unlabeled;
      for (int j = 0; j < 41; ++j) rows[i].values(j) = std::pow(10.0, u(rng)) * (j % 3 ? 1 : -1);
    }
    test::TempDir dir("features");
    export_feature_csv(rows, dir.str("f.csv"));
    const auto back = read_feature_csv(dir.str("f.csv"));
    REQUIRE(back.size() == 5);
    for (int k = 0; k < 5; ++k) {
      const CellFeatureVector& orig = rows[4 - k];  // ids 1..5 after sorting
      CHECK(back[k].label == orig.label);
      CHECK(back[k].cell_id == k + 1);
      for (int j = 0; j < 41; ++j) CHECK(std::abs(back[k].values(j) - orig.values(j)) <= 5e-6 * std::abs(orig.values(j)));
    }
  }
  SUBCASE("a wrong header is rejected") { CHECK_THROWS_AS(parse_feature_csv("label,Area\ntumor,1\n"), Error); }
}

TEST_CASE("contour length and outline tracing") {
  const PixelSet sq = test::rect(0, 0, 4, 4);
  const Polygon outline = trace_outline(sq);
  CHECK(outline.size() == 4);
  CHECK(signed_area(outline) == 16.0);
  // iso-line through crack midpoints: a 4x4 square gives 3 + 3 + 3 + 3 + 4 * sqrt(0.5)
  CHECK(std::abs(contour_length(sq) - (12.0 + 4.0 * std::sqrt(0.5))) < 1e-12);
  const PixelSet ring = set_difference(test::rect(0, 0, 7, 7), test::rect(2, 2, 3, 3));
  CHECK(fill_holes(ring) == test::rect(0, 0, 7, 7));
}

TEST_CASE("smoothed contour") {
  // one pixel: crack midpoints form a diamond of side sqrt(0.5); the filter halves it
  CHECK(std::abs(smoothed_contour_length(test::rect(3, 3, 1, 1)) - std::sqrt(2.0)) < 1e-12);
  CHECK(smoothed_contour_length({}) == 0.0);
  for (double r : {3.0, 7.5, 12.0, 40.0}) {
    const PixelSet d = test::disk(60, 60, r);
    CHECK(smoothed_contour_length(d) <= contour_length(d));
  }
  const double c40 = smoothed_contour_length(test::disk(60, 60, 40));
  CHECK(c40 > 2 * std::numbers::pi * 40 * 0.97);
  CHECK(c40 < 2 * std::numbers::pi * 40 * 1.03);
  CHECK(smoothed_contour_length(test::rect(0, 0, 9, 4)) == doctest::Approx(smoothed_contour_length(test::rect(20, 7, 9, 4))));
}

#include "ovpath/annotation.hpp"
#include "ovpath/error.hpp"
#include "ovpath/geometry.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <random>

using namespace ovpath;
using nlohmann::json;

namespace {

json square_feature(double x0, double y0, double side, const std::string& label) {
  return {{"type", "Feature"},
          {"properties", {{"label", label}}},
          {"geometry",
           {{"type", "Polygon"},
            {"coordinates", json::array({json::array({json::array({x0, y0}), json::array({x0 + side, y0}),
                                                      json::array({x0 + side, y0 + side}),
                                                      json::array({x0, y0 + side}), json::array({x0, y0})})})}}}};
}

json point_feature(double x, double y, const std::string& label) {
  return {{"type", "Feature"},
          {"properties", {{"label", label}}},
          {"geometry", {{"type", "Point"}, {"coordinates", json::array({x, y})}}}};
}

std::string collection(const std::vector<json>& features) {
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump();
}

// Cells from explicit nucleus disks, centres in px.
std::vector<CellObject> cells_at(const std::vector<std::pair<double, double>>& centres) {
  std::vector<PixelSet> nuclei;
  for (auto [x, y] : centres) nuclei.push_back(test::disk(x, y, 8, 400, 400));
  return expand_cells(nuclei, SegmentationParams{}, 400, 400);
}

}  // namespace

TEST_CASE("parse_annotations examples") {
  SUBCASE("one tumor polygon") {
    const AnnotationSet s = parse_annotations(collection({square_feature(0, 0, 10, "tumor")}));
    CHECK(s.polygons.size() == 1);
    CHECK(s.points.empty());
    CHECK(s.polygons[0].label == CellLabel::Tumor);
    CHECK(s.polygons[0].rings[0].size() == 4);  // closing vertex dropped
    CHECK(s.warnings.empty());
  }
  SUBCASE("empty collection") {
    const AnnotationSet s = parse_annotations(collection({}));
    CHECK(s.polygons.empty());
    CHECK(s.points.empty());
  }
  SUBCASE("label outside the closed set") {
    try {
      parse_annotations(collection({square_feature(0, 0, 10, "vessel")}));
      FAIL("expected UnknownLabel");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnknownLabel);
    }
  }
  SUBCASE("malformed documents") {
    for (const char* doc : {"{", "[]", "{\"type\":\"Feature\"}", "{\"type\":\"FeatureCollection\"}"}) {
      try {
        parse_annotations(doc);
        FAIL("expected ParseError");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
      }
    }
  }
  SUBCASE("labels are case-insensitive and points parse") {
    const AnnotationSet s = parse_annotations(collection({point_feature(3, 4, "Stroma")}));
    REQUIRE(s.points.size() == 1);
    CHECK(s.points[0].label == CellLabel::Stroma);
    CHECK(s.points[0].position == Point2(3, 4));
  }
}

TEST_CASE("annotations round trip through GeoJSON") {
  AnnotationSet s;
  s.roi_id = "HGSOC_01/roi_00";
  AnnotatedPolygon outer;
  outer.rings = {{{0, 0}, {50, 0}, {50, 50}, {0, 50}}, {{10, 10}, {20, 10}, {20, 20}, {10, 20}}};
  outer.label = CellLabel::Stroma;
  s.polygons.push_back(outer);
  s.points.push_back({{12.5, 7.25}, CellLabel::Tumor});
  const AnnotationSet back = parse_annotations(annotations_to_geojson(s));
  CHECK(back.warnings.empty());
  CHECK(back.roi_id == s.roi_id);
  REQUIRE(back.polygons.size() == 1);
  REQUIRE(back.polygons[0].rings.size() == 2);
  CHECK(back.polygons[0].label == CellLabel::Stroma);
  for (std::size_t r = 0; r < 2; ++r) CHECK(back.polygons[0].rings[r] == outer.rings[r]);
  CHECK(back.polygons[0].area() == doctest::Approx(2500.0 - 100.0));
  CHECK_FALSE(back.polygons[0].contains({15, 15}));
  CHECK(back.polygons[0].contains({30, 30}));
  REQUIRE(back.points.size() == 1);
  CHECK(back.points[0].position == s.points[0].position);
}

TEST_CASE("even-odd containment and shoelace area") {
  const Polygon sq{{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  CHECK(signed_area(sq) == 16.0);
  Polygon cw(sq.rbegin(), sq.rend());
  CHECK(signed_area(cw) == -16.0);
  CHECK(contains(sq, {2, 2}));
  CHECK_FALSE(contains(sq, {5, 2}));
  const Polygon bow{{0, 0}, {4, 4}, {4, 0}, {0, 4}};  // self-intersecting
  CHECK(contains(bow, {3.5, 2}));
  CHECK_FALSE(contains(bow, {2, 3.5}));
}

TEST_CASE("assign_labels examples") {
  const double px = 0.25;
  const auto cells = cells_at({{100, 100}, {300, 100}});
  // centres in µm: (25.125, 25.125) and (75.125, 25.125)
  SUBCASE("polygon label") {
    const AnnotationSet s = parse_annotations(collection({square_feature(0, 0, 50, "tumor")}));
    const auto a = assign_labels(cells, s, px);
    CHECK(a.cells[0].label == CellLabel::Tumor);
    CHECK(a.cells[0].label_source == LabelSource::Polygon);
    CHECK(a.cells[1].label == CellLabel::Unlabeled);
    CHECK(a.cells[1].label_source == LabelSource::None);
  }
  SUBCASE("point inside the cell mask overrides the polygon") {
    // 3 µm right of the first centre lies in the cytoplasm
    const AnnotationSet s =
        parse_annotations(collection({square_feature(0, 0, 50, "tumor"), point_feature(28.1, 25.1, "stroma")}));
    const auto a = assign_labels(cells, s, px);
    CHECK(a.cells[0].label == CellLabel::Stroma);
    CHECK(a.cells[0].label_source == LabelSource::Point);
    CHECK(a.points_outside_cells == 0);
  }
  SUBCASE("nothing matches") {
    const auto a = assign_labels(cells, AnnotationSet{}, px);
    for (const auto& c : a.cells) {
      CHECK(c.label == CellLabel::Unlabeled);
      CHECK(c.label_source == LabelSource::None);
    }
  }
  SUBCASE("point between cells is counted and ignored") {
    const AnnotationSet s = parse_annotations(collection({point_feature(50, 90, "tumor")}));
    const auto a = assign_labels(cells, s, px);
    CHECK(a.points_outside_cells == 1);
    CHECK(a.cells[0].label == CellLabel::Unlabeled);
  }
}

TEST_CASE("innermost polygon wins and order does not matter") {
  std::vector<std::pair<double, double>> centres;
  for (int i = 0; i < 6; ++i) centres.emplace_back(40 + 60 * i, 60 + 50 * (i % 3));
  const auto cells = cells_at(centres);
  std::vector<json> features{square_feature(0, 0, 100, "stroma"), square_feature(5, 5, 30, "tumor"),
                             square_feature(10, 10, 10, "stroma"), point_feature(55.1, 15.1, "tumor"),
                             square_feature(40, 20, 60, "tumor")};
  const auto ref = assign_labels(cells, parse_annotations(collection(features)), 0.25);
  CHECK(ref.cells[0].label == CellLabel::Stroma);   // (10.1, 15.1) lies in the innermost stroma square
  CHECK(ref.cells[0].label_source == LabelSource::Polygon);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(features.begin(), features.end(), rng);
    const auto ann = parse_annotations(collection(features));
    const auto a = assign_labels(cells, ann, 0.25);
    const auto twice = assign_labels(cells, ann, 0.25);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      CHECK(a.cells[i].label == ref.cells[i].label);
      CHECK(a.cells[i].label_source == ref.cells[i].label_source);
      CHECK(twice.cells[i].label == a.cells[i].label);
      CHECK((a.cells[i].label == CellLabel::Unlabeled) == (a.cells[i].label_source == LabelSource::None));
    }
  }
}

TEST_CASE("cell outlines export as a feature collection") {
  const auto cells = cells_at({{100, 100}});
  const json doc = json::parse(cells_to_geojson(cells, 0.25, "X/roi_00"));
  CHECK(doc["type"] == "FeatureCollection");
  REQUIRE(!doc["features"].empty());
  for (const auto& f : doc["features"]) {
    const auto& ring = f["geometry"]["coordinates"][0];
    Polygon poly;
    for (const auto& v : ring) poly.emplace_back(v[0].get<double>(), v[1].get<double>());
    if (poly.front() == poly.back()) poly.pop_back();
    CHECK(poly.size() >= 3);
    CHECK(contains(poly, {25.125, 25.125}));
  }
}

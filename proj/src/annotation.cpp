#include "ovpath/annotation.hpp"

#include "ovpath/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace ovpath {

using nlohmann::json;

double AnnotatedPolygon::area() const {
  if (rings.empty()) return 0.0;
  double a = std::abs(signed_area(rings.front()));
  for (std::size_t i = 1; i < rings.size(); ++i) a -= std::abs(signed_area(rings[i]));
  return a;
}

bool AnnotatedPolygon::contains(const Point2& p) const {
  // even-odd over all rings, so holes exclude
  bool inside = false;
  for (const Polygon& r : rings) inside ^= ovpath::contains(r, p);
  return inside;
}

namespace {

Point2 parse_position(const json& c) {
  if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
    throw Error(ErrorKind::ParseError, "coordinate must be [x, y]");
  }
  return {c[0].get<double>(), c[1].get<double>()};
}

Polygon parse_ring(const json& ring, std::vector<std::string>& warnings) {
  if (!ring.is_array()) throw Error(ErrorKind::ParseError, "ring must be an array of positions");
  Polygon out;
  for (const json& c : ring) out.push_back(parse_position(c));
  if (!out.empty() && out.front() == out.back() && out.size() > 1) {
    out.pop_back();
  } else if (!out.empty()) {
    warnings.emplace_back("unclosed polygon ring closed implicitly");
  }
  if (out.size() < 3) throw Error(ErrorKind::ParseError, "polygon ring needs at least 3 vertices");
  return out;
}

AnnotatedPolygon parse_polygon(const json& coords, CellLabel label, std::vector<std::string>& warnings) {
  if (!coords.is_array() || coords.empty()) throw Error(ErrorKind::ParseError, "polygon without rings");
  AnnotatedPolygon poly;
  poly.label = label;
  for (const json& r : coords) poly.rings.push_back(parse_ring(r, warnings));
  return poly;
}

CellLabel feature_label(const json& feature) {
  const auto props = feature.find("properties");
  if (props == feature.end() || !props->is_object()) {
    throw Error(ErrorKind::ParseError, "feature without properties");
  }
  const auto lab = props->find("label");
  if (lab == props->end() || !lab->is_string()) {
    throw Error(ErrorKind::ParseError, "feature without string property \"label\"");
  }
  const auto parsed = parse_cell_label(lab->get<std::string>());
  if (!parsed || *parsed == CellLabel::Unlabeled) {
    throw Error(ErrorKind::UnknownLabel, "label \"" + lab->get<std::string>() + "\"");
  }
  return *parsed;
}

json ring_to_json(const Polygon& ring) {
  json arr = json::array();
  for (const Point2& p : ring) arr.push_back({p.x(), p.y()});
  if (!ring.empty()) arr.push_back({ring.front().x(), ring.front().y()});
  return arr;
}

}  // namespace

AnnotationSet parse_annotations(const std::string& geojson) {
  json doc;
  try {
    doc = json::parse(geojson);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection") {
    throw Error(ErrorKind::ParseError, "document is not a FeatureCollection");
  }
  const auto features = doc.find("features");
  if (features == doc.end() || !features->is_array()) {
    throw Error(ErrorKind::ParseError, "FeatureCollection without features array");
  }
  AnnotationSet set;
  if (auto props = doc.find("properties"); props != doc.end() && props->is_object()) {
    set.roi_id = props->value("roi_id", "");
  }
  try {
    for (const json& f : *features) {
      if (!f.is_object() || f.value("type", "") != "Feature") {
        throw Error(ErrorKind::ParseError, "collection member is not a Feature");
      }
      const CellLabel label = feature_label(f);
      if (set.roi_id.empty()) {
        if (const auto& p = f["properties"]; p.contains("roi_id") && p["roi_id"].is_string()) {
          set.roi_id = p["roi_id"].get<std::string>();
        }
      }
      const auto geom = f.find("geometry");
      if (geom == f.end() || geom->is_null()) {
        set.warnings.emplace_back("feature without geometry skipped");
        continue;
      }
      const std::string type = geom->value("type", "");
      const json& coords = geom->at("coordinates");
      if (type == "Polygon") {
        set.polygons.push_back(parse_polygon(coords, label, set.warnings));
      } else if (type == "MultiPolygon") {
        for (const json& p : coords) set.polygons.push_back(parse_polygon(p, label, set.warnings));
      } else if (type == "Point") {
        set.points.push_back({parse_position(coords), label});
      } else if (type == "MultiPoint") {
        for (const json& c : coords) set.points.push_back({parse_position(c), label});
      } else {
        set.warnings.push_back("unsupported geometry type " + type + " skipped");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  return set;
}

AnnotationSet read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_annotations(ss.str());
}

std::string annotations_to_geojson(const AnnotationSet& set) {
  json features = json::array();
  for (const AnnotatedPolygon& p : set.polygons) {
    json rings = json::array();
    for (const Polygon& r : p.rings) rings.push_back(ring_to_json(r));
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}},
                        {"properties", {{"label", to_string(p.label)}, {"roi_id", set.roi_id}}}});
  }
  for (const AnnotatedPoint& p : set.points) {
    features.push_back(
        {{"type", "Feature"},
         {"geometry", {{"type", "Point"}, {"coordinates", {p.position.x(), p.position.y()}}}},
         {"properties", {{"label", to_string(p.label)}, {"roi_id", set.roi_id}}}});
  }
  json doc = {{"type", "FeatureCollection"}, {"properties", {{"roi_id", set.roi_id}}}, {"features", features}};
  return doc.dump() + "\n";
}

LabelAssignment assign_labels(const std::vector<CellObject>& cells, const AnnotationSet& ann,
                              double pixel_size) {
  LabelAssignment out;
  out.cells.resize(cells.size());

  std::vector<double> areas;
  areas.reserve(ann.polygons.size());
  for (const AnnotatedPolygon& p : ann.polygons) areas.push_back(p.area());

  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellObject& c = cells[i];
    LabeledCell& lc = out.cells[i];
    lc.cell_id = c.id;
    const Point2 centroid(c.centroid_x, c.centroid_y);
    double best_area = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ann.polygons.size(); ++k) {
      const AnnotatedPolygon& p = ann.polygons[k];
      if (!p.contains(centroid)) continue;
      // smallest containing polygon wins; equal areas resolved by label order
      if (areas[k] < best_area || (areas[k] == best_area && p.label < lc.label)) {
        best_area = areas[k];
        lc.label = p.label;
        lc.label_source = LabelSource::Polygon;
      }
    }
  }

  if (ann.points.empty()) return out;
  std::unordered_map<std::int64_t, std::size_t> owner;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (const Pixel& px : cells[i].cell_mask) {
      owner.emplace((static_cast<std::int64_t>(px.y) << 32) | static_cast<std::uint32_t>(px.x), i);
    }
  }
  std::vector<double> point_dist(cells.size(), std::numeric_limits<double>::infinity());
  for (const AnnotatedPoint& pt : ann.points) {
    const auto px = static_cast<std::int64_t>(std::floor(pt.position.x() / pixel_size));
    const auto py = static_cast<std::int64_t>(std::floor(pt.position.y() / pixel_size));
    const auto it = owner.find((py << 32) | static_cast<std::uint32_t>(px));
    if (px < 0 || py < 0 || it == owner.end()) {
      ++out.points_outside_cells;
      continue;
    }
    const std::size_t i = it->second;
    const double d = (pt.position - Point2(cells[i].centroid_x, cells[i].centroid_y)).norm();
    LabeledCell& lc = out.cells[i];
    // several points in one cell: nearest to the centroid wins
    if (d < point_dist[i] || (d == point_dist[i] && pt.label < lc.label)) {
      point_dist[i] = d;
      lc.label = pt.label;
      lc.label_source = LabelSource::Point;
    }
  }
  return out;
}

std::string cells_to_geojson(const std::vector<CellObject>& cells, double pixel_size,
                             const std::string& roi_id) {
  json features = json::array();
  auto outline = [&](const PixelSet& mask) {
    Polygon ring = trace_outline(mask);
    for (Point2& p : ring) p *= pixel_size;
    return json::array({ring_to_json(ring)});
  };
  for (const CellObject& c : cells) {
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", outline(c.nucleus_mask)}}},
                        {"properties", {{"cell_id", c.id}, {"object", "nucleus"}, {"roi_id", roi_id}}}});
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", outline(c.cell_mask)}}},
                        {"properties", {{"cell_id", c.id}, {"object", "cell"}, {"roi_id", roi_id}}}});
  }
  json doc = {{"type", "FeatureCollection"}, {"properties", {{"roi_id", roi_id}}}, {"features", features}};
  return doc.dump() + "\n";
}

}  // namespace ovpath

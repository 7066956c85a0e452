#include "ovpath/labels.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace ovpath {

namespace {
std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}
}  // namespace

std::string_view to_string(CellLabel label) {
  switch (label) {
    case CellLabel::Tumor: return "tumor";
    case CellLabel::Stroma: return "stroma";
    case CellLabel::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::string_view to_string(LabelSource source) {
  switch (source) {
    case LabelSource::Polygon: return "polygon";
    case LabelSource::Point: return "point";
    case LabelSource::None: return "none";
  }
  return "none";
}

std::optional<CellLabel> parse_cell_label(std::string_view text) {
  const std::string t = lower(text);
  if (t == "tumor") return CellLabel::Tumor;
  if (t == "stroma") return CellLabel::Stroma;
  if (t == "unlabeled") return CellLabel::Unlabeled;
  return std::nullopt;
}

std::string_view to_string(Histotype h) { return h == Histotype::HGSOC ? "HGSOC" : "SBOT"; }

std::optional<Histotype> parse_histotype(std::string_view text) {
  const std::string t = lower(text);
  if (t == "hgsoc") return Histotype::HGSOC;
  if (t == "sbot") return Histotype::SBOT;
  return std::nullopt;
}

}  // namespace ovpath

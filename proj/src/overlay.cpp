#include "ovpath/overlay.hpp"

#include "ovpath/error.hpp"

namespace ovpath {

RgbTile emit_overlays(const RgbTile& tile, const std::vector<CellObject>& cells,
                      const std::vector<CellLabel>& predictions, OverlayLegend* legend) {
  if (cells.size() != predictions.size()) {
    throw Error(ErrorKind::LengthMismatch, "one prediction per cell is required");
  }
  RgbTile out = tile;
  LabelPlane owner = LabelPlane::Zero(tile.height, tile.width);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (const Pixel& p : cells[i].nucleus_mask) {
      if (p.x < 0 || p.y < 0 || p.x >= tile.width || p.y >= tile.height) {
        throw Error(ErrorKind::DimensionMismatch, "nucleus pixel outside the tile");
      }
      owner(p.y, p.x) = static_cast<std::int32_t>(i + 1);
    }
  }
  OverlayLegend counts;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellLabel label = predictions[i];
    const auto& color = label == CellLabel::Tumor ? kTumorColor : label == CellLabel::Stroma ? kStromaColor : kUnlabeledColor;
    (label == CellLabel::Tumor ? counts.tumor : label == CellLabel::Stroma ? counts.stroma : counts.unlabeled)++;
    const auto id = static_cast<std::int32_t>(i + 1);
    for (const Pixel& p : cells[i].nucleus_mask) {
      auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < tile.width && y < tile.height && owner(y, x) == id;
      };
      if (inside(p.x - 1, p.y) && inside(p.x + 1, p.y) && inside(p.x, p.y - 1) && inside(p.x, p.y + 1)) continue;
      for (int c = 0; c < 3; ++c) out.at(p.x, p.y, c) = color[c];
    }
  }
  if (legend) *legend = counts;
  return out;
}

}  // namespace ovpath

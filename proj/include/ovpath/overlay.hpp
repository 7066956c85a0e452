#pragma once

#include "ovpath/image.hpp"
#include "ovpath/labels.hpp"
#include "ovpath/segment.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace ovpath {

inline constexpr std::array<std::uint8_t, 3> kTumorColor{220, 20, 20};
inline constexpr std::array<std::uint8_t, 3> kStromaColor{20, 170, 20};
inline constexpr std::array<std::uint8_t, 3> kUnlabeledColor{128, 128, 128};

struct OverlayLegend {
  int tumor = 0;
  int stroma = 0;
  int unlabeled = 0;
  int total() const { return tumor + stroma + unlabeled; }
};

/// Copy of `tile` with each nucleus boundary (mask pixels with a 4-neighbour
/// outside the mask) stroked 1 px in its label colour.
RgbTile emit_overlays(const RgbTile& tile, const std::vector<CellObject>& cells,
                      const std::vector<CellLabel>& predictions, OverlayLegend* legend = nullptr);

}  // namespace ovpath

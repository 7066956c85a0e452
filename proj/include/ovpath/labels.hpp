#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ovpath {

enum class CellLabel { Tumor, Stroma, Unlabeled };
enum class LabelSource { Polygon, Point, None };

std::string_view to_string(CellLabel label);
std::string_view to_string(LabelSource source);

/// Case-insensitive "tumor" / "stroma" / "unlabeled".
std::optional<CellLabel> parse_cell_label(std::string_view text);

/// Histotype of a subject; patch classifiers encode HGSOC as +1, SBOT as -1.
enum class Histotype { HGSOC, SBOT };

std::string_view to_string(Histotype h);
std::optional<Histotype> parse_histotype(std::string_view text);
inline int sign_of(Histotype h) { return h == Histotype::HGSOC ? 1 : -1; }

}  // namespace ovpath

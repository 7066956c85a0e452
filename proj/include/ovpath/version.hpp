#pragma once

namespace ovpath {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace ovpath

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ovpath {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::string& path);

}  // namespace ovpath

#pragma once

#include <string>
#include <vector>

namespace ovpath::csv {

/// Minimal reader for the comma-separated files this project writes: no
/// quoting, LF or CRLF line endings.
std::vector<std::vector<std::string>> parse(const std::string& text);
std::vector<std::vector<std::string>> read(const std::string& path);

std::string format_g6(double v);
std::string format_exact(double v);  // round-trippable (%.17g)

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace ovpath::csv

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace gpe {

/// Shortest decimal representation that parses back to the same double.
std::string format_shortest(double value);

/// Seventeen significant digits.
std::string format_full(double value);

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path &path, std::string_view content);

} // namespace gpe

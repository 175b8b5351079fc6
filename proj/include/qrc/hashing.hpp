#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace qrc {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

}  // namespace qrc

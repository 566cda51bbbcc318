#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace regime_mef::io {

/// Writes via a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Splits one CSV record; honours double quotes and doubled quotes inside them.
std::vector<std::string> split_csv_line(std::string_view line);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// Fixed-precision formatting ("%.{digits}f").
std::string fixed(double v, int digits);

/// Lowercase hex SHA-256 of a byte string / of a file's contents.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace regime_mef::io

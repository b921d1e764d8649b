#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace toxdebias {

std::string read_file(const std::filesystem::path& path);

// Writes atomically enough for staging: content goes to a sibling temp file
// which is then renamed over the target. Parent directories are created.
void write_file(const std::filesystem::path& path, std::string_view content);

// Splits on '\n', dropping a trailing '\r' per line and the empty piece after
// a final newline.
std::vector<std::string_view> split_lines(std::string_view content);

std::string_view trim(std::string_view s);

std::vector<std::string> split_tsv_row(std::string_view row);

// Backslash escapes for tab, newline, carriage return and backslash.
std::string escape_tsv(std::string_view s);
std::string unescape_tsv(std::string_view s);

// Shortest representation that round-trips exactly.
std::string format_real(double v);

// Fixed two-decimal percentage, e.g. 0.12345 -> "12.35".
std::string format_percent(double rate);

std::string ascii_lower(std::string_view s);

}  // namespace toxdebias

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace colarec::io {

/// Writes through a temporary sibling file and renames it into place, so
/// readers never observe a partially written artifact.
void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer,
                  bool binary = false);

void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// Calls `fn(line_number, line)` for every line; strips a trailing '\r'.
/// Line numbers start at 1.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

std::vector<std::string_view> split(std::string_view text, char sep);

std::string_view trim(std::string_view text);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Fixed-precision formatting for report tables.
std::string format_fixed(double value, int digits);

void require_file(const std::filesystem::path& path, std::string_view what);

}  // namespace colarec::io

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace colarec {

/// Lowercases ASCII letters and splits on whitespace and ASCII punctuation.
/// Bytes >= 0x80 are treated as word characters.
std::vector<std::string> tokenize(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

}  // namespace colarec

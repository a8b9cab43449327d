#include "colarec/text.hpp"

namespace colarec {

namespace {

bool is_separator(unsigned char c) {
    if (c >= 0x80) return false;
    if (c <= ' ' || c == 0x7F) return true;
    const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    return !alnum;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_separator(c)) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
            continue;
        }
        current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace colarec

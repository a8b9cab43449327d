#include "colarec/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "colarec/error.hpp"

namespace colarec {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parse: return "parse";
        case ErrorKind::shape: return "shape";
        case ErrorKind::capacity: return "capacity";
        case ErrorKind::missing_artifact: return "missing_artifact";
        case ErrorKind::config: return "config";
        case ErrorKind::format: return "format";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::invalid_argument: return "invalid_argument";
    }
    return "unknown";
}

}  // namespace colarec

namespace colarec::io {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& writer,
                  bool binary) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
        if (!out) throw Error(ErrorKind::missing_artifact, "cannot open for writing: " + tmp.string());
        writer(out);
        out.flush();
        if (!out) throw Error(ErrorKind::format, "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, std::string_view text) {
    write_atomic(path, [&](std::ostream& out) { out << text; });
}

void for_each_line(const fs::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_artifact, "cannot open " + path.string());
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::string_view view(line);
        if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
        fn(number, view);
    }
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(text.substr(start));
            return parts;
        }
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view text) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
    return text;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

std::string format_fixed(double value, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
    return buf;
}

void require_file(const fs::path& path, std::string_view what) {
    if (!fs::exists(path)) {
        throw Error(ErrorKind::missing_artifact,
                    std::string(what) + " not found: " + path.string());
    }
}

}  // namespace colarec::io

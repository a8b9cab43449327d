#include "colarec/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "colarec/error.hpp"
#include "colarec/io.hpp"

namespace colarec {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'L', 'R', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

class Reader {
public:
    Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

    bool done() const { return pos_ == bytes_.size(); }

    std::uint64_t get(std::size_t width) {
        if (bytes_.size() - pos_ < width) {
            throw Error(ErrorKind::format, "truncated checkpoint: " + path_.string());
        }
        std::uint64_t v = 0;
        for (std::size_t b = 0; b < width; ++b) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
        }
        pos_ += width;
        return v;
    }

    std::string get_bytes(std::size_t n) {
        if (bytes_.size() - pos_ < n) {
            throw Error(ErrorKind::format, "truncated checkpoint: " + path_.string());
        }
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::string& bytes_;
    const std::filesystem::path& path_;
    std::size_t pos_ = 0;
};

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& r : records_) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

const NamedTensor& Checkpoint::at(const std::string& name) const {
    if (const auto* r = find(name)) return *r;
    throw Error(ErrorKind::format, "checkpoint has no record '" + name + "'");
}

double Checkpoint::scalar(const std::string& name) const {
    const auto& r = at(name);
    if (r.values.size() != 1) throw Error(ErrorKind::format, "record '" + name + "' is not a scalar");
    return r.values[0];
}

std::optional<double> Checkpoint::scalar_or(const std::string& name) const {
    if (find(name) == nullptr) return std::nullopt;
    return scalar(name);
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::string out(kMagic.begin(), kMagic.end());
    put_u32(out, kCheckpointVersion);
    for (const auto& r : records_) {
        put_u32(out, static_cast<std::uint32_t>(r.name.size()));
        out += r.name;
        put_u32(out, static_cast<std::uint32_t>(r.shape.size()));
        std::size_t count = 1;
        for (auto d : r.shape) {
            put_u64(out, d);
            count *= d;
        }
        if (count != r.values.size()) {
            throw Error(ErrorKind::shape, "record '" + r.name + "' value count does not match its shape");
        }
        for (double v : r.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    io::write_atomic(path, [&](std::ostream& s) { s.write(out.data(), static_cast<std::streamsize>(out.size())); },
                     true);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    io::require_file(path, "checkpoint");
    std::ifstream in(path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw Error(ErrorKind::format, "truncated checkpoint: " + path.string());
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw Error(ErrorKind::format, "not a checkpoint (bad magic): " + path.string());
    }
    Reader reader(bytes, path);
    reader.get_bytes(4);
    const auto version = static_cast<std::uint32_t>(reader.get(4));
    if (version != kCheckpointVersion) {
        throw Error(ErrorKind::format, "checkpoint version " + std::to_string(version) +
                                           " is not supported (expected " +
                                           std::to_string(kCheckpointVersion) + "): " + path.string());
    }
    Checkpoint ckpt;
    while (!reader.done()) {
        NamedTensor r;
        const auto name_len = reader.get(4);
        r.name = reader.get_bytes(name_len);
        const auto rank = reader.get(4);
        std::size_t count = 1;
        for (std::uint64_t d = 0; d < rank; ++d) {
            r.shape.push_back(reader.get(8));
            count *= r.shape.back();
        }
        if (count > reader.remaining() / 8) {
            throw Error(ErrorKind::format, "truncated checkpoint: " + path.string());
        }
        r.values.resize(count);
        for (auto& v : r.values) v = std::bit_cast<double>(reader.get(8));
        ckpt.records_.push_back(std::move(r));
    }
    return ckpt;
}

}  // namespace colarec

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "colarec/tensor.hpp"

namespace colarec {

// Binary layout, all integers little-endian:
//   "CLRC" | u32 version | records until EOF
//   record: u32 name_len | name bytes | u32 rank | u64 dims[rank] | f64 values[prod(dims)]
// Values are stored as f64 so both float and double tensors round-trip exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    template <class T>
    static NamedTensor from(std::string name, const Tensor<T>& t) {
        return {std::move(name), t.shape(), std::vector<double>(t.values().begin(), t.values().end())};
    }

    template <class T>
    Tensor<T> to_tensor() const {
        return Tensor<T>(shape, std::vector<T>(values.begin(), values.end()));
    }

    static NamedTensor scalar(std::string name, double value) { return {std::move(name), {}, {value}}; }
};

class Checkpoint {
public:
    Checkpoint() = default;
    explicit Checkpoint(std::vector<NamedTensor> records) : records_(std::move(records)) {}

    void add(NamedTensor t) { records_.push_back(std::move(t)); }
    const std::vector<NamedTensor>& records() const { return records_; }

    const NamedTensor* find(const std::string& name) const;
    /// Throws naming the missing record.
    const NamedTensor& at(const std::string& name) const;
    double scalar(const std::string& name) const;
    std::optional<double> scalar_or(const std::string& name) const;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

private:
    std::vector<NamedTensor> records_;
};

}  // namespace colarec

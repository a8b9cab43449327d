#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "colarec/error.hpp"

namespace colarec {

std::string shape_string(std::span<const std::size_t> shape);

/// Dense row-major tensor. The autodiff graph only builds rank-2 tensors;
/// other ranks exist for checkpoint records.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
        : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (values_.size() != element_count(shape_)) {
            throw Error(ErrorKind::shape, "value count " + std::to_string(values_.size()) +
                                              " does not match shape " + shape_string(shape_));
        }
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) {
        return Tensor({rows, cols}, fill);
    }

    static Tensor scalar(T value) { return Tensor({1, 1}, value); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const {
        if (shape_.size() == 2) return shape_[1];
        return shape_.empty() ? 1 : shape_[0];
    }

    T& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    T operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    T& operator[](std::size_t k) { return values_[k]; }
    T operator[](std::size_t k) const { return values_[k]; }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }
    std::span<T> row(std::size_t r) { return std::span<T>(values_).subspan(r * cols(), cols()); }
    std::span<const T> row(std::size_t r) const {
        return std::span<const T>(values_).subspan(r * cols(), cols());
    }

    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }

    void fill(T value) { std::fill(values_.begin(), values_.end(), value); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

    std::vector<std::size_t> shape_;
    std::vector<T> values_;
};

/// C (+)= op(A) * op(B) for rank-2 tensors given as raw row-major buffers.
template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate);

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace colarec

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "colarec/autodiff.hpp"

namespace colarec {

struct AdamWConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Decoupled weight decay Adam with bias-corrected moments.
template <class T>
class AdamW {
public:
    AdamW(AdamWConfig config, std::vector<Parameter<T>*> params)
        : config_(config), params_(std::move(params)) {
        for (auto* p : params_) {
            first_.emplace_back(p->value.shape(), T(0));
            second_.emplace_back(p->value.shape(), T(0));
        }
    }

    /// Applies one update from the gradients currently held by the parameters.
    void step() {
        ++step_;
        const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
        const T lr = static_cast<T>(config_.lr);
        const T b1 = static_cast<T>(config_.beta1);
        const T b2 = static_cast<T>(config_.beta2);
        const T decay = static_cast<T>(config_.lr * config_.weight_decay);
        const T eps = static_cast<T>(config_.eps);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& value = params_[k]->value;
            const auto& grad = params_[k]->grad;
            auto& m = first_[k];
            auto& v = second_[k];
            for (std::size_t e = 0; e < value.size(); ++e) {
                const T g = grad[e];
                value[e] -= decay * value[e];
                m[e] = b1 * m[e] + (T(1) - b1) * g;
                v[e] = b2 * v[e] + (T(1) - b2) * g * g;
                const T m_hat = m[e] / static_cast<T>(bc1);
                const T v_hat = v[e] / static_cast<T>(bc2);
                value[e] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    std::uint64_t steps() const { return step_; }
    const AdamWConfig& config() const { return config_; }

private:
    AdamWConfig config_;
    std::vector<Parameter<T>*> params_;
    std::vector<Tensor<T>> first_;
    std::vector<Tensor<T>> second_;
    std::uint64_t step_ = 0;
};

}  // namespace colarec

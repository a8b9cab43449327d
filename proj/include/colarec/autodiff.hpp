#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "colarec/tensor.hpp"

namespace colarec {

/// Trainable tensor with its accumulated gradient.
template <class T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape(), T(0)) {}

    void zero_grad() { grad.fill(T(0)); }
};

/// Handle to a node of a Graph.
struct Var {
    std::uint32_t id = 0;
};

/// Attention-style mask for softmax_rows: masked entries get probability 0.
struct SoftmaxMask {
    bool causal = false;
    /// Optional per-column validity (e.g. padded keys).
    std::span<const std::uint8_t> valid_cols{};
};

/// Records operations on rank-2 tensors and replays them backwards.
/// Nodes are appended in creation order, which is a topological order, so
/// backward() is a single reverse sweep.
template <class T>
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    Var constant(Tensor<T> value);
    /// Leaf bound to `p`; backward() adds this node's gradient into p.grad.
    /// Repeated calls with the same parameter return the same node.
    Var param(Parameter<T>& p);

    const Tensor<T>& value(Var v) const { return val(v.id); }
    /// Gradient after backward(); zero-shaped when the node was unreachable.
    const Tensor<T>& grad(Var v) const { return nodes_[v.id].grad; }
    std::size_t size() const { return nodes_.size(); }

    Var matmul(Var a, Var b);
    /// a * b^T
    Var matmul_nt(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    /// Adds a 1 x n row to every row of a.
    Var add_row(Var a, Var row);
    Var mul(Var a, Var b);
    Var scale(Var a, T factor);
    Var concat_rows(std::span<const Var> parts);
    Var concat_cols(std::span<const Var> parts);
    Var slice_rows(Var a, std::size_t begin, std::size_t count);
    Var slice_cols(Var a, std::size_t begin, std::size_t count);
    /// Embedding lookup: one output row per index.
    Var row_select(Var table, std::span<const std::uint32_t> rows);
    /// Mean over rows (optionally only rows with keep[r] == true) -> 1 x n.
    Var mean_rows(Var a, std::span<const std::uint8_t> keep = {});
    Var softmax_rows(Var a, SoftmaxMask mask = {});
    Var log_softmax_rows(Var a);
    Var log(Var a);
    Var sigmoid(Var a);
    /// Numerically stable log(sigmoid(a)).
    Var log_sigmoid(Var a);
    /// Sum of elementwise products -> 1 x 1.
    Var dot(Var a, Var b);
    Var sum(Var a);
    /// Single element as a 1 x 1 node.
    Var pick(Var a, std::size_t r, std::size_t c);
    /// Tanh-approximated GELU.
    Var gelu(Var a);
    /// Row-wise x / sqrt(mean(x^2) + eps) * gain, gain is 1 x n.
    Var rms_norm(Var a, Var gain, T eps = T(1e-6));

    /// Reverse sweep from a 1 x 1 node; accumulates into bound parameters.
    void backward(Var loss);

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::vector<std::uint32_t> parents;
        std::function<void(Graph&, std::uint32_t)> backward;
        Parameter<T>* param = nullptr;  // leaf value lives in param->value
        bool requires_grad = false;
    };

    Var push(Tensor<T> value, std::vector<std::uint32_t> parents,
             std::function<void(Graph&, std::uint32_t)> backward);
    Tensor<T>& grad_slot(std::uint32_t id);
    bool wants_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
    const Tensor<T>& val(std::uint32_t id) const {
        const Node& n = nodes_[id];
        return n.param != nullptr ? n.param->value : n.value;
    }

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter<T>*, std::uint32_t> param_nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace colarec

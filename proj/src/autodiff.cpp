#include "colarec/autodiff.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace colarec {

std::string shape_string(std::span<const std::size_t> shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t k = 0; k < shape.size(); ++k) out << (k ? "x" : "") << shape[k];
    out << ']';
    return out.str();
}

template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, T(0));
    if (!trans_a && !trans_b) {
        for (std::size_t i = 0; i < m; ++i) {
            T* crow = c + i * n;
            const T* arow = a + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const T av = arow[p];
                const T* brow = b + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!trans_a && trans_b) {
        for (std::size_t i = 0; i < m; ++i) {
            const T* arow = a + i * k;
            for (std::size_t j = 0; j < n; ++j) {
                const T* brow = b + j * k;
                T acc = T(0);
                for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                c[i * n + j] += acc;
            }
        }
    } else if (trans_a && !trans_b) {
        for (std::size_t p = 0; p < k; ++p) {
            const T* arow = a + p * m;
            const T* brow = b + p * n;
            for (std::size_t i = 0; i < m; ++i) {
                const T av = arow[i];
                T* crow = c + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                T acc = T(0);
                for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
                c[i * n + j] += acc;
            }
        }
    }
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::shape, "matmul shape mismatch: " + shape_string(a.shape()) + " * " +
                                          shape_string(b.shape()));
    }
    Tensor<T> c = Tensor<T>::matrix(a.rows(), b.cols());
    gemm(false, false, a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data(), false);
    return c;
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           const double*, double*, bool);
template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);

namespace {

template <class T>
[[noreturn]] void shape_error(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    throw Error(ErrorKind::shape, std::string(op) + " shape mismatch: " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

template <class T>
void require_matrix(const char* op, const Tensor<T>& a) {
    if (a.rank() != 2) {
        throw Error(ErrorKind::shape, std::string(op) + " expects a matrix, got " + shape_string(a.shape()));
    }
}

}  // namespace

template <class T>
Var Graph<T>::push(Tensor<T> value, std::vector<std::uint32_t> parents,
                   std::function<void(Graph&, std::uint32_t)> backward) {
    Node node;
    node.value = std::move(value);
    for (auto p : parents) node.requires_grad = node.requires_grad || nodes_[p].requires_grad;
    node.parents = std::move(parents);
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class T>
Tensor<T>& Graph<T>::grad_slot(std::uint32_t id) {
    Node& n = nodes_[id];
    const auto& v = val(id);
    if (n.grad.shape() != v.shape()) n.grad = Tensor<T>(v.shape(), T(0));
    return n.grad;
}

template <class T>
Var Graph<T>::constant(Tensor<T> value) {
    require_matrix("constant", value);
    return push(std::move(value), {}, nullptr);
}

template <class T>
Var Graph<T>::param(Parameter<T>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
    require_matrix("param", p.value);
    Node node;
    node.param = &p;
    node.requires_grad = true;
    nodes_.push_back(std::move(node));
    const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
    param_nodes_.emplace(&p, id);
    return Var{id};
}

template <class T>
Var Graph<T>::matmul(Var a, Var b) {
    const auto& A = val(a.id);
    const auto& B = val(b.id);
    if (A.cols() != B.rows()) shape_error("matmul", A, B);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor<T> C = Tensor<T>::matrix(m, n);
    gemm(false, false, m, n, k, A.data(), B.data(), C.data(), false);
    return push(std::move(C), {a.id, b.id}, [a, b, m, n, k](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        if (g.wants_grad(a.id)) {
            gemm(false, true, m, k, n, G.data(), g.val(b.id).data(), g.grad_slot(a.id).data(), true);
        }
        if (g.wants_grad(b.id)) {
            gemm(true, false, k, n, m, g.val(a.id).data(), G.data(), g.grad_slot(b.id).data(), true);
        }
    });
}

template <class T>
Var Graph<T>::matmul_nt(Var a, Var b) {
    const auto& A = val(a.id);
    const auto& B = val(b.id);
    if (A.cols() != B.cols()) shape_error("matmul_nt", A, B);
    const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
    Tensor<T> C = Tensor<T>::matrix(m, n);
    gemm(false, true, m, n, k, A.data(), B.data(), C.data(), false);
    return push(std::move(C), {a.id, b.id}, [a, b, m, n, k](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        // dA = G * B, dB = G^T * A
        if (g.wants_grad(a.id)) {
            gemm(false, false, m, k, n, G.data(), g.val(b.id).data(), g.grad_slot(a.id).data(), true);
        }
        if (g.wants_grad(b.id)) {
            gemm(true, false, n, k, m, G.data(), g.val(a.id).data(), g.grad_slot(b.id).data(), true);
        }
    });
}

template <class T>
Var Graph<T>::add(Var a, Var b) {
    const auto& A = val(a.id);
    const auto& B = val(b.id);
    if (!A.same_shape(B)) shape_error("add", A, B);
    Tensor<T> C = A;
    for (std::size_t k = 0; k < C.size(); ++k) C[k] += B[k];
    return push(std::move(C), {a.id, b.id}, [a, b](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        for (auto id : {a.id, b.id}) {
            if (!g.wants_grad(id)) continue;
            auto& D = g.grad_slot(id);
            for (std::size_t k = 0; k < G.size(); ++k) D[k] += G[k];
        }
    });
}

template <class T>
Var Graph<T>::sub(Var a, Var b) {
    const auto& A = val(a.id);
    const auto& B = val(b.id);
    if (!A.same_shape(B)) shape_error("sub", A, B);
    Tensor<T> C = A;
    for (std::size_t k = 0; k < C.size(); ++k) C[k] -= B[k];
    return push(std::move(C), {a.id, b.id}, [a, b](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        if (g.wants_grad(a.id)) {
            auto& D = g.grad_slot(a.id);
            for (std::size_t k = 0; k < G.size(); ++k) D[k] += G[k];
        }
        if (g.wants_grad(b.id)) {
            auto& D = g.grad_slot(b.id);
            for (std::size_t k = 0; k < G.size(); ++k) D[k] -= G[k];
        }
    });
}

template <class T>
Var Graph<T>::add_row(Var a, Var row) {
    const auto& A = val(a.id);
    const auto& R = val(row.id);
    if (R.rows() != 1 || R.cols() != A.cols()) shape_error("add_row", A, R);
    Tensor<T> C = A;
    const std::size_t n = A.cols();
    for (std::size_t r = 0; r < A.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) C(r, c) += R[c];
    }
    return push(std::move(C), {a.id, row.id}, [a, row, n](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        if (g.wants_grad(a.id)) {
            auto& D = g.grad_slot(a.id);
            for (std::size_t k = 0; k < G.size(); ++k) D[k] += G[k];
        }
        if (g.wants_grad(row.id)) {
            auto& D = g.grad_slot(row.id);
            for (std::size_t k = 0; k < G.size(); ++k) D[k % n] += G[k];
        }
    });
}

template <class T>
Var Graph<T>::mul(Var a, Var b) {
    const auto& A = val(a.id);
    const auto& B = val(b.id);
    if (!A.same_shape(B)) shape_error("mul", A, B);
    Tensor<T> C = A;
    for (std::size_t k = 0; k < C.size(); ++k) C[k] *= B[k];
    return push(std::move(C), {a.id, b.id}, [a, b](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        if (g.wants_grad(a.id)) {
            auto& D = g.grad_slot(a.id);
            const auto& B = g.val(b.id);
            for (std::size_t k = 0; k < G.size(); ++k) D[k] += G[k] * B[k];
        }
        if (g.wants_grad(b.id)) {
            auto& D = g.grad_slot(b.id);
            const auto& A = g.val(a.id);
            for (std::size_t k = 0; k < G.size(); ++k) D[k] += G[k] * A[k];
        }
    });
}

template <class T>
Var Graph<T>::scale(Var a, T factor) {
    Tensor<T> C = val(a.id);
    for (auto& v : C.values()) v *= factor;
    return push(std::move(C), {a.id}, [a, factor](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        auto& D = g.grad_slot(a.id);
        for (std::size_t k = 0; k < G.size(); ++k) D[k] += G[k] * factor;
    });
}

template <class T>
Var Graph<T>::concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw Error(ErrorKind::shape, "concat_rows of nothing");
    const std::size_t n = val(parts[0].id).cols();
    std::size_t rows = 0;
    for (Var p : parts) {
        if (val(p.id).cols() != n) shape_error("concat_rows", val(parts[0].id), val(p.id));
        rows += val(p.id).rows();
    }
    Tensor<T> C = Tensor<T>::matrix(rows, n);
    std::size_t offset = 0;
    std::vector<std::uint32_t> ids;
    for (Var p : parts) {
        const auto& P = val(p.id);
        std::copy(P.values().begin(), P.values().end(), C.values().begin() + static_cast<std::ptrdiff_t>(offset));
        offset += P.size();
        ids.push_back(p.id);
    }
    return push(std::move(C), ids, [ids](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        std::size_t offset = 0;
        for (auto id : ids) {
            const std::size_t count = g.val(id).size();
            if (g.wants_grad(id)) {
                auto& D = g.grad_slot(id);
                for (std::size_t k = 0; k < count; ++k) D[k] += G[offset + k];
            }
            offset += count;
        }
    });
}

template <class T>
Var Graph<T>::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw Error(ErrorKind::shape, "concat_cols of nothing");
    const std::size_t rows = val(parts[0].id).rows();
    std::size_t cols = 0;
    for (Var p : parts) {
        if (val(p.id).rows() != rows) shape_error("concat_cols", val(parts[0].id), val(p.id));
        cols += val(p.id).cols();
    }
    Tensor<T> C = Tensor<T>::matrix(rows, cols);
    std::vector<std::uint32_t> ids;
    std::size_t offset = 0;
    for (Var p : parts) {
        const auto& P = val(p.id);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < P.cols(); ++c) C(r, offset + c) = P(r, c);
        }
        offset += P.cols();
        ids.push_back(p.id);
    }
    return push(std::move(C), ids, [ids, rows](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        std::size_t offset = 0;
        for (auto id : ids) {
            const std::size_t pc = g.val(id).cols();
            if (g.wants_grad(id)) {
                auto& D = g.grad_slot(id);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < pc; ++c) D(r, c) += G(r, offset + c);
                }
            }
            offset += pc;
        }
    });
}

template <class T>
Var Graph<T>::slice_rows(Var a, std::size_t begin, std::size_t count) {
    const auto& A = val(a.id);
    if (begin + count > A.rows() || count == 0) {
        throw Error(ErrorKind::shape, "slice_rows out of range for " + shape_string(A.shape()));
    }
    const std::size_t n = A.cols();
    Tensor<T> C = Tensor<T>::matrix(count, n);
    std::copy_n(A.data() + begin * n, count * n, C.data());
    return push(std::move(C), {a.id}, [a, begin, n](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        auto& D = g.grad_slot(a.id);
        for (std::size_t k = 0; k < G.size(); ++k) D[begin * n + k] += G[k];
    });
}

template <class T>
Var Graph<T>::slice_cols(Var a, std::size_t begin, std::size_t count) {
    const auto& A = val(a.id);
    if (begin + count > A.cols() || count == 0) {
        throw Error(ErrorKind::shape, "slice_cols out of range for " + shape_string(A.shape()));
    }
    const std::size_t rows = A.rows();
    Tensor<T> C = Tensor<T>::matrix(rows, count);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < count; ++c) C(r, c) = A(r, begin + c);
    }
    return push(std::move(C), {a.id}, [a, begin, count, rows](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        auto& D = g.grad_slot(a.id);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < count; ++c) D(r, begin + c) += G(r, c);
        }
    });
}

template <class T>
Var Graph<T>::row_select(Var table, std::span<const std::uint32_t> rows) {
    const auto& E = val(table.id);
    const std::size_t n = E.cols();
    if (rows.empty()) throw Error(ErrorKind::shape, "row_select with no rows");
    Tensor<T> C = Tensor<T>::matrix(rows.size(), n);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= E.rows()) {
            throw Error(ErrorKind::shape, "row_select index " + std::to_string(rows[r]) +
                                              " out of range for " + shape_string(E.shape()));
        }
        std::copy_n(E.data() + rows[r] * n, n, C.data() + r * n);
    }
    std::vector<std::uint32_t> idx(rows.begin(), rows.end());
    return push(std::move(C), {table.id}, [table, idx = std::move(idx), n](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        auto& D = g.grad_slot(table.id);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            for (std::size_t c = 0; c < n; ++c) D(idx[r], c) += G(r, c);
        }
    });
}

template <class T>
Var Graph<T>::mean_rows(Var a, std::span<const std::uint8_t> keep) {
    const auto& A = val(a.id);
    const std::size_t rows = A.rows(), n = A.cols();
    std::vector<bool> mask(rows, true);
    if (!keep.empty()) {
        if (keep.size() != rows) throw Error(ErrorKind::shape, "mean_rows mask length mismatch");
        for (std::size_t r = 0; r < rows; ++r) mask[r] = keep[r];
    }
    const std::size_t count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    if (count == 0) throw Error(ErrorKind::shape, "mean_rows over zero rows");
    const T inv = T(1) / static_cast<T>(count);
    Tensor<T> C = Tensor<T>::matrix(1, n);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!mask[r]) continue;
        for (std::size_t c = 0; c < n; ++c) C[c] += A(r, c);
    }
    for (auto& v : C.values()) v *= inv;
    return push(std::move(C), {a.id}, [a, mask = std::move(mask), inv, n](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        auto& D = g.grad_slot(a.id);
        for (std::size_t r = 0; r < mask.size(); ++r) {
            if (!mask[r]) continue;
            for (std::size_t c = 0; c < n; ++c) D(r, c) += G[c] * inv;
        }
    });
}

template <class T>
Var Graph<T>::softmax_rows(Var a, SoftmaxMask mask) {
    const auto& A = val(a.id);
    const std::size_t rows = A.rows(), n = A.cols();
    if (!mask.valid_cols.empty() && mask.valid_cols.size() != n) {
        throw Error(ErrorKind::shape, "softmax mask length mismatch");
    }
    std::vector<bool> allowed(rows * n, true);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            bool ok = !mask.causal || c <= r;
            if (!mask.valid_cols.empty()) ok = ok && mask.valid_cols[c];
            allowed[r * n + c] = ok;
        }
    }
    Tensor<T> P = Tensor<T>::matrix(rows, n);
    for (std::size_t r = 0; r < rows; ++r) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            if (allowed[r * n + c]) mx = std::max(mx, A(r, c));
        }
        if (!std::isfinite(mx)) continue;  // fully masked row stays zero
        T total = T(0);
        for (std::size_t c = 0; c < n; ++c) {
            if (!allowed[r * n + c]) continue;
            P(r, c) = std::exp(A(r, c) - mx);
            total += P(r, c);
        }
        for (std::size_t c = 0; c < n; ++c) P(r, c) /= total;
    }
    return push(std::move(P), {a.id}, [a, rows, n](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        const auto& P = g.nodes_[self].value;
        auto& D = g.grad_slot(a.id);
        for (std::size_t r = 0; r < rows; ++r) {
            T inner = T(0);
            for (std::size_t c = 0; c < n; ++c) inner += G(r, c) * P(r, c);
            for (std::size_t c = 0; c < n; ++c) D(r, c) += P(r, c) * (G(r, c) - inner);
        }
    });
}

template <class T>
Var Graph<T>::log_softmax_rows(Var a) {
    const auto& A = val(a.id);
    const std::size_t rows = A.rows(), n = A.cols();
    Tensor<T> L = Tensor<T>::matrix(rows, n);
    for (std::size_t r = 0; r < rows; ++r) {
        T mx = A(r, 0);
        for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, A(r, c));
        T total = T(0);
        for (std::size_t c = 0; c < n; ++c) total += std::exp(A(r, c) - mx);
        const T lse = mx + std::log(total);
        for (std::size_t c = 0; c < n; ++c) L(r, c) = A(r, c) - lse;
    }
    return push(std::move(L), {a.id}, [a, rows, n](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        const auto& L = g.nodes_[self].value;
        auto& D = g.grad_slot(a.id);
        for (std::size_t r = 0; r < rows; ++r) {
            T gsum = T(0);
            for (std::size_t c = 0; c < n; ++c) gsum += G(r, c);
            for (std::size_t c = 0; c < n; ++c) D(r, c) += G(r, c) - std::exp(L(r, c)) * gsum;
        }
    });
}

template <class T>
Var Graph<T>::log(Var a) {
    Tensor<T> C = val(a.id);
    for (auto& v : C.values()) v = std::log(v);
    return push(std::move(C), {a.id}, [a](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        const auto& A = g.val(a.id);
        auto& D = g.grad_slot(a.id);
        for (std::size_t k = 0; k < G.size(); ++k) D[k] += G[k] / A[k];
    });
}

namespace {

template <class T>
T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace

template <class T>
Var Graph<T>::sigmoid(Var a) {
    Tensor<T> C = val(a.id);
    for (auto& v : C.values()) v = stable_sigmoid(v);
    return push(std::move(C), {a.id}, [a](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        const auto& S = g.nodes_[self].value;
        auto& D = g.grad_slot(a.id);
        for (std::size_t k = 0; k < G.size(); ++k) D[k] += G[k] * S[k] * (T(1) - S[k]);
    });
}

template <class T>
Var Graph<T>::log_sigmoid(Var a) {
    Tensor<T> C = val(a.id);
    // log sigma(x) = min(x, 0) - log1p(exp(-|x|))
    for (auto& v : C.values()) v = std::min(v, T(0)) - std::log1p(std::exp(-std::abs(v)));
    return push(std::move(C), {a.id}, [a](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        const auto& A = g.val(a.id);
        auto& D = g.grad_slot(a.id);
        for (std::size_t k = 0; k < G.size(); ++k) D[k] += G[k] * stable_sigmoid(-A[k]);
    });
}

template <class T>
Var Graph<T>::dot(Var a, Var b) {
    const auto& A = val(a.id);
    const auto& B = val(b.id);
    if (!A.same_shape(B)) shape_error("dot", A, B);
    T acc = T(0);
    for (std::size_t k = 0; k < A.size(); ++k) acc += A[k] * B[k];
    return push(Tensor<T>::scalar(acc), {a.id, b.id}, [a, b](Graph& g, std::uint32_t self) {
        const T G = g.nodes_[self].grad[0];
        if (g.wants_grad(a.id)) {
            auto& D = g.grad_slot(a.id);
            const auto& B = g.val(b.id);
            for (std::size_t k = 0; k < D.size(); ++k) D[k] += G * B[k];
        }
        if (g.wants_grad(b.id)) {
            auto& D = g.grad_slot(b.id);
            const auto& A = g.val(a.id);
            for (std::size_t k = 0; k < D.size(); ++k) D[k] += G * A[k];
        }
    });
}

template <class T>
Var Graph<T>::sum(Var a) {
    T acc = T(0);
    for (T v : val(a.id).values()) acc += v;
    return push(Tensor<T>::scalar(acc), {a.id}, [a](Graph& g, std::uint32_t self) {
        const T G = g.nodes_[self].grad[0];
        auto& D = g.grad_slot(a.id);
        for (auto& v : D.values()) v += G;
    });
}

template <class T>
Var Graph<T>::pick(Var a, std::size_t r, std::size_t c) {
    const auto& A = val(a.id);
    if (r >= A.rows() || c >= A.cols()) {
        throw Error(ErrorKind::shape, "pick out of range for " + shape_string(A.shape()));
    }
    return push(Tensor<T>::scalar(A(r, c)), {a.id}, [a, r, c](Graph& g, std::uint32_t self) {
        g.grad_slot(a.id)(r, c) += g.nodes_[self].grad[0];
    });
}

namespace {

template <class T>
constexpr T kGeluC = T(0.7978845608028654);  // sqrt(2/pi)

}  // namespace

template <class T>
Var Graph<T>::gelu(Var a) {
    Tensor<T> C = val(a.id);
    for (auto& x : C.values()) {
        const T u = kGeluC<T> * (x + T(0.044715) * x * x * x);
        x = T(0.5) * x * (T(1) + std::tanh(u));
    }
    return push(std::move(C), {a.id}, [a](Graph& g, std::uint32_t self) {
        const auto& G = g.nodes_[self].grad;
        const auto& A = g.val(a.id);
        auto& D = g.grad_slot(a.id);
        for (std::size_t k = 0; k < G.size(); ++k) {
            const T x = A[k];
            const T u = kGeluC<T> * (x + T(0.044715) * x * x * x);
            const T t = std::tanh(u);
            const T du = kGeluC<T> * (T(1) + T(3) * T(0.044715) * x * x);
            D[k] += G[k] * (T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du);
        }
    });
}

template <class T>
Var Graph<T>::rms_norm(Var a, Var gain, T eps) {
    const auto& A = val(a.id);
    const auto& W = val(gain.id);
    const std::size_t rows = A.rows(), n = A.cols();
    if (W.rows() != 1 || W.cols() != n) shape_error("rms_norm", A, W);
    Tensor<T> C = Tensor<T>::matrix(rows, n);
    std::vector<T> inv_rms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        T ms = T(0);
        for (std::size_t c = 0; c < n; ++c) ms += A(r, c) * A(r, c);
        ms /= static_cast<T>(n);
        inv_rms[r] = T(1) / std::sqrt(ms + eps);
        for (std::size_t c = 0; c < n; ++c) C(r, c) = A(r, c) * inv_rms[r] * W[c];
    }
    return push(std::move(C), {a.id, gain.id},
                [a, gain, rows, n, inv_rms = std::move(inv_rms)](Graph& g, std::uint32_t self) {
                    const auto& G = g.nodes_[self].grad;
                    const auto& A = g.val(a.id);
                    const auto& W = g.val(gain.id);
                    if (g.wants_grad(gain.id)) {
                        auto& DW = g.grad_slot(gain.id);
                        for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t c = 0; c < n; ++c) DW[c] += G(r, c) * A(r, c) * inv_rms[r];
                        }
                    }
                    if (g.wants_grad(a.id)) {
                        auto& D = g.grad_slot(a.id);
                        for (std::size_t r = 0; r < rows; ++r) {
                            const T s = inv_rms[r];
                            T inner = T(0);
                            for (std::size_t c = 0; c < n; ++c) inner += G(r, c) * W[c] * A(r, c);
                            const T coeff = s * s * s * inner / static_cast<T>(n);
                            for (std::size_t c = 0; c < n; ++c) {
                                D(r, c) += G(r, c) * W[c] * s - A(r, c) * coeff;
                            }
                        }
                    }
                });
}

template <class T>
void Graph<T>::backward(Var loss) {
    Node& root = nodes_[loss.id];
    if (val(loss.id).size() != 1) {
        throw Error(ErrorKind::shape, "backward needs a scalar loss, got " + shape_string(val(loss.id).shape()));
    }
    if (!root.requires_grad) return;
    grad_slot(loss.id)[0] += T(1);
    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.requires_grad || node.grad.size() == 0) continue;
        if (node.param != nullptr) {
            auto& pg = node.param->grad;
            if (pg.shape() != node.grad.shape()) pg = Tensor<T>(node.grad.shape(), T(0));
            for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += node.grad[k];
        } else if (node.backward) {
            node.backward(*this, id);
        }
    }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace colarec

#pragma once

// Independent reference implementations used by unit and acceptance tests.
// They favour obviousness over speed and share no code with the library
// beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "colarec/autodiff.hpp"
#include "colarec/dataset.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, std::vector<double>(c, 0.0)); }

inline Matrix multiply(const Matrix& a, const Matrix& b) {
    Matrix c = zeros(a.size(), b.empty() ? 0 : b[0].size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < c[i].size(); ++j)
            for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

/// Dense normalized adjacency over users then items; mean of A^0..A^L times E0.
inline Matrix dense_propagate(std::size_t n_users, std::size_t n_items,
                              const std::vector<std::pair<std::size_t, std::size_t>>& edges, const Matrix& e0,
                              std::size_t layers) {
    const std::size_t n = n_users + n_items;
    Matrix adj = zeros(n, n);
    for (auto [u, i] : edges) {
        adj[u][n_users + i] = 1.0;
        adj[n_users + i][u] = 1.0;
    }
    std::vector<double> deg(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) deg[r] += adj[r][c];
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            if (adj[r][c] != 0.0) adj[r][c] /= std::sqrt(deg[r] * deg[c]);
    Matrix total = e0, power = e0;
    for (std::size_t l = 0; l < layers; ++l) {
        power = multiply(adj, power);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < total[r].size(); ++c) total[r][c] += power[r][c];
    }
    for (auto& row : total)
        for (auto& v : row) v /= static_cast<double>(layers + 1);
    return total;
}

/// Repeated full scans deleting every node below the threshold.
inline std::set<std::pair<std::string, std::string>> kcore(std::set<std::pair<std::string, std::string>> edges,
                                                          std::size_t k) {
    for (bool changed = true; changed;) {
        changed = false;
        std::map<std::string, std::size_t> du, di;
        for (const auto& [u, i] : edges) {
            ++du[u];
            ++di[i];
        }
        std::set<std::pair<std::string, std::string>> kept;
        for (const auto& e : edges) {
            if (du[e.first] >= k && di[e.second] >= k) kept.insert(e);
        }
        changed = kept.size() != edges.size();
        edges = std::move(kept);
    }
    return edges;
}

inline double sse(const std::vector<std::vector<double>>& pts, const std::vector<int>& labels, int k) {
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
        std::vector<double> mean(pts[0].size(), 0.0);
        int count = 0;
        for (std::size_t p = 0; p < pts.size(); ++p) {
            if (labels[p] != c) continue;
            ++count;
            for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += pts[p][d];
        }
        if (count == 0) continue;
        for (auto& m : mean) m /= count;
        for (std::size_t p = 0; p < pts.size(); ++p) {
            if (labels[p] != c) continue;
            for (std::size_t d = 0; d < mean.size(); ++d) total += (pts[p][d] - mean[d]) * (pts[p][d] - mean[d]);
        }
    }
    return total;
}

/// Minimum SSE over every labelling with at most `cap` points per cluster.
inline double best_constrained_sse(const std::vector<std::vector<double>>& pts, int k, int cap,
                                   std::vector<int>* best_labels = nullptr) {
    const std::size_t n = pts.size();
    std::vector<int> labels(n, 0), sizes(k, 0);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t)> rec = [&](std::size_t p) {
        if (p == n) {
            const double v = sse(pts, labels, k);
            if (v < best) {
                best = v;
                if (best_labels) *best_labels = labels;
            }
            return;
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[c] == cap) continue;
            labels[p] = c;
            ++sizes[c];
            rec(p + 1);
            --sizes[c];
        }
    };
    rec(0);
    return best;
}

inline double recall(const std::vector<std::size_t>& ranked, const std::set<std::size_t>& truth, std::size_t n) {
    std::set<std::size_t> top(ranked.begin(), ranked.begin() + std::min(n, ranked.size()));
    std::vector<std::size_t> both;
    std::set_intersection(top.begin(), top.end(), truth.begin(), truth.end(), std::back_inserter(both));
    return static_cast<double>(both.size()) / static_cast<double>(truth.size());
}

inline double ndcg(const std::vector<std::size_t>& ranked, const std::set<std::size_t>& truth, std::size_t n) {
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t p = 1; p <= std::min(n, ranked.size()); ++p) {
        if (truth.count(ranked[p - 1])) dcg += std::log(2.0) / std::log(p + 1.0);
    }
    for (std::size_t p = 1; p <= std::min(n, truth.size()); ++p) idcg += std::log(2.0) / std::log(p + 1.0);
    return dcg / idcg;
}

/// Fourth-order central differences of `loss` over every entry of every parameter,
/// compared with the analytic gradient already stored in p->grad.
/// Relative error = |a - n| / max(|a|, |n|, floor).
struct GradCheck {
    double max_rel_err = 0.0;
    std::string worst;
    std::size_t checked = 0;
};

inline GradCheck check_gradients(const std::vector<colarec::Parameter<double>*>& params,
                                 const std::function<double()>& loss, double step = 1e-3, double floor = 1e-6) {
    GradCheck out;
    for (auto* p : params) {
        for (std::size_t e = 0; e < p->value.size(); ++e) {
            const double saved = p->value[e];
            const auto at = [&](double offset) {
                p->value[e] = saved + offset;
                return loss();
            };
            const double near = at(step) - at(-step);
            const double far = at(2.0 * step) - at(-2.0 * step);
            p->value[e] = saved;
            const double numeric = (8.0 * near - far) / (12.0 * step);
            const double analytic = p->grad[e];
            const double err =
                std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
            ++out.checked;
            if (err > out.max_rel_err) {
                out.max_rel_err = err;
                out.worst = p->name + "[" + std::to_string(e) + "] analytic " + std::to_string(analytic) +
                            " numeric " + std::to_string(numeric);
            }
        }
    }
    return out;
}

}  // namespace oracle

#include "colarec/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "colarec/error.hpp"

namespace colarec {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double d = a[c] - b[c];
        s += d * d;
    }
    return s;
}

struct Candidate {
    double dist;
    std::uint32_t point;
    std::uint32_t cluster;

    bool operator<(const Candidate& o) const {
        if (dist != o.dist) return dist < o.dist;
        if (point != o.point) return point < o.point;
        return cluster < o.cluster;
    }
};

double sq_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

}  // namespace

Tensor<double> kmeans_pp_init(const Tensor<double>& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (k == 0 || k > n) throw Error(ErrorKind::invalid_argument, "k-means++ needs 1 <= k <= n");
    Tensor<double> centroids = Tensor<double>::matrix(k, d);
    std::size_t first = rng.uniform_index(n);
    std::copy(points.row(first).begin(), points.row(first).end(), centroids.row(0).begin());
    std::vector<double> closest(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            closest[p] = std::min(closest[p], sq_dist(points.row(p), centroids.row(c - 1)));
            total += closest[p];
        }
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double target = rng.uniform01() * total;
            for (std::size_t p = 0; p < n; ++p) {
                target -= closest[p];
                if (target < 0.0) {
                    pick = p;
                    break;
                }
            }
        } else {
            pick = rng.uniform_index(n);
        }
        std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
    }
    return centroids;
}

KMeansResult capacity_lloyd(const Tensor<double>& points, Tensor<double> centroids,
                            std::size_t capacity, std::size_t max_iterations) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const std::size_t k = centroids.rows();
    if (capacity == 0 || k * capacity < n) {
        throw Error(ErrorKind::capacity, "infeasible capacity: " + std::to_string(k) + " clusters x " +
                                             std::to_string(capacity) + " < " + std::to_string(n) + " points");
    }
    KMeansResult result;
    result.labels.assign(n, 0);
    std::vector<std::uint32_t> previous;
    std::vector<Candidate> pairs(n * k);
    std::vector<bool> assigned(n);
    std::vector<std::size_t> load(k);

    for (std::size_t iter = 0; iter < std::max<std::size_t>(1, max_iterations); ++iter) {
        result.iterations = iter + 1;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t c = 0; c < k; ++c) {
                pairs[p * k + c] = {sq_dist(points.row(p), centroids.row(c)), static_cast<std::uint32_t>(p),
                                    static_cast<std::uint32_t>(c)};
            }
        }
        std::sort(pairs.begin(), pairs.end());
        std::fill(assigned.begin(), assigned.end(), false);
        std::fill(load.begin(), load.end(), 0);
        std::size_t placed = 0;
        for (const auto& cand : pairs) {
            if (assigned[cand.point] || load[cand.cluster] >= capacity) continue;
            assigned[cand.point] = true;
            ++load[cand.cluster];
            result.labels[cand.point] = cand.cluster;
            if (++placed == n) break;
        }

        // update step
        Tensor<double> sums = Tensor<double>::matrix(k, d);
        for (std::size_t p = 0; p < n; ++p) {
            auto row = sums.row(result.labels[p]);
            const auto pt = points.row(p);
            for (std::size_t c = 0; c < d; ++c) row[c] += pt[c];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (load[c] == 0) continue;
            for (std::size_t j = 0; j < d; ++j) centroids(c, j) = sums(c, j) / static_cast<double>(load[c]);
        }
        bool reseeded = false;
        std::vector<bool> used(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (load[c] != 0) continue;
            // farthest point of the largest cluster becomes the new centroid
            const std::size_t largest = static_cast<std::size_t>(
                std::max_element(load.begin(), load.end()) - load.begin());
            double best = -1.0;
            std::size_t far = n;
            for (std::size_t p = 0; p < n; ++p) {
                if (result.labels[p] != largest || used[p]) continue;
                const double dist = sq_dist(points.row(p), centroids.row(largest));
                if (dist > best) {
                    best = dist;
                    far = p;
                }
            }
            if (far == n) continue;
            used[far] = true;
            std::copy(points.row(far).begin(), points.row(far).end(), centroids.row(c).begin());
            reseeded = true;
        }
        if (!reseeded && result.labels == previous) break;
        previous = result.labels;
    }
    result.centroids = std::move(centroids);
    result.sse = partition_sse(points, result.labels);
    return result;
}

std::size_t refine_partition(const Tensor<double>& points, std::vector<std::uint32_t>& labels, std::size_t k,
                             std::size_t capacity, std::size_t max_passes) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    Tensor<double> sums = Tensor<double>::matrix(k, d);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t p = 0; p < n; ++p) {
        ++count[labels[p]];
        for (std::size_t c = 0; c < d; ++c) sums(labels[p], c) += points(p, c);
    }
    // SSE of a cluster is sum |x|^2 - |S|^2 / n; the first part never changes
    const auto term = [](double sq, std::size_t size) { return size == 0 ? 0.0 : sq / static_cast<double>(size); };
    const bool swaps = n <= kRefineSwapLimit;
    std::vector<double> tmp_a(d), tmp_b(d);
    std::size_t moves = 0;
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
        bool improved = false;
        for (std::size_t p = 0; p < n; ++p) {
            const std::uint32_t a = labels[p];
            const auto x = points.row(p);
            const double base_a = term(sq_norm(sums.row(a)), count[a]);
            for (std::size_t c = 0; c < d; ++c) tmp_a[c] = sums(a, c) - x[c];
            const double without_p = term(sq_norm(tmp_a), count[a] - 1);
            std::size_t best_b = k;
            double best_gain = 1e-12 * (1.0 + base_a);
            for (std::uint32_t b = 0; b < k; ++b) {
                if (b == a || count[b] >= capacity) continue;
                for (std::size_t c = 0; c < d; ++c) tmp_b[c] = sums(b, c) + x[c];
                const double gain = (without_p + term(sq_norm(tmp_b), count[b] + 1)) -
                                    (base_a + term(sq_norm(sums.row(b)), count[b]));
                if (gain > best_gain) {
                    best_gain = gain;
                    best_b = b;
                }
            }
            std::size_t best_q = n;
            if (swaps) {
                for (std::size_t q = 0; q < n; ++q) {
                    const std::uint32_t b = labels[q];
                    if (b == a) continue;
                    const auto y = points.row(q);
                    for (std::size_t c = 0; c < d; ++c) {
                        tmp_a[c] = sums(a, c) - x[c] + y[c];
                        tmp_b[c] = sums(b, c) - y[c] + x[c];
                    }
                    const double gain = (term(sq_norm(tmp_a), count[a]) + term(sq_norm(tmp_b), count[b])) -
                                        (base_a + term(sq_norm(sums.row(b)), count[b]));
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_q = q;
                    }
                }
            }
            if (best_q != n) {
                const std::uint32_t b = labels[best_q];
                const auto y = points.row(best_q);
                for (std::size_t c = 0; c < d; ++c) {
                    sums(a, c) += y[c] - x[c];
                    sums(b, c) += x[c] - y[c];
                }
                labels[p] = b;
                labels[best_q] = a;
            } else if (best_b != k) {
                for (std::size_t c = 0; c < d; ++c) {
                    sums(a, c) -= x[c];
                    sums(best_b, c) += x[c];
                }
                --count[a];
                ++count[best_b];
                labels[p] = static_cast<std::uint32_t>(best_b);
            } else {
                continue;
            }
            improved = true;
            ++moves;
        }
        if (!improved) break;
    }
    return moves;
}

KMeansResult constrained_kmeans(const Tensor<double>& points, std::size_t k, std::size_t capacity,
                                std::uint64_t seed, const KMeansOptions& options) {
    const std::size_t n = points.rows();
    if (n == 0) return {};
    if (k == 0 || capacity == 0) throw Error(ErrorKind::invalid_argument, "k and capacity must be >= 1");
    const std::size_t k_eff = std::min(k, n);
    if ((n + capacity - 1) / capacity > k_eff) {
        throw Error(ErrorKind::capacity, "infeasible capacity: " + std::to_string(n) + " points need " +
                                             std::to_string((n + capacity - 1) / capacity) +
                                             " clusters of size " + std::to_string(capacity) + ", only " +
                                             std::to_string(k_eff) + " available");
    }
    Rng rng(seed);
    KMeansResult best;
    bool have = false;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
        KMeansResult run = capacity_lloyd(points, kmeans_pp_init(points, k_eff, rng), capacity,
                                          options.max_iterations);
        if (refine_partition(points, run.labels, k_eff, capacity, options.max_iterations) > 0) {
            run.sse = partition_sse(points, run.labels);
            for (std::size_t c = 0; c < k_eff; ++c) {
                std::size_t size = 0;
                std::vector<double> mean(points.cols(), 0.0);
                for (std::size_t p = 0; p < n; ++p) {
                    if (run.labels[p] != c) continue;
                    ++size;
                    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += points(p, j);
                }
                if (size == 0) continue;
                for (std::size_t j = 0; j < mean.size(); ++j) run.centroids(c, j) = mean[j] / static_cast<double>(size);
            }
        }
        if (!have || run.sse < best.sse) {
            best = std::move(run);
            have = true;
        }
    }
    return best;
}

double partition_sse(const Tensor<double>& points, const std::vector<std::uint32_t>& labels) {
    const std::size_t d = points.cols();
    std::uint32_t k = 0;
    for (auto l : labels) k = std::max(k, l + 1);
    Tensor<double> sums = Tensor<double>::matrix(k, d);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
        ++count[labels[p]];
        for (std::size_t c = 0; c < d; ++c) sums(labels[p], c) += points(p, c);
    }
    double sse = 0.0;
    for (std::size_t p = 0; p < labels.size(); ++p) {
        const double inv = 1.0 / static_cast<double>(count[labels[p]]);
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = points(p, c) - sums(labels[p], c) * inv;
            sse += diff * diff;
        }
    }
    return sse;
}

}  // namespace colarec

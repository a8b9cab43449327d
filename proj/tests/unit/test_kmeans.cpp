#include <algorithm>
#include <cmath>
#include <set>

#include "colarec/error.hpp"
#include "colarec/kmeans.hpp"
#include "colarec/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace colarec;

namespace {

Tensor<double> points_of(const std::vector<std::vector<double>>& pts) {
    Tensor<double> t = Tensor<double>::matrix(pts.size(), pts[0].size());
    for (std::size_t r = 0; r < pts.size(); ++r)
        for (std::size_t c = 0; c < pts[r].size(); ++c) t(r, c) = pts[r][c];
    return t;
}

std::vector<std::vector<double>> random_points(std::size_t n, std::size_t d, Rng& rng) {
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    for (auto& p : pts)
        for (auto& v : p) v = 10.0 * rng.uniform01();
    return pts;
}

std::vector<std::size_t> sizes(const std::vector<std::uint32_t>& labels, std::size_t k) {
    std::vector<std::size_t> out(k, 0);
    for (auto l : labels) ++out[l];
    return out;
}

/// Plain Lloyd from fixed centroids: nearest centroid, lowest index on ties.
std::vector<std::uint32_t> plain_lloyd(const std::vector<std::vector<double>>& pts,
                                       std::vector<std::vector<double>> centroids, int iterations) {
    std::vector<std::uint32_t> labels(pts.size(), 0);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t p = 0; p < pts.size(); ++p) {
            double best = INFINITY;
            for (std::size_t c = 0; c < centroids.size(); ++c) {
                double d = 0.0;
                for (std::size_t j = 0; j < pts[p].size(); ++j) d += std::pow(pts[p][j] - centroids[c][j], 2);
                if (d < best) {
                    best = d;
                    labels[p] = static_cast<std::uint32_t>(c);
                }
            }
        }
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            std::vector<double> mean(pts[0].size(), 0.0);
            int count = 0;
            for (std::size_t p = 0; p < pts.size(); ++p) {
                if (labels[p] != c) continue;
                ++count;
                for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += pts[p][j];
            }
            if (count == 0) continue;
            for (std::size_t j = 0; j < mean.size(); ++j) centroids[c][j] = mean[j] / count;
        }
    }
    return labels;
}

}  // namespace

TEST_CASE("K=1 with enough capacity puts every point in one cluster") {
    Rng rng(1);
    const auto t = points_of(random_points(7, 2, rng));
    const auto r = constrained_kmeans(t, 1, 7, 3);
    CHECK(std::all_of(r.labels.begin(), r.labels.end(), [](auto l) { return l == 0; }));
}

TEST_CASE("six colinear points, K=3, capacity 2 form three adjacent pairs") {
    const auto t = points_of({{0.0}, {1.0}, {10.0}, {11.0}, {20.0}, {21.0}});
    const auto r = constrained_kmeans(t, 3, 2, 7);
    CHECK(r.labels[0] == r.labels[1]);
    CHECK(r.labels[2] == r.labels[3]);
    CHECK(r.labels[4] == r.labels[5]);
    CHECK(std::set<std::uint32_t>(r.labels.begin(), r.labels.end()).size() == 3);
    CHECK(r.sse == doctest::Approx(1.5));
}

TEST_CASE("six evenly spaced colinear points match the exhaustive optimum") {
    const std::vector<std::vector<double>> pts{{0}, {1}, {2}, {3}, {4}, {5}};
    const auto r = constrained_kmeans(points_of(pts), 3, 2, 1);
    CHECK(r.sse == doctest::Approx(oracle::best_constrained_sse(pts, 3, 2)));
}

TEST_CASE("capacity n behaves like unconstrained Lloyd from the same init") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const auto pts = random_points(12, 2, rng);
        const auto t = points_of(pts);
        Rng init_rng(trial);
        const auto init = kmeans_pp_init(t, 3, init_rng);
        std::vector<std::vector<double>> centroids(3, std::vector<double>(2));
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t j = 0; j < 2; ++j) centroids[c][j] = init(c, j);
        const auto r = capacity_lloyd(t, init, 12, 50);
        CHECK(r.labels == plain_lloyd(pts, centroids, static_cast<int>(r.iterations)));
    }
}

TEST_CASE("infeasible capacity is an error") {
    Rng rng(2);
    const auto t = points_of(random_points(7, 2, rng));
    try {
        constrained_kmeans(t, 3, 2, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::capacity);
    }
    CHECK_THROWS_AS(constrained_kmeans(t, 0, 2, 1), Error);
    CHECK_THROWS_AS(constrained_kmeans(t, 2, 0, 1), Error);
}

TEST_CASE("capacity holds and SSE stays near the exhaustive optimum on small inputs") {
    Rng rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(6);
        const std::size_t k = 2 + rng.uniform_index(2);
        const std::size_t cap = (n + k - 1) / k + rng.uniform_index(2);
        const auto pts = random_points(n, 2, rng);
        const auto r = constrained_kmeans(points_of(pts), k, cap, trial);
        const auto s = sizes(r.labels, k);
        CHECK(*std::max_element(s.begin(), s.end()) <= cap);
        CHECK(r.sse == doctest::Approx(partition_sse(points_of(pts), r.labels)));
        const double best = oracle::best_constrained_sse(pts, int(k), int(cap));
        CHECK(r.sse <= 1.10 * best + 1e-9);
    }
}

TEST_CASE("refinement never raises SSE or breaks capacity") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const auto t = points_of(random_points(30, 3, rng));
        std::vector<std::uint32_t> labels(30);
        for (std::size_t p = 0; p < 30; ++p) labels[p] = static_cast<std::uint32_t>(p % 5);
        const double before = partition_sse(t, labels);
        refine_partition(t, labels, 5, 6 + trial % 3, 100);
        CHECK(partition_sse(t, labels) <= before + 1e-9);
        const auto s = sizes(labels, 5);
        CHECK(*std::max_element(s.begin(), s.end()) <= std::size_t(6 + trial % 3));
    }
}

TEST_CASE("constrained k-means is deterministic for a seed") {
    Rng rng(5);
    const auto t = points_of(random_points(40, 4, rng));
    CHECK(constrained_kmeans(t, 4, 10, 9).labels == constrained_kmeans(t, 4, 10, 9).labels);
}

TEST_CASE("partition_sse matches the oracle") {
    Rng rng(6);
    const auto pts = random_points(9, 3, rng);
    std::vector<std::uint32_t> labels(9);
    std::vector<int> ilabels(9);
    for (std::size_t p = 0; p < 9; ++p) ilabels[p] = int(labels[p] = std::uint32_t(rng.uniform_index(3)));
    CHECK(partition_sse(points_of(pts), labels) == doctest::Approx(oracle::sse(pts, ilabels, 3)));
}

#pragma once

#include <cstdint>
#include <vector>

#include "colarec/rng.hpp"
#include "colarec/tensor.hpp"

namespace colarec {

struct KMeansOptions {
    std::size_t max_iterations = 100;
    /// Independent k-means++ starts; the lowest-SSE result wins.
    std::size_t restarts = 4;
};

struct KMeansResult {
    std::vector<std::uint32_t> labels;
    Tensor<double> centroids;
    double sse = 0.0;
    std::size_t iterations = 0;
};

/// k-means++ seeding over the rows of `points`.
Tensor<double> kmeans_pp_init(const Tensor<double>& points, std::size_t k, Rng& rng);

/// Lloyd iterations from fixed centroids. The assignment step visits all
/// (point, centroid) pairs in ascending squared distance (ties: point index,
/// then centroid index) and places each point into the first centroid that
/// still has room. Stops on a label fixpoint or after max_iterations.
KMeansResult capacity_lloyd(const Tensor<double>& points, Tensor<double> centroids,
                            std::size_t capacity, std::size_t max_iterations);

/// Point swaps are only searched below this many points.
inline constexpr std::size_t kRefineSwapLimit = 256;

/// Local search on a capacity-feasible labelling: single-point moves into
/// clusters with room and, for small inputs, pairwise swaps, each taken only
/// when it lowers the exact SSE. Returns the number of accepted changes.
std::size_t refine_partition(const Tensor<double>& points, std::vector<std::uint32_t>& labels, std::size_t k,
                             std::size_t capacity, std::size_t max_passes);

/// Capacity-constrained k-means with min(k, n) clusters of at most
/// `capacity` points each; every restart is refined before comparison.
/// Throws when ceil(n / capacity) > k.
KMeansResult constrained_kmeans(const Tensor<double>& points, std::size_t k, std::size_t capacity,
                                std::uint64_t seed, const KMeansOptions& options = {});

/// Within-cluster sum of squared distances to the cluster means.
double partition_sse(const Tensor<double>& points, const std::vector<std::uint32_t>& labels);

}  // namespace colarec

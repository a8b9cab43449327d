#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "colarec/dataset.hpp"

namespace colarec {

struct SyntheticConfig {
    std::size_t n_users = 50;
    std::size_t n_items = 40;
    std::size_t n_clusters = 4;
    double p_in = 0.5;
    double p_out = 0.02;
    /// Nodes below this degree get extra in-cluster edges.
    std::size_t min_degree = 5;
    std::uint64_t seed = 0;
};

/// Planted block structure: users and items split into contiguous clusters,
/// edges drawn with p_in inside a cluster and p_out across. Item titles use a
/// word tied to the cluster plus one item-specific word.
struct SyntheticData {
    std::vector<RawRecord> records;
    ContentMap content;
    std::vector<std::size_t> user_cluster;
    std::vector<std::size_t> item_cluster;
};

SyntheticData make_synthetic(const SyntheticConfig& config);

/// interactions.tsv and content.tsv in the ingest formats.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace colarec

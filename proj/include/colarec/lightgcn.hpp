#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "colarec/dataset.hpp"
#include "colarec/tensor.hpp"

namespace colarec {

/// Symmetrically normalized user-item adjacency in CSR form. Users occupy
/// nodes [0, n_users), items follow.
struct BipartiteGraph {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> weight;
    std::vector<std::size_t> degree;

    std::size_t n_nodes() const { return n_users + n_items; }

    static BipartiteGraph from_edges(std::size_t n_users, std::size_t n_items,
                                     std::span<const Edge> edges);
    /// Train-split edges only.
    static BipartiteGraph from_dataset(const InteractionDataset& dataset);
};

struct CfEmbeddings {
    Tensor<double> users;
    Tensor<double> items;

    std::size_t dim() const { return users.cols(); }

    void save(const std::filesystem::path& path) const;
    static CfEmbeddings load(const std::filesystem::path& path);
};

/// Mean of A^k * E0 for k = 0..n_layers over all n_nodes rows of `e0`.
Tensor<double> propagate(const BipartiteGraph& graph, const Tensor<double>& e0, std::size_t n_layers);

struct CfConfig {
    std::size_t dim = 512;
    std::size_t layers = 3;
    std::size_t epochs = 200;
    std::size_t batch_size = 1024;
    double lr = 1e-3;
    double reg = 1e-4;
    double init_std = 0.01;
    std::uint64_t seed = 0;
};

struct CfTrainResult {
    /// Propagated (layer-mean) representations; these seed GID construction.
    CfEmbeddings embeddings;
    /// Trained layer-0 table.
    CfEmbeddings base;
    std::vector<double> epoch_loss;
};

/// Mini-batch BPR over propagated embeddings with uniform negatives.
CfTrainResult pretrain_cf(const InteractionDataset& dataset, const CfConfig& config,
                          const std::function<void(std::size_t, double)>& on_epoch = {});

/// Gaussian initial table for all n_users + n_items nodes.
Tensor<double> init_cf_table(std::size_t n_nodes, std::size_t dim, double std, std::uint64_t seed);

}  // namespace colarec

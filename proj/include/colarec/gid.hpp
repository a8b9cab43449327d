#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "colarec/dataset.hpp"
#include "colarec/kmeans.hpp"
#include "colarec/tensor.hpp"

namespace colarec {

enum class GidStrategy { collaborative, content, random, iad };

std::string_view to_string(GidStrategy s);
GidStrategy parse_gid_strategy(std::string_view text);

/// Per-item token sequences of fixed length l over an alphabet of K tokens.
class GidAssignment {
public:
    GidAssignment() = default;
    GidAssignment(GidStrategy strategy, std::size_t k, std::size_t length, std::uint64_t seed,
                  std::vector<std::uint32_t> tokens);

    GidStrategy strategy() const { return strategy_; }
    std::size_t k() const { return k_; }
    std::size_t length() const { return length_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t n_items() const { return length_ == 0 ? 0 : tokens_.size() / length_; }

    std::span<const std::uint32_t> gid(std::size_t item) const {
        return std::span<const std::uint32_t>(tokens_).subspan(item * length_, length_);
    }

    bool is_bijective() const;
    /// Largest number of items that share one length-`depth` prefix.
    std::size_t max_prefix_load(std::size_t depth) const;
    /// For t in [1, l-1] every depth-t node holds at most K^(l-t) items.
    bool satisfies_capacity() const;

    /// `# strategy=... K=... l=... seed=... n_items=...` then `item<TAB>z1,...,zl`.
    void save(const std::filesystem::path& path) const;
    static GidAssignment load(const std::filesystem::path& path);

private:
    GidStrategy strategy_ = GidStrategy::random;
    std::size_t k_ = 0;
    std::size_t length_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<std::uint32_t> tokens_;
};

/// K^l, or nullopt when it does not fit in 64 bits.
std::optional<std::uint64_t> gid_capacity(std::size_t k, std::size_t length);

/// Hierarchical capacity-constrained k-means over item vectors (one row per
/// item). Levels 1..l-1 cluster, the last level hands out distinct random
/// tokens inside each depth-(l-1) node.
GidAssignment build_hierarchical(const Tensor<double>& vectors, std::size_t k, std::size_t length,
                                 std::uint64_t seed, GidStrategy tag,
                                 const KMeansOptions& options = {});

GidAssignment build_collaborative(const Tensor<double>& item_embeddings, std::size_t k,
                                  std::size_t length, std::uint64_t seed,
                                  const KMeansOptions& options = {});

GidAssignment build_content(const Tensor<double>& content_vectors, std::size_t k, std::size_t length,
                            std::uint64_t seed, const KMeansOptions& options = {});

/// Distinct uniformly sampled token sequences.
GidAssignment build_random(std::size_t n_items, std::size_t k, std::size_t length, std::uint64_t seed);

/// One token per item: l = 1, K = n_items, gid(i) = [i].
GidAssignment build_iad(std::size_t n_items);

inline constexpr std::size_t kContentHashDim = 256;

/// L2-normalized term-frequency vector of each item's attribute values,
/// hashed into kContentHashDim buckets.
Tensor<double> content_vectors(const InteractionDataset& dataset);
Tensor<double> content_vectors(std::span<const ItemContent> contents);

/// K-ary prefix tree over assigned GIDs; each leaf is one item.
class GidTrie {
public:
    struct Node {
        /// (token, child node) pairs sorted by token.
        std::vector<std::pair<std::uint32_t, std::uint32_t>> children;
        std::int64_t item = -1;
    };

    static GidTrie build(const GidAssignment& assignment);

    std::size_t depth() const { return depth_; }
    std::size_t k() const { return k_; }
    std::size_t leaf_count() const { return leaf_count_; }
    std::size_t node_count() const { return nodes_.size(); }
    const Node& node(std::uint32_t id) const { return nodes_[id]; }
    static constexpr std::uint32_t root() { return 0; }

    std::optional<std::uint32_t> child(std::uint32_t node, std::uint32_t token) const;
    /// Item at the end of a full-length path, if any.
    std::optional<std::size_t> lookup(std::span<const std::uint32_t> gid) const;

    struct Leaf {
        std::vector<std::uint32_t> gid;
        std::size_t item;
    };
    /// Depth-first, children in ascending token order.
    std::vector<Leaf> leaves() const;

private:
    std::vector<Node> nodes_;
    std::size_t depth_ = 0;
    std::size_t k_ = 0;
    std::size_t leaf_count_ = 0;
};

}  // namespace colarec

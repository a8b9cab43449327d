#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "colarec/beam.hpp"
#include "colarec/dataset.hpp"

namespace colarec {

/// |top-n ∩ truth| / |truth|; nullopt for an empty truth set.
std::optional<double> recall_at_n(std::span<const std::size_t> ranked, std::span<const std::uint32_t> truth,
                                  std::size_t n);

/// Binary-gain NDCG with a 1/log2(p+1) discount.
std::optional<double> ndcg_at_n(std::span<const std::size_t> ranked, std::span<const std::uint32_t> truth,
                                std::size_t n);

std::vector<std::size_t> item_order(const RankedList& list);

struct MetricRow {
    std::string segment;  // overall, head or tail
    std::size_t n = 0;
    double recall = 0.0;
    double ndcg = 0.0;
    std::size_t users = 0;
};

struct EvalReport {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<MetricRow> rows;

    const MetricRow& row(const std::string& segment, std::size_t n) const;
    std::string to_tsv() const;
    void save(const std::filesystem::path& path) const;
};

/// Unfiltered ranking for one user; `seed` drives input sampling.
using UserRanker = std::function<RankedList(std::size_t user, std::uint64_t seed)>;

struct EvalOptions {
    std::vector<std::size_t> cutoffs{5, 10, 20};
    std::size_t repeats = 3;
    std::uint64_t seed = 0;
    Split truth = Split::test;
    bool filter_train = true;
    bool filter_val = true;
    std::size_t threads = 0;
};

/// Averages per-user metrics over repeats, then over users of each segment.
/// Users with an empty truth set are skipped.
EvalReport evaluate(const InteractionDataset& dataset, const UserSegmentation& segments, const UserRanker& ranker,
                    const EvalOptions& options);

}  // namespace colarec

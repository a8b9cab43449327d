#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "colarec/dataset.hpp"
#include "colarec/gid.hpp"
#include "colarec/model.hpp"

namespace colarec {

struct Ranked {
    std::size_t item = 0;
    double score = 0.0;  // log p(u, i)

    bool operator==(const Ranked&) const = default;
};

/// Higher score first, then ascending item index.
using RankedList = std::vector<Ranked>;

/// Log-probabilities over the K tokens of the next position given a prefix.
using StepScorer = std::function<std::vector<double>(std::span<const std::uint32_t> prefix)>;

/// Keeps the B best prefixes per step, expanding only populated trie children.
/// Returns the top `topn` completed items.
RankedList constrained_beam_search(const GidTrie& trie, const StepScorer& scorer, std::size_t beam,
                                   std::size_t topn);

inline constexpr std::size_t kExhaustiveLimit = 100000;

/// Exact scores for every leaf; refuses tries above kExhaustiveLimit leaves.
RankedList exhaustive_rank(const GidTrie& trie, const StepScorer& scorer);

/// Drops items flagged in `seen` (indexed by item), keeping order.
RankedList filter_seen(const RankedList& list, std::span<const std::uint8_t> seen);

/// Items in the user's train and val splits.
std::vector<std::uint8_t> seen_items(const InteractionDataset& dataset, std::size_t user, bool train = true,
                                     bool val = true);

template <class T>
StepScorer model_scorer(Seq2SeqModel<T>& model, const typename Seq2SeqModel<T>::EncoderState& state) {
    return [&model, &state](std::span<const std::uint32_t> prefix) {
        const auto lp = model.step_log_probs(state, prefix);
        return std::vector<double>(lp.begin(), lp.end());
    };
}

}  // namespace colarec

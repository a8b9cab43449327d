#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "colarec/adamw.hpp"
#include "colarec/beam.hpp"
#include "colarec/dataset.hpp"
#include "colarec/gid.hpp"
#include "colarec/metrics.hpp"
#include "colarec/model.hpp"
#include "colarec/vocab.hpp"

namespace colarec {

struct LossToggles {
    bool rec = true;
    bool index = true;
    bool bpr = true;
    bool contrastive = true;
};

struct LossSettings {
    double alpha = 0.02;
    LossToggles toggles;
};

/// Level-1 buckets of a GID assignment, used to draw contrastive pairs.
class GidNeighborhood {
public:
    explicit GidNeighborhood(const GidAssignment& gids);

    /// Items sharing the first token with `item`, excluding `item`.
    std::vector<std::size_t> positives(std::size_t item) const;
    /// Items that differ from `item` at every position.
    std::vector<std::size_t> negatives(std::size_t item) const;
    bool no_overlap(std::size_t a, std::size_t b) const;

    std::optional<std::size_t> sample_positive(std::size_t item, Rng& rng) const;
    std::optional<std::size_t> sample_negative(std::size_t item, Rng& rng) const;

private:
    const GidAssignment* gids_;
    std::vector<std::vector<std::size_t>> buckets_;
};

struct ContrastivePair {
    std::size_t positive = 0;
    std::size_t negative = 0;
};

/// Uniform i+ from the level-1 bucket and i- with no token in common at any
/// position. `shared_negative` (the BPR negative) is reused when it is
/// eligible. nullopt when either pool is empty.
std::optional<ContrastivePair> sample_contrastive_pair(std::size_t item, const GidNeighborhood& neighborhood,
                                                       Rng& rng,
                                                       std::optional<std::size_t> shared_negative = std::nullopt);

/// Uniform item without a train edge to `user`.
std::size_t sample_negative_item(const InteractionDataset& dataset, std::size_t user, Rng& rng);

/// Token sequences for one (user, item) train interaction.
struct TrainingExample {
    std::size_t user = 0;
    std::size_t item = 0;
    std::vector<std::uint32_t> gid;
    TokenSeq user_input;
    TokenSeq item_input;
    std::size_t negative = 0;
    TokenSeq negative_input;
    bool has_contrastive = false;
    std::size_t positive = 0;
    std::size_t contrastive_negative = 0;
    TokenSeq positive_input;
    TokenSeq contrastive_negative_input;
};

class ExampleSampler {
public:
    ExampleSampler(const InteractionDataset& dataset, const Vocabulary& vocab, const GidAssignment& gids,
                   InputConfig input, LossToggles toggles);

    /// Sequences needed by disabled terms are left empty.
    TrainingExample make(std::size_t user, std::size_t item, Rng& rng) const;

    const GidNeighborhood& neighborhood() const { return neighborhood_; }

private:
    const InteractionDataset& dataset_;
    const Vocabulary& vocab_;
    const GidAssignment& gids_;
    GidNeighborhood neighborhood_;
    InputConfig input_;
    LossToggles toggles_;
};

struct LossBreakdown {
    double rec = 0.0;
    double index = 0.0;
    double bpr = 0.0;
    double contrastive = 0.0;
    double total = 0.0;
    std::size_t contrastive_skipped = 0;
};

template <class T>
struct JointLoss {
    Var total;
    LossBreakdown parts;
};

/// L_rec + L_index + L_bpr + alpha L_c, each a mean over the batch. Disabled
/// terms are not built; skipped contrastive examples add 0 to their mean.
template <class T>
JointLoss<T> joint_loss(Seq2SeqModel<T>& model, Graph<T>& g, std::span<const TrainingExample> batch,
                        const LossSettings& settings);

struct TrainConfig {
    LossSettings loss;
    InputConfig input;
    AdamWConfig optimizer;
    std::size_t batch_size = 128;
    std::size_t epochs = 200;
    std::size_t patience = 15;
    bool validate = true;
    std::size_t beam = 30;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    LossBreakdown loss;
    double val_recall = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    std::vector<EpochRecord> trace;
    std::size_t best_epoch = 0;
    double best_val_recall = std::numeric_limits<double>::quiet_NaN();
    bool early_stopped = false;
};

/// Return false to stop after this epoch.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Shuffled mini-batches of all train interactions with AdamW. With
/// validation on, the best val Recall@5 parameters are restored at the end.
/// A non-finite loss restores the parameters of the last completed epoch and
/// throws ErrorKind::numeric.
template <class T>
TrainResult train_model(Seq2SeqModel<T>& model, const InteractionDataset& dataset, const Vocabulary& vocab,
                        const GidAssignment& gids, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Top-`topn` items for a user by constrained beam search (unfiltered).
template <class T>
RankedList rank_user(Seq2SeqModel<T>& model, const GidTrie& trie, const InteractionDataset& dataset,
                     const Vocabulary& vocab, const InputConfig& input, std::size_t user, std::uint64_t seed,
                     std::size_t beam, std::size_t topn);

template <class T>
UserRanker model_ranker(Seq2SeqModel<T>& model, const GidTrie& trie, const InteractionDataset& dataset,
                        const Vocabulary& vocab, const InputConfig& input, std::size_t beam) {
    return [&model, &trie, &dataset, &vocab, input, beam](std::size_t user, std::uint64_t seed) {
        return rank_user(model, trie, dataset, vocab, input, user, seed, beam, beam);
    };
}

}  // namespace colarec

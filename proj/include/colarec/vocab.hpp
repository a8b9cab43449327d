#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "colarec/dataset.hpp"
#include "colarec/rng.hpp"

namespace colarec {

/// Input-side token ids. Layout: specials, content words (sorted), one
/// atomic token per item (iad), one per user (uad). GID tokens live in the
/// decoder's own per-position spaces and never appear here.
class Vocabulary {
public:
    static constexpr std::uint32_t pad = 0;
    static constexpr std::uint32_t unk = 1;
    static constexpr std::uint32_t task_user = 2;
    static constexpr std::uint32_t task_item = 3;
    static constexpr std::uint32_t colon = 4;
    static constexpr std::uint32_t n_special = 5;

    Vocabulary() = default;
    Vocabulary(std::vector<std::string> words, std::size_t n_items, std::size_t n_users);

    /// Words come from the content of items with at least one train edge.
    static Vocabulary build(const InteractionDataset& dataset);

    std::uint32_t word(const std::string& w) const;
    std::uint32_t iad(std::size_t item) const { return iad_base() + static_cast<std::uint32_t>(item); }
    std::uint32_t uad(std::size_t user) const { return uad_base() + static_cast<std::uint32_t>(user); }

    std::uint32_t word_base() const { return n_special; }
    std::uint32_t iad_base() const { return n_special + static_cast<std::uint32_t>(words_.size()); }
    std::uint32_t uad_base() const { return iad_base() + static_cast<std::uint32_t>(n_items_); }
    std::size_t size() const { return uad_base() + n_users_; }

    std::size_t n_words() const { return words_.size(); }
    std::size_t n_items() const { return n_items_; }
    std::size_t n_users() const { return n_users_; }
    const std::vector<std::string>& words() const { return words_; }

    /// Human-readable form of a token id, for debugging and tests.
    std::string describe(std::uint32_t id) const;

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::size_t n_items_ = 0;
    std::size_t n_users_ = 0;
};

struct InputConfig {
    std::size_t items_per_user = 20;
    std::size_t max_len = 256;
    /// false drops attribute text, keeping only iad tokens in item tuples
    bool use_content = true;
};

using TokenSeq = std::vector<std::uint32_t>;

/// [iad_i, key words, ':', value words, ...] for one item.
TokenSeq item_tuple(std::size_t item, const InteractionDataset& dataset, const Vocabulary& vocab,
                    bool use_content);

/// [task_u, tuples of up to items_per_user train items in sample order].
/// `exclude` (the training target) is never sampled. Whole tuples are
/// dropped from the tail until the sequence fits max_len.
TokenSeq build_user_input(std::size_t user, const InteractionDataset& dataset, const Vocabulary& vocab,
                          const InputConfig& config, Rng& rng,
                          std::optional<std::size_t> exclude = std::nullopt);

/// [task_i, item tuple, uad of one sampled train user]. Content is clipped
/// when needed so the uad token always fits.
TokenSeq build_item_input(std::size_t item, const InteractionDataset& dataset, const Vocabulary& vocab,
                          const InputConfig& config, Rng& rng);

}  // namespace colarec

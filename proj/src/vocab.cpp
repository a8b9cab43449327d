#include "colarec/vocab.hpp"

#include <algorithm>
#include <set>

#include "colarec/text.hpp"

namespace colarec {

Vocabulary::Vocabulary(std::vector<std::string> words, std::size_t n_items, std::size_t n_users)
    : words_(std::move(words)), n_items_(n_items), n_users_(n_users) {
    for (std::size_t k = 0; k < words_.size(); ++k) {
        ids_.emplace(words_[k], n_special + static_cast<std::uint32_t>(k));
    }
}

Vocabulary Vocabulary::build(const InteractionDataset& dataset) {
    std::set<std::string> words;
    for (std::size_t i = 0; i < dataset.n_items(); ++i) {
        if (dataset.item_users(i, Split::train).empty()) continue;
        for (const auto& [key, value] : dataset.content(i)) {
            for (auto& w : tokenize(key)) words.insert(std::move(w));
            for (auto& w : tokenize(value)) words.insert(std::move(w));
        }
    }
    return Vocabulary({words.begin(), words.end()}, dataset.n_items(), dataset.n_users());
}

std::uint32_t Vocabulary::word(const std::string& w) const {
    auto it = ids_.find(w);
    return it == ids_.end() ? unk : it->second;
}

std::string Vocabulary::describe(std::uint32_t id) const {
    switch (id) {
        case pad: return "<pad>";
        case unk: return "<unk>";
        case task_user: return "<task_u>";
        case task_item: return "<task_i>";
        case colon: return ":";
        default: break;
    }
    if (id < iad_base()) return words_[id - n_special];
    if (id < uad_base()) return "iad_" + std::to_string(id - iad_base());
    return "uad_" + std::to_string(id - uad_base());
}

TokenSeq item_tuple(std::size_t item, const InteractionDataset& dataset, const Vocabulary& vocab,
                    bool use_content) {
    TokenSeq out{vocab.iad(item)};
    if (!use_content) return out;
    for (const auto& [key, value] : dataset.content(item)) {
        for (const auto& w : tokenize(key)) out.push_back(vocab.word(w));
        out.push_back(Vocabulary::colon);
        for (const auto& w : tokenize(value)) out.push_back(vocab.word(w));
    }
    return out;
}

TokenSeq build_user_input(std::size_t user, const InteractionDataset& dataset, const Vocabulary& vocab,
                          const InputConfig& config, Rng& rng, std::optional<std::size_t> exclude) {
    std::vector<std::uint32_t> pool;
    for (auto item : dataset.user_items(user, Split::train)) {
        if (!exclude || item != *exclude) pool.push_back(item);
    }
    rng.shuffle(pool);
    if (pool.size() > config.items_per_user) pool.resize(config.items_per_user);

    TokenSeq out{Vocabulary::task_user};
    for (auto item : pool) {
        TokenSeq tuple = item_tuple(item, dataset, vocab, config.use_content);
        if (out.size() + tuple.size() > config.max_len) {
            // the first tuple is clipped rather than dropped so the user is never empty
            if (out.size() == 1) {
                tuple.resize(config.max_len - 1);
                out.insert(out.end(), tuple.begin(), tuple.end());
            }
            break;
        }
        out.insert(out.end(), tuple.begin(), tuple.end());
    }
    return out;
}

TokenSeq build_item_input(std::size_t item, const InteractionDataset& dataset, const Vocabulary& vocab,
                          const InputConfig& config, Rng& rng) {
    TokenSeq out{Vocabulary::task_item};
    TokenSeq tuple = item_tuple(item, dataset, vocab, config.use_content);
    const auto& users = dataset.item_users(item, Split::train);
    const std::size_t reserve = users.empty() ? 1 : 2;
    if (tuple.size() + reserve > config.max_len) tuple.resize(config.max_len - reserve);
    out.insert(out.end(), tuple.begin(), tuple.end());
    if (!users.empty()) out.push_back(vocab.uad(users[rng.uniform_index(users.size())]));
    return out;
}

}  // namespace colarec

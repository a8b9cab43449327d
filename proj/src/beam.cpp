#include "colarec/beam.hpp"

#include <algorithm>

#include "colarec/error.hpp"

namespace colarec {

namespace {

struct Hyp {
    std::vector<std::uint32_t> prefix;
    std::uint32_t node;
    double score;
};

bool ranked_before(const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
}

std::vector<double> score_step(const StepScorer& scorer, std::span<const std::uint32_t> prefix, std::size_t k) {
    auto lp = scorer(prefix);
    if (lp.size() != k) {
        throw Error(ErrorKind::shape, "scorer returned " + std::to_string(lp.size()) + " scores, expected K = " +
                                          std::to_string(k));
    }
    return lp;
}

}  // namespace

RankedList constrained_beam_search(const GidTrie& trie, const StepScorer& scorer, std::size_t beam,
                                   std::size_t topn) {
    if (beam < topn) {
        throw Error(ErrorKind::invalid_argument,
                    "beam width " + std::to_string(beam) + " is smaller than top-n " + std::to_string(topn));
    }
    if (beam == 0) throw Error(ErrorKind::invalid_argument, "beam width must be >= 1");
    if (trie.leaf_count() == 0) throw Error(ErrorKind::invalid_argument, "GID trie is empty");

    std::vector<Hyp> hyps{{{}, GidTrie::root(), 0.0}};
    for (std::size_t t = 0; t < trie.depth(); ++t) {
        std::vector<Hyp> next;
        for (const auto& h : hyps) {
            const auto lp = score_step(scorer, h.prefix, trie.k());
            for (const auto& [token, child] : trie.node(h.node).children) {
                Hyp e{h.prefix, child, h.score + lp[token]};
                e.prefix.push_back(token);
                next.push_back(std::move(e));
            }
        }
        // ties keep lexicographic prefix order
        std::stable_sort(next.begin(), next.end(), [](const Hyp& a, const Hyp& b) { return a.score > b.score; });
        if (next.size() > beam) next.resize(beam);
        hyps = std::move(next);
    }

    RankedList out;
    out.reserve(hyps.size());
    for (const auto& h : hyps) {
        out.push_back({static_cast<std::size_t>(trie.node(h.node).item), h.score});
    }
    std::sort(out.begin(), out.end(), ranked_before);
    if (out.size() > topn) out.resize(topn);
    return out;
}

RankedList exhaustive_rank(const GidTrie& trie, const StepScorer& scorer) {
    if (trie.leaf_count() > kExhaustiveLimit) {
        throw Error(ErrorKind::invalid_argument, "exhaustive ranking refused for " +
                                                     std::to_string(trie.leaf_count()) + " items (limit " +
                                                     std::to_string(kExhaustiveLimit) + ")");
    }
    RankedList out;
    std::vector<std::uint32_t> prefix;
    const auto visit = [&](auto& self, std::uint32_t node, double score) -> void {
        const auto& n = trie.node(node);
        if (n.children.empty()) {
            if (n.item >= 0) out.push_back({static_cast<std::size_t>(n.item), score});
            return;
        }
        const auto lp = score_step(scorer, prefix, trie.k());
        for (const auto& [token, child] : n.children) {
            prefix.push_back(token);
            self(self, child, score + lp[token]);
            prefix.pop_back();
        }
    };
    visit(visit, GidTrie::root(), 0.0);
    std::sort(out.begin(), out.end(), ranked_before);
    return out;
}

RankedList filter_seen(const RankedList& list, std::span<const std::uint8_t> seen) {
    RankedList out;
    for (const auto& r : list) {
        if (r.item < seen.size() && seen[r.item]) continue;
        out.push_back(r);
    }
    return out;
}

std::vector<std::uint8_t> seen_items(const InteractionDataset& dataset, std::size_t user, bool train, bool val) {
    std::vector<std::uint8_t> seen(dataset.n_items(), 0);
    if (train) {
        for (auto i : dataset.user_items(user, Split::train)) seen[i] = 1;
    }
    if (val) {
        for (auto i : dataset.user_items(user, Split::val)) seen[i] = 1;
    }
    return seen;
}

}  // namespace colarec

#include "colarec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "colarec/error.hpp"
#include "colarec/io.hpp"
#include "colarec/parallel.hpp"
#include "colarec/rng.hpp"

namespace colarec {

std::optional<double> recall_at_n(std::span<const std::size_t> ranked, std::span<const std::uint32_t> truth,
                                  std::size_t n) {
    if (truth.empty()) return std::nullopt;
    const std::unordered_set<std::size_t> want(truth.begin(), truth.end());
    std::size_t hits = 0;
    for (std::size_t p = 0; p < std::min(n, ranked.size()); ++p) hits += want.count(ranked[p]);
    return static_cast<double>(hits) / static_cast<double>(want.size());
}

std::optional<double> ndcg_at_n(std::span<const std::size_t> ranked, std::span<const std::uint32_t> truth,
                                std::size_t n) {
    if (truth.empty()) return std::nullopt;
    const std::unordered_set<std::size_t> want(truth.begin(), truth.end());
    double dcg = 0.0;
    for (std::size_t p = 0; p < std::min(n, ranked.size()); ++p) {
        if (want.count(ranked[p])) dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
    double idcg = 0.0;
    for (std::size_t p = 0; p < std::min(n, want.size()); ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    return dcg / idcg;
}

std::vector<std::size_t> item_order(const RankedList& list) {
    std::vector<std::size_t> out;
    out.reserve(list.size());
    for (const auto& r : list) out.push_back(r.item);
    return out;
}

const MetricRow& EvalReport::row(const std::string& segment, std::size_t n) const {
    for (const auto& r : rows) {
        if (r.segment == segment && r.n == n) return r;
    }
    throw Error(ErrorKind::invalid_argument, "report has no row " + segment + "@" + std::to_string(n));
}

std::string EvalReport::to_tsv() const {
    std::ostringstream out;
    for (const auto& [k, v] : metadata) out << "# " << k << "=" << v << "\n";
    out << "segment\tn\trecall\tndcg\tusers\n";
    for (const auto& r : rows) {
        out << r.segment << "\t" << r.n << "\t" << io::format_fixed(r.recall, 6) << "\t"
            << io::format_fixed(r.ndcg, 6) << "\t" << r.users << "\n";
    }
    return out.str();
}

void EvalReport::save(const std::filesystem::path& path) const { io::write_text_atomic(path, to_tsv()); }

EvalReport evaluate(const InteractionDataset& dataset, const UserSegmentation& segments, const UserRanker& ranker,
                    const EvalOptions& options) {
    if (options.repeats == 0) throw Error(ErrorKind::config, "repeats must be >= 1");
    const std::size_t n_users = dataset.n_users();
    const std::size_t nc = options.cutoffs.size();
    // per user: recall and ndcg for each cutoff, averaged over repeats
    std::vector<std::vector<double>> per_user(n_users);
    std::vector<std::uint8_t> evaluated(n_users, 0);

    parallel_for(
        n_users,
        [&](std::size_t u) {
            const auto& truth = dataset.user_items(u, options.truth);
            if (truth.empty()) return;
            const auto seen = seen_items(dataset, u, options.filter_train, options.filter_val);
            std::vector<double> acc(2 * nc, 0.0);
            for (std::size_t r = 0; r < options.repeats; ++r) {
                const auto ranked = item_order(filter_seen(ranker(u, mix_seed(options.seed, r)), seen));
                for (std::size_t c = 0; c < nc; ++c) {
                    acc[2 * c] += *recall_at_n(ranked, truth, options.cutoffs[c]);
                    acc[2 * c + 1] += *ndcg_at_n(ranked, truth, options.cutoffs[c]);
                }
            }
            for (auto& v : acc) v /= static_cast<double>(options.repeats);
            per_user[u] = std::move(acc);
            evaluated[u] = 1;
        },
        options.threads);

    std::string filtered = "none";
    if (options.filter_train && options.filter_val) filtered = "train+val";
    else if (options.filter_train) filtered = "train";
    else if (options.filter_val) filtered = "val";

    EvalReport report;
    std::size_t n_eval = 0;
    for (auto e : evaluated) n_eval += e;
    report.metadata = {{"seed", std::to_string(options.seed)},
                       {"repeats", std::to_string(options.repeats)},
                       {"truth_split", options.truth == Split::test ? "test"
                                       : options.truth == Split::val ? "val"
                                                                     : "train"},
                       {"filtered", filtered},
                       {"empty_truth_users", "skipped"},
                       {"evaluated_users", std::to_string(n_eval)}};

    const auto add_rows = [&](const std::string& name, const auto& include) {
        for (std::size_t c = 0; c < nc; ++c) {
            MetricRow row{name, options.cutoffs[c], 0.0, 0.0, 0};
            for (std::size_t u = 0; u < n_users; ++u) {
                if (!evaluated[u] || !include(u)) continue;
                row.recall += per_user[u][2 * c];
                row.ndcg += per_user[u][2 * c + 1];
                ++row.users;
            }
            if (row.users > 0) {
                row.recall /= static_cast<double>(row.users);
                row.ndcg /= static_cast<double>(row.users);
            }
            report.rows.push_back(row);
        }
    };
    add_rows("overall", [](std::size_t) { return true; });
    add_rows("head", [&](std::size_t u) { return static_cast<bool>(segments.is_head[u]); });
    add_rows("tail", [&](std::size_t u) { return !segments.is_head[u]; });
    return report;
}

}  // namespace colarec

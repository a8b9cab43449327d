#include "colarec/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <sstream>

#include "colarec/error.hpp"
#include "colarec/io.hpp"
#include "colarec/rng.hpp"

namespace colarec {

namespace {

constexpr std::array<const char*, 16> kClusterWords{"amber",  "birch", "cobalt", "dune",   "ember", "fjord",
                                                    "garnet", "heath", "indigo", "jasper", "kelp",  "lichen",
                                                    "marble", "nectar", "onyx",  "pine"};

std::string padded(char prefix, std::size_t k, std::size_t n) {
    const int width = static_cast<int>(std::to_string(n == 0 ? 0 : n - 1).size());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, k);
    return buf;
}

std::string cluster_word(std::size_t c) {
    std::string w = kClusterWords[c % kClusterWords.size()];
    if (c >= kClusterWords.size()) w += std::to_string(c / kClusterWords.size());
    return w;
}

}  // namespace

SyntheticData make_synthetic(const SyntheticConfig& config) {
    const std::size_t nu = config.n_users, ni = config.n_items, nc = config.n_clusters;
    if (nc == 0 || ni < nc || nu < nc) {
        throw Error(ErrorKind::config, "synthetic data needs n_users >= n_clusters and n_items >= n_clusters >= 1");
    }
    if (config.p_in < 0.0 || config.p_in > 1.0 || config.p_out < 0.0 || config.p_out > 1.0) {
        throw Error(ErrorKind::config, "edge probabilities must lie in [0, 1]");
    }
    Rng rng(mix_seed(config.seed, 0x5A17));
    SyntheticData data;
    for (std::size_t u = 0; u < nu; ++u) data.user_cluster.push_back(u * nc / nu);
    for (std::size_t i = 0; i < ni; ++i) data.item_cluster.push_back(i * nc / ni);

    std::vector<std::set<std::size_t>> adj(nu);
    std::vector<std::size_t> item_deg(ni, 0);
    for (std::size_t u = 0; u < nu; ++u) {
        for (std::size_t i = 0; i < ni; ++i) {
            const double p = data.user_cluster[u] == data.item_cluster[i] ? config.p_in : config.p_out;
            if (rng.bernoulli(p)) {
                adj[u].insert(i);
                ++item_deg[i];
            }
        }
    }
    // top up low-degree users, then items, inside their own cluster first
    const auto top_up = [&](std::size_t node, bool is_user) {
        const std::size_t cluster = is_user ? data.user_cluster[node] : data.item_cluster[node];
        const std::size_t other_n = is_user ? ni : nu;
        const auto& other_cluster = is_user ? data.item_cluster : data.user_cluster;
        std::vector<std::size_t> inside, outside;
        for (std::size_t j = 0; j < other_n; ++j) (other_cluster[j] == cluster ? inside : outside).push_back(j);
        rng.shuffle(inside);
        rng.shuffle(outside);
        inside.insert(inside.end(), outside.begin(), outside.end());
        for (auto j : inside) {
            const std::size_t deg = is_user ? adj[node].size() : item_deg[node];
            if (deg >= config.min_degree) break;
            const std::size_t u = is_user ? node : j;
            const std::size_t i = is_user ? j : node;
            if (adj[u].insert(i).second) ++item_deg[i];
        }
    };
    for (std::size_t u = 0; u < nu; ++u) top_up(u, true);
    for (std::size_t i = 0; i < ni; ++i) top_up(i, false);

    for (std::size_t u = 0; u < nu; ++u) {
        for (auto i : adj[u]) data.records.push_back({padded('u', u, nu), padded('i', i, ni)});
    }
    for (std::size_t i = 0; i < ni; ++i) {
        const std::string title = cluster_word(data.item_cluster[i]) + " " + padded('w', i, ni);
        data.content.emplace(padded('i', i, ni), ItemContent{{"title", title}});
    }
    return data;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream records;
    for (const auto& r : data.records) records << r.user_key << '\t' << r.item_key << '\n';
    io::write_text_atomic(dir / "interactions.tsv", records.str());
    std::ostringstream content;
    for (const auto& [key, pairs] : data.content) {
        content << key << '\t';
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (k > 0) content << '\x1f';
            content << pairs[k].first << '=' << pairs[k].second;
        }
        content << '\n';
    }
    io::write_text_atomic(dir / "content.tsv", content.str());
}

}  // namespace colarec

#include "colarec/gid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "colarec/error.hpp"
#include "colarec/io.hpp"
#include "colarec/rng.hpp"
#include "colarec/text.hpp"

namespace colarec {

namespace fs = std::filesystem;

std::string_view to_string(GidStrategy s) {
    switch (s) {
        case GidStrategy::collaborative: return "collaborative";
        case GidStrategy::content: return "content";
        case GidStrategy::random: return "random";
        case GidStrategy::iad: return "iad";
    }
    return "unknown";
}

GidStrategy parse_gid_strategy(std::string_view text) {
    for (auto s : {GidStrategy::collaborative, GidStrategy::content, GidStrategy::random, GidStrategy::iad}) {
        if (text == to_string(s)) return s;
    }
    throw Error(ErrorKind::config, "unknown GID strategy '" + std::string(text) +
                                       "' (expected collaborative, content, random or iad)");
}

GidAssignment::GidAssignment(GidStrategy strategy, std::size_t k, std::size_t length, std::uint64_t seed,
                             std::vector<std::uint32_t> tokens)
    : strategy_(strategy), k_(k), length_(length), seed_(seed), tokens_(std::move(tokens)) {
    if (length_ == 0 || tokens_.size() % length_ != 0) {
        throw Error(ErrorKind::invalid_argument, "GID token count is not a multiple of the length");
    }
    for (auto t : tokens_) {
        if (t >= k_) throw Error(ErrorKind::invalid_argument, "GID token " + std::to_string(t) + " >= K");
    }
}

bool GidAssignment::is_bijective() const {
    std::set<std::vector<std::uint32_t>> seen;
    for (std::size_t i = 0; i < n_items(); ++i) {
        auto g = gid(i);
        if (!seen.emplace(g.begin(), g.end()).second) return false;
    }
    return true;
}

std::size_t GidAssignment::max_prefix_load(std::size_t depth) const {
    std::map<std::vector<std::uint32_t>, std::size_t> load;
    std::size_t best = 0;
    for (std::size_t i = 0; i < n_items(); ++i) {
        auto g = gid(i);
        auto& c = load[std::vector<std::uint32_t>(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(depth))];
        best = std::max(best, ++c);
    }
    return best;
}

bool GidAssignment::satisfies_capacity() const {
    for (std::size_t t = 1; t < length_; ++t) {
        const auto cap = gid_capacity(k_, length_ - t);
        if (cap && max_prefix_load(t) > *cap) return false;
    }
    return true;
}

void GidAssignment::save(const fs::path& path) const {
    io::write_atomic(path, [&](std::ostream& out) {
        out << "# strategy=" << to_string(strategy_) << " K=" << k_ << " l=" << length_ << " seed=" << seed_
            << " n_items=" << n_items() << '\n';
        for (std::size_t i = 0; i < n_items(); ++i) {
            out << i << '\t';
            auto g = gid(i);
            for (std::size_t t = 0; t < g.size(); ++t) out << (t ? "," : "") << g[t];
            out << '\n';
        }
    });
}

GidAssignment GidAssignment::load(const fs::path& path) {
    io::require_file(path, "GID file");
    std::map<std::string, std::string> header;
    std::vector<std::uint32_t> tokens;
    std::size_t items = 0;
    io::for_each_line(path, [&](std::size_t line, std::string_view text) {
        if (text.empty()) return;
        const auto fail = [&](const std::string& what) {
            throw Error(ErrorKind::parse, path.string() + ": line " + std::to_string(line) + ": " + what);
        };
        if (text.front() == '#') {
            for (auto field : io::split(io::trim(text.substr(1)), ' ')) {
                const auto eq = field.find('=');
                if (eq != std::string_view::npos) {
                    header[std::string(field.substr(0, eq))] = std::string(field.substr(eq + 1));
                }
            }
            return;
        }
        const auto fields = io::split(text, '\t');
        if (fields.size() != 2 || fields[0] != std::to_string(items)) fail("expected dense item_index<TAB>tokens");
        for (auto tok : io::split(fields[1], ',')) {
            if (tok.empty() || tok.find_first_not_of("0123456789") != std::string_view::npos) fail("bad token");
            tokens.push_back(static_cast<std::uint32_t>(std::stoul(std::string(tok))));
        }
        ++items;
    });
    for (const char* key : {"strategy", "K", "l", "seed"}) {
        if (!header.contains(key)) {
            throw Error(ErrorKind::parse, path.string() + ": header is missing '" + key + "'");
        }
    }
    const std::size_t length = std::stoul(header["l"]);
    if (length == 0 || tokens.size() != items * length) {
        throw Error(ErrorKind::parse, path.string() + ": every GID must have exactly l tokens");
    }
    return GidAssignment(parse_gid_strategy(header["strategy"]), std::stoul(header["K"]), length,
                         std::stoull(header["seed"]), std::move(tokens));
}

std::optional<std::uint64_t> gid_capacity(std::size_t k, std::size_t length) {
    std::uint64_t cap = 1;
    for (std::size_t t = 0; t < length; ++t) {
        if (k != 0 && cap > std::numeric_limits<std::uint64_t>::max() / k) return std::nullopt;
        cap *= k;
    }
    return cap;
}

namespace {

void require_capacity(std::size_t n_items, std::size_t k, std::size_t length) {
    if (k < 1 || length < 1) throw Error(ErrorKind::invalid_argument, "K and l must be >= 1");
    const auto cap = gid_capacity(k, length);
    if (cap && n_items > *cap) {
        throw Error(ErrorKind::capacity, std::to_string(n_items) + " items need capacity K^l >= " +
                                             std::to_string(n_items) + ", but K=" + std::to_string(k) +
                                             ", l=" + std::to_string(length) + " gives " + std::to_string(*cap));
    }
}

std::uint64_t path_seed(std::uint64_t seed, std::span<const std::uint32_t> prefix) {
    std::uint64_t h = mix_seed(seed, prefix.size());
    for (auto t : prefix) h = mix_seed(h, t);
    return h;
}

}  // namespace

GidAssignment build_hierarchical(const Tensor<double>& vectors, std::size_t k, std::size_t length,
                                 std::uint64_t seed, GidStrategy tag, const KMeansOptions& options) {
    const std::size_t n = vectors.rows();
    require_capacity(n, k, length);
    if (k < 2) throw Error(ErrorKind::invalid_argument, "hierarchical GIDs need K >= 2");
    std::vector<std::uint32_t> tokens(n * length, 0);
    const std::size_t d = vectors.cols();

    std::vector<std::uint32_t> prefix;
    std::function<void(const std::vector<std::size_t>&)> recurse = [&](const std::vector<std::size_t>& items) {
        const std::size_t depth = prefix.size();
        if (depth + 1 == length) {
            std::vector<std::uint32_t> perm(k);
            std::iota(perm.begin(), perm.end(), 0U);
            Rng rng(path_seed(seed, prefix));
            rng.shuffle(perm);
            for (std::size_t j = 0; j < items.size(); ++j) {
                for (std::size_t t = 0; t < depth; ++t) tokens[items[j] * length + t] = prefix[t];
                tokens[items[j] * length + depth] = perm[j];
            }
            return;
        }
        const std::size_t capacity = static_cast<std::size_t>(*gid_capacity(k, length - depth - 1));
        Tensor<double> pts = Tensor<double>::matrix(items.size(), d);
        for (std::size_t j = 0; j < items.size(); ++j) {
            std::copy(vectors.row(items[j]).begin(), vectors.row(items[j]).end(), pts.row(j).begin());
        }
        const KMeansResult km = constrained_kmeans(pts, k, capacity, path_seed(seed, prefix), options);
        std::vector<std::vector<std::size_t>> groups(k);
        for (std::size_t j = 0; j < items.size(); ++j) groups[km.labels[j]].push_back(items[j]);
        for (std::uint32_t c = 0; c < k; ++c) {
            if (groups[c].empty()) continue;
            prefix.push_back(c);
            recurse(groups[c]);
            prefix.pop_back();
        }
    };
    if (n > 0) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        recurse(all);
    }
    return GidAssignment(tag, k, length, seed, std::move(tokens));
}

GidAssignment build_collaborative(const Tensor<double>& item_embeddings, std::size_t k, std::size_t length,
                                  std::uint64_t seed, const KMeansOptions& options) {
    return build_hierarchical(item_embeddings, k, length, seed, GidStrategy::collaborative, options);
}

GidAssignment build_content(const Tensor<double>& vectors, std::size_t k, std::size_t length,
                            std::uint64_t seed, const KMeansOptions& options) {
    return build_hierarchical(vectors, k, length, seed, GidStrategy::content, options);
}

GidAssignment build_random(std::size_t n_items, std::size_t k, std::size_t length, std::uint64_t seed) {
    require_capacity(n_items, k, length);
    const auto cap = gid_capacity(k, length);
    Rng rng(mix_seed(seed, 0x6A1D));
    std::vector<std::uint64_t> codes;
    codes.reserve(n_items);
    if (cap && *cap <= 4 * static_cast<std::uint64_t>(n_items) + 64) {
        std::vector<std::uint64_t> all(*cap);
        std::iota(all.begin(), all.end(), std::uint64_t{0});
        for (std::size_t j = 0; j < n_items; ++j) {
            std::swap(all[j], all[j + rng.uniform_index(all.size() - j)]);
        }
        codes.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_items));
    } else {
        std::unordered_set<std::uint64_t> used;
        while (codes.size() < n_items) {
            std::uint64_t code = 0;
            for (std::size_t t = 0; t < length; ++t) code = code * k + rng.uniform_index(k);
            if (used.insert(code).second) codes.push_back(code);
        }
    }
    std::vector<std::uint32_t> tokens(n_items * length);
    for (std::size_t i = 0; i < n_items; ++i) {
        std::uint64_t code = codes[i];
        for (std::size_t t = length; t-- > 0;) {
            tokens[i * length + t] = static_cast<std::uint32_t>(code % k);
            code /= k;
        }
    }
    return GidAssignment(GidStrategy::random, k, length, seed, std::move(tokens));
}

GidAssignment build_iad(std::size_t n_items) {
    std::vector<std::uint32_t> tokens(n_items);
    std::iota(tokens.begin(), tokens.end(), 0U);
    return GidAssignment(GidStrategy::iad, std::max<std::size_t>(n_items, 1), 1, 0, std::move(tokens));
}

Tensor<double> content_vectors(std::span<const ItemContent> contents) {
    Tensor<double> out = Tensor<double>::matrix(contents.size(), kContentHashDim);
    for (std::size_t i = 0; i < contents.size(); ++i) {
        auto row = out.row(i);
        std::size_t total = 0;
        for (const auto& [key, value] : contents[i]) {
            for (const auto& w : tokenize(value)) {
                row[fnv1a(w) % kContentHashDim] += 1.0;
                ++total;
            }
        }
        if (total == 0) continue;
        double norm = 0.0;
        for (double& v : row) {
            v /= static_cast<double>(total);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : row) v /= norm;
    }
    return out;
}

Tensor<double> content_vectors(const InteractionDataset& dataset) {
    std::vector<ItemContent> contents;
    contents.reserve(dataset.n_items());
    for (std::size_t i = 0; i < dataset.n_items(); ++i) contents.push_back(dataset.content(i));
    return content_vectors(contents);
}

GidTrie GidTrie::build(const GidAssignment& assignment) {
    GidTrie trie;
    trie.depth_ = assignment.length();
    trie.k_ = assignment.k();
    trie.nodes_.emplace_back();
    for (std::size_t i = 0; i < assignment.n_items(); ++i) {
        std::uint32_t node = 0;
        for (std::uint32_t tok : assignment.gid(i)) {
            auto& children = trie.nodes_[node].children;
            auto it = std::lower_bound(children.begin(), children.end(), std::make_pair(tok, 0U),
                                       [](const auto& a, const auto& b) { return a.first < b.first; });
            if (it != children.end() && it->first == tok) {
                node = it->second;
                continue;
            }
            const auto next = static_cast<std::uint32_t>(trie.nodes_.size());
            children.insert(it, {tok, next});
            trie.nodes_.emplace_back();
            node = next;
        }
        if (trie.nodes_[node].item >= 0) {
            throw Error(ErrorKind::invalid_argument,
                        "duplicate GID for items " + std::to_string(trie.nodes_[node].item) + " and " +
                            std::to_string(i));
        }
        trie.nodes_[node].item = static_cast<std::int64_t>(i);
        ++trie.leaf_count_;
    }
    return trie;
}

std::optional<std::uint32_t> GidTrie::child(std::uint32_t node, std::uint32_t token) const {
    const auto& children = nodes_[node].children;
    auto it = std::lower_bound(children.begin(), children.end(), std::make_pair(token, 0U),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    if (it == children.end() || it->first != token) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> GidTrie::lookup(std::span<const std::uint32_t> gid) const {
    if (gid.size() != depth_) return std::nullopt;
    std::uint32_t node = root();
    for (auto tok : gid) {
        const auto next = child(node, tok);
        if (!next) return std::nullopt;
        node = *next;
    }
    if (nodes_[node].item < 0) return std::nullopt;
    return static_cast<std::size_t>(nodes_[node].item);
}

std::vector<GidTrie::Leaf> GidTrie::leaves() const {
    std::vector<Leaf> out;
    std::vector<std::uint32_t> path;
    std::function<void(std::uint32_t)> walk = [&](std::uint32_t node) {
        if (nodes_[node].item >= 0) out.push_back({path, static_cast<std::size_t>(nodes_[node].item)});
        for (const auto& [tok, next] : nodes_[node].children) {
            path.push_back(tok);
            walk(next);
            path.pop_back();
        }
    };
    walk(root());
    return out;
}

}  // namespace colarec

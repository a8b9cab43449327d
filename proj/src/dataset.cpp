#include "colarec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "colarec/error.hpp"
#include "colarec/io.hpp"
#include "colarec/rng.hpp"

namespace colarec {

namespace fs = std::filesystem;

namespace {

constexpr char kUnitSeparator = '\x1f';

std::string line_error(const fs::path& path, std::size_t line, std::string_view what) {
    std::ostringstream out;
    out << path.string() << ": line " << line << ": " << what;
    return out.str();
}

ItemContent parse_pairs(std::string_view text, const fs::path& path, std::size_t line) {
    ItemContent pairs;
    if (text.empty()) return pairs;
    std::set<std::string, std::less<>> seen;
    for (std::string_view field : io::split(text, kUnitSeparator)) {
        const std::size_t eq = field.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw Error(ErrorKind::parse, line_error(path, line, "attribute without key=value"));
        }
        std::string key(field.substr(0, eq));
        if (!seen.insert(key).second) {
            throw Error(ErrorKind::parse, line_error(path, line, "duplicate attribute key '" + key + "'"));
        }
        pairs.emplace_back(std::move(key), std::string(field.substr(eq + 1)));
    }
    return pairs;
}

void write_pairs(std::ostream& out, const ItemContent& pairs) {
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (k > 0) out << kUnitSeparator;
        out << pairs[k].first << '=' << pairs[k].second;
    }
}

}  // namespace

std::vector<RawRecord> read_interactions(const fs::path& path) {
    std::vector<RawRecord> records;
    std::set<std::pair<std::string, std::string>> seen;
    io::for_each_line(path, [&](std::size_t line, std::string_view text) {
        if (text.empty()) return;
        const auto fields = io::split(text, '\t');
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            throw Error(ErrorKind::parse, line_error(path, line, "expected user_key<TAB>item_key"));
        }
        std::pair<std::string, std::string> key{std::string(fields[0]), std::string(fields[1])};
        if (seen.insert(key).second) records.push_back({std::move(key.first), std::move(key.second)});
    });
    return records;
}

ContentMap read_content(const fs::path& path) {
    ContentMap content;
    io::for_each_line(path, [&](std::size_t line, std::string_view text) {
        if (text.empty()) return;
        const std::size_t tab = text.find('\t');
        std::string_view key = text.substr(0, tab);
        if (key.empty()) throw Error(ErrorKind::parse, line_error(path, line, "empty item key"));
        std::string_view rest = tab == std::string_view::npos ? std::string_view{} : text.substr(tab + 1);
        auto [it, inserted] = content.emplace(std::string(key), parse_pairs(rest, path, line));
        if (!inserted) {
            throw Error(ErrorKind::parse, line_error(path, line, "duplicate item '" + it->first + "'"));
        }
    });
    return content;
}

RawData ingest(const fs::path& records_path, const fs::path& content_path) {
    RawData data;
    data.records = read_interactions(records_path);
    data.content = read_content(content_path);
    std::set<std::string> missing;
    for (const auto& r : data.records) {
        if (!data.content.contains(r.item_key)) missing.insert(r.item_key);
    }
    for (const auto& key : missing) {
        data.warnings.push_back("item '" + key + "' has interactions but no content; using empty content");
        data.content.emplace(key, ItemContent{});
    }
    return data;
}

std::vector<RawRecord> filter_kcore(const std::vector<RawRecord>& records, std::size_t min_degree) {
    if (min_degree == 0) throw Error(ErrorKind::invalid_argument, "min_degree must be >= 1");
    std::unordered_map<std::string, std::size_t> user_id;
    std::unordered_map<std::string, std::size_t> item_id;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(records.size());
    for (const auto& r : records) {
        const auto u = user_id.try_emplace(r.user_key, user_id.size()).first->second;
        const auto i = item_id.try_emplace(r.item_key, item_id.size()).first->second;
        edges.emplace_back(u, i);
    }
    const std::size_t n_users = user_id.size();
    // nodes: users [0, n_users), items after
    std::vector<std::vector<std::size_t>> incident(n_users + item_id.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        incident[edges[e].first].push_back(e);
        incident[n_users + edges[e].second].push_back(e);
    }
    std::vector<std::size_t> degree(incident.size());
    for (std::size_t n = 0; n < incident.size(); ++n) degree[n] = incident[n].size();
    std::vector<bool> removed_node(incident.size(), false);
    std::vector<bool> removed_edge(edges.size(), false);
    std::vector<std::size_t> queue;
    for (std::size_t n = 0; n < incident.size(); ++n) {
        if (degree[n] < min_degree) {
            removed_node[n] = true;
            queue.push_back(n);
        }
    }
    while (!queue.empty()) {
        const std::size_t node = queue.back();
        queue.pop_back();
        for (std::size_t e : incident[node]) {
            if (removed_edge[e]) continue;
            removed_edge[e] = true;
            const std::size_t u = edges[e].first;
            const std::size_t i = n_users + edges[e].second;
            const std::size_t other = node == u ? i : u;
            --degree[other];
            if (!removed_node[other] && degree[other] < min_degree) {
                removed_node[other] = true;
                queue.push_back(other);
            }
        }
    }
    std::vector<RawRecord> kept;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!removed_edge[e]) kept.push_back(records[e]);
    }
    return kept;
}

SplitCounts split_counts(std::size_t degree, const SplitRatios& ratios) {
    const double total = ratios.train + ratios.val + ratios.test;
    const auto share = [&](double r) -> std::size_t {
        if (r <= 0.0) return 0;
        const auto n = static_cast<std::size_t>(std::floor(static_cast<double>(degree) * r / total));
        return std::max<std::size_t>(n, 1);
    };
    SplitCounts c;
    c.val = share(ratios.val);
    c.test = share(ratios.test);
    if (c.val + c.test + 1 > degree) return {degree, 0, 0};
    c.train = degree - c.val - c.test;
    return c;
}

InteractionDataset InteractionDataset::from_records(const std::vector<RawRecord>& records,
                                                    const ContentMap& content) {
    InteractionDataset ds;
    std::set<std::string> users;
    std::set<std::string> items;
    for (const auto& r : records) {
        if (r.user_key.empty() || r.item_key.empty()) {
            throw Error(ErrorKind::invalid_argument, "empty user or item key");
        }
        users.insert(r.user_key);
        items.insert(r.item_key);
    }
    ds.user_keys_.assign(users.begin(), users.end());
    ds.item_keys_.assign(items.begin(), items.end());
    std::unordered_map<std::string, std::uint32_t> uid;
    std::unordered_map<std::string, std::uint32_t> iid;
    for (std::uint32_t k = 0; k < ds.user_keys_.size(); ++k) uid.emplace(ds.user_keys_[k], k);
    for (std::uint32_t k = 0; k < ds.item_keys_.size(); ++k) iid.emplace(ds.item_keys_[k], k);
    std::set<Edge> edges;
    for (const auto& r : records) edges.insert({uid.at(r.user_key), iid.at(r.item_key)});
    ds.edges_.assign(edges.begin(), edges.end());
    ds.labels_.assign(ds.edges_.size(), Split::train);
    ds.content_.resize(ds.item_keys_.size());
    for (std::size_t i = 0; i < ds.item_keys_.size(); ++i) {
        if (auto it = content.find(ds.item_keys_[i]); it != content.end()) ds.content_[i] = it->second;
    }
    ds.rebuild();
    return ds;
}

void InteractionDataset::rebuild() {
    user_degree_.assign(n_users(), 0);
    item_degree_.assign(n_items(), 0);
    for (auto& v : user_items_) v.assign(n_users(), {});
    for (auto& v : item_users_) v.assign(n_items(), {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const auto [u, i] = edges_[e];
        ++user_degree_[u];
        ++item_degree_[i];
        const auto s = static_cast<std::size_t>(labels_[e]);
        user_items_[s][u].push_back(i);
        item_users_[s][i].push_back(u);
    }
    // edges are sorted by (user, item), so user lists are already ascending
    for (auto& lists : item_users_) {
        for (auto& l : lists) std::sort(l.begin(), l.end());
    }
}

bool InteractionDataset::has_train_edge(std::size_t user, std::size_t item) const {
    const auto& items = user_items(user, Split::train);
    return std::binary_search(items.begin(), items.end(), static_cast<std::uint32_t>(item));
}

std::size_t InteractionDataset::count(Split s) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), s));
}

InteractionDataset InteractionDataset::with_split(const SplitRatios& ratios, std::uint64_t seed,
                                                  std::vector<std::string>* log) const {
    std::vector<Split> labels(edges_.size(), Split::train);
    std::size_t begin = 0;
    while (begin < edges_.size()) {
        const std::uint32_t user = edges_[begin].user;
        std::size_t end = begin;
        while (end < edges_.size() && edges_[end].user == user) ++end;
        const std::size_t degree = end - begin;
        const SplitCounts counts = split_counts(degree, ratios);
        if (counts.train == degree && log != nullptr && degree > 0 &&
            (ratios.val > 0 || ratios.test > 0)) {
            log->push_back("user " + std::to_string(user) + " has " + std::to_string(degree) +
                           " edges; all kept in train");
        }
        std::vector<std::size_t> order(degree);
        std::iota(order.begin(), order.end(), begin);
        Rng rng(mix_seed(seed, user));
        rng.shuffle(order);
        for (std::size_t k = 0; k < degree; ++k) {
            Split s = Split::train;
            if (k < counts.val) {
                s = Split::val;
            } else if (k < counts.val + counts.test) {
                s = Split::test;
            }
            labels[order[k]] = s;
        }
        begin = end;
    }
    return with_labels(std::move(labels));
}

InteractionDataset InteractionDataset::with_labels(std::vector<Split> labels) const {
    if (labels.size() != edges_.size()) {
        throw Error(ErrorKind::invalid_argument, "label count does not match edge count");
    }
    InteractionDataset ds = *this;
    ds.labels_ = std::move(labels);
    ds.rebuild();
    return ds;
}

void InteractionDataset::save(const fs::path& dir) const {
    fs::create_directories(dir);
    io::write_atomic(dir / "users.tsv", [&](std::ostream& out) {
        for (std::size_t u = 0; u < n_users(); ++u) out << u << '\t' << user_keys_[u] << '\n';
    });
    io::write_atomic(dir / "items.tsv", [&](std::ostream& out) {
        for (std::size_t i = 0; i < n_items(); ++i) out << i << '\t' << item_keys_[i] << '\n';
    });
    io::write_atomic(dir / "content.tsv", [&](std::ostream& out) {
        for (std::size_t i = 0; i < n_items(); ++i) {
            out << item_keys_[i] << '\t';
            write_pairs(out, content_[i]);
            out << '\n';
        }
    });
    io::write_atomic(dir / "split.tsv", [&](std::ostream& out) {
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            out << edges_[e].user << '\t' << edges_[e].item << '\t'
                << static_cast<int>(labels_[e]) << '\n';
        }
    });
}

namespace {

std::vector<std::string> read_key_table(const fs::path& path) {
    std::vector<std::string> keys;
    io::for_each_line(path, [&](std::size_t line, std::string_view text) {
        if (text.empty()) return;
        const auto fields = io::split(text, '\t');
        if (fields.size() != 2 || fields[0] != std::to_string(keys.size())) {
            throw Error(ErrorKind::parse, line_error(path, line, "expected dense index<TAB>key"));
        }
        keys.emplace_back(fields[1]);
    });
    return keys;
}

std::uint32_t parse_index(std::string_view text, std::size_t bound, const fs::path& path,
                          std::size_t line) {
    std::size_t value = 0;
    if (text.empty()) throw Error(ErrorKind::parse, line_error(path, line, "empty index"));
    for (char c : text) {
        if (c < '0' || c > '9') throw Error(ErrorKind::parse, line_error(path, line, "bad index"));
        value = value * 10 + static_cast<std::size_t>(c - '0');
        if (value >= bound) throw Error(ErrorKind::parse, line_error(path, line, "index out of range"));
    }
    return static_cast<std::uint32_t>(value);
}

}  // namespace

InteractionDataset InteractionDataset::load(const fs::path& dir) {
    for (const char* name : {"users.tsv", "items.tsv", "content.tsv", "split.tsv"}) {
        io::require_file(dir / name, "prepared data file");
    }
    InteractionDataset ds;
    ds.user_keys_ = read_key_table(dir / "users.tsv");
    ds.item_keys_ = read_key_table(dir / "items.tsv");
    const ContentMap content = read_content(dir / "content.tsv");
    ds.content_.resize(ds.item_keys_.size());
    for (std::size_t i = 0; i < ds.item_keys_.size(); ++i) {
        if (auto it = content.find(ds.item_keys_[i]); it != content.end()) ds.content_[i] = it->second;
    }
    const fs::path split_path = dir / "split.tsv";
    io::for_each_line(split_path, [&](std::size_t line, std::string_view text) {
        if (text.empty()) return;
        const auto fields = io::split(text, '\t');
        if (fields.size() != 3 || fields[2].size() != 1 || fields[2][0] < '0' || fields[2][0] > '2') {
            throw Error(ErrorKind::parse, line_error(split_path, line, "expected user<TAB>item<TAB>{0|1|2}"));
        }
        const Edge e{parse_index(fields[0], ds.n_users(), split_path, line),
                     parse_index(fields[1], ds.n_items(), split_path, line)};
        if (!ds.edges_.empty() && !(ds.edges_.back() < e)) {
            throw Error(ErrorKind::parse, line_error(split_path, line, "edges must be sorted and unique"));
        }
        ds.edges_.push_back(e);
        ds.labels_.push_back(static_cast<Split>(fields[2][0] - '0'));
    });
    ds.rebuild();
    return ds;
}

UserSegmentation segment_users(const InteractionDataset& dataset, double head_fraction) {
    const std::size_t n = dataset.n_users();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0U);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return dataset.user_items(a, Split::train).size() > dataset.user_items(b, Split::train).size();
    });
    const auto n_head = static_cast<std::size_t>(std::lround(head_fraction * static_cast<double>(n)));
    UserSegmentation seg;
    seg.is_head.assign(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        if (k < n_head) {
            seg.head.push_back(order[k]);
            seg.is_head[order[k]] = true;
        } else {
            seg.tail.push_back(order[k]);
        }
    }
    std::sort(seg.head.begin(), seg.head.end());
    std::sort(seg.tail.begin(), seg.tail.end());
    return seg;
}

}  // namespace colarec

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace colarec {

struct RawRecord {
    std::string user_key;
    std::string item_key;

    friend bool operator==(const RawRecord&, const RawRecord&) = default;
    friend auto operator<=>(const RawRecord&, const RawRecord&) = default;
};

/// Flattened attribute dictionary of one item, in source order.
using ItemContent = std::vector<std::pair<std::string, std::string>>;
using ContentMap = std::map<std::string, ItemContent>;

struct RawData {
    std::vector<RawRecord> records;
    ContentMap content;
    std::vector<std::string> warnings;
};

/// Parses `user_key<TAB>item_key` lines. Duplicate pairs collapse to the
/// first occurrence; empty lines are skipped. Malformed lines throw with
/// the line number.
std::vector<RawRecord> read_interactions(const std::filesystem::path& path);

/// Parses `item_key<TAB>k1=v1<US>k2=v2...` lines (US = 0x1F).
ContentMap read_content(const std::filesystem::path& path);

/// Reads both files and reports items that have edges but no content line.
RawData ingest(const std::filesystem::path& records_path,
               const std::filesystem::path& content_path);

/// Iteratively removes users and items with fewer than `min_degree` edges
/// until no such node remains. Input order of surviving records is kept.
std::vector<RawRecord> filter_kcore(const std::vector<RawRecord>& records,
                                    std::size_t min_degree = 5);

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

struct Edge {
    std::uint32_t user;
    std::uint32_t item;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct SplitRatios {
    double train = 8.0;
    double val = 1.0;
    double test = 1.0;
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

/// Per-user split sizes: val and test get floor(share * degree) but at least
/// one edge each, train keeps the remainder. Users that cannot keep a train
/// edge under that rule keep everything in train.
SplitCounts split_counts(std::size_t degree, const SplitRatios& ratios = {});

class InteractionDataset {
public:
    InteractionDataset() = default;

    /// Assigns dense indices (keys sorted ascending) and labels every edge
    /// as train. Items without content get an empty pair list.
    static InteractionDataset from_records(const std::vector<RawRecord>& records,
                                           const ContentMap& content);

    std::size_t n_users() const { return user_keys_.size(); }
    std::size_t n_items() const { return item_keys_.size(); }
    const std::vector<std::string>& user_keys() const { return user_keys_; }
    const std::vector<std::string>& item_keys() const { return item_keys_; }

    /// Edges sorted by (user, item).
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Split>& labels() const { return labels_; }
    const ItemContent& content(std::size_t item) const { return content_[item]; }

    std::size_t user_degree(std::size_t user) const { return user_degree_[user]; }
    std::size_t item_degree(std::size_t item) const { return item_degree_[item]; }

    /// Items of `user` in the given split, ascending.
    const std::vector<std::uint32_t>& user_items(std::size_t user, Split s) const {
        return user_items_[static_cast<std::size_t>(s)][user];
    }
    /// Users of `item` in the given split, ascending.
    const std::vector<std::uint32_t>& item_users(std::size_t item, Split s) const {
        return item_users_[static_cast<std::size_t>(s)][item];
    }

    bool has_train_edge(std::size_t user, std::size_t item) const;

    std::size_t count(Split s) const;

    /// Returns a copy with per-user random split labels.
    InteractionDataset with_split(const SplitRatios& ratios, std::uint64_t seed,
                                  std::vector<std::string>* log = nullptr) const;

    InteractionDataset with_labels(std::vector<Split> labels) const;

    /// Prepared-data directory: users.tsv, items.tsv, content.tsv, split.tsv.
    void save(const std::filesystem::path& dir) const;
    static InteractionDataset load(const std::filesystem::path& dir);

private:
    void rebuild();

    std::vector<std::string> user_keys_;
    std::vector<std::string> item_keys_;
    std::vector<Edge> edges_;
    std::vector<Split> labels_;
    std::vector<ItemContent> content_;
    std::vector<std::size_t> user_degree_;
    std::vector<std::size_t> item_degree_;
    std::array<std::vector<std::vector<std::uint32_t>>, 3> user_items_;
    std::array<std::vector<std::vector<std::uint32_t>>, 3> item_users_;
};

struct UserSegmentation {
    std::vector<std::uint32_t> head;
    std::vector<std::uint32_t> tail;
    /// true for head users, indexed by user
    std::vector<bool> is_head;
};

/// Sorts users by train-interaction count (descending, ties by ascending
/// index) and marks the top round(head_fraction * n) as head. Both lists
/// are returned in ascending index order.
UserSegmentation segment_users(const InteractionDataset& dataset, double head_fraction = 0.20);

}  // namespace colarec

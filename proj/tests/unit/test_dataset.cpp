#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "colarec/dataset.hpp"
#include "colarec/error.hpp"
#include "colarec/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace colarec;

namespace {

std::vector<RawRecord> random_graph(std::size_t users, std::size_t items, double p, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<RawRecord> out;
    for (std::size_t u = 0; u < users; ++u)
        for (std::size_t i = 0; i < items; ++i)
            if (rng.bernoulli(p)) out.push_back({"u" + std::to_string(u), "i" + std::to_string(i)});
    return out;
}

/// User u gets counts[u] distinct items, all labelled train.
InteractionDataset with_counts(const std::vector<std::size_t>& counts) {
    std::vector<RawRecord> records;
    for (std::size_t u = 0; u < counts.size(); ++u) {
        for (std::size_t i = 0; i < counts[u]; ++i) {
            records.push_back({"u" + std::string(3 - std::to_string(u).size(), '0') + std::to_string(u),
                               "i" + std::to_string(i)});
        }
    }
    return InteractionDataset::from_records(records, {});
}

}  // namespace

TEST_CASE("read_interactions collapses duplicate pairs") {
    fixture::TempDir dir("dup");
    fixture::write_file(dir / "x.tsv", "a\tp\nb\tq\na\tp\n");
    const auto records = read_interactions(dir / "x.tsv");
    CHECK(records.size() == 2);
    CHECK(records[0] == RawRecord{"a", "p"});
}

TEST_CASE("read_interactions names the malformed line") {
    fixture::TempDir dir("bad");
    fixture::write_file(dir / "x.tsv", "a\tp\nb\n");
    try {
        read_interactions(dir / "x.tsv");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("read_content splits attribute pairs") {
    fixture::TempDir dir("content");
    fixture::write_file(dir / "c.tsv", "i1\ttitle=red lipstick\x1f" "brand=acme\n");
    const auto content = read_content(dir / "c.tsv");
    REQUIRE(content.count("i1") == 1);
    const ItemContent expected{{"title", "red lipstick"}, {"brand", "acme"}};
    CHECK(content.at("i1") == expected);
}

TEST_CASE("k-core: star graph empties") {
    std::vector<RawRecord> star;
    for (int i = 0; i < 5; ++i) star.push_back({"u", "i" + std::to_string(i)});
    CHECK(filter_kcore(star, 5).empty());
}

TEST_CASE("k-core: complete 5x5 is unchanged") {
    const auto full = random_graph(5, 5, 1.1, 1);
    CHECK(full.size() == 25);
    CHECK(filter_kcore(full, 5) == full);
}

TEST_CASE("k-core matches the repeated-scan oracle on random graphs") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto records = random_graph(50, 50, 0.3 - 0.03 * static_cast<double>(seed), seed);
        std::set<std::pair<std::string, std::string>> edges;
        for (const auto& r : records) edges.insert({r.user_key, r.item_key});
        const auto expected = oracle::kcore(edges, 5);
        std::set<std::pair<std::string, std::string>> got;
        for (const auto& r : filter_kcore(records, 5)) got.insert({r.user_key, r.item_key});
        CHECK(got == expected);
    }
}

TEST_CASE("k-core output satisfies the degree threshold and keeps input order") {
    const auto records = random_graph(40, 40, 0.15, 77);
    const auto kept = filter_kcore(records, 4);
    std::map<std::string, std::size_t> du, di;
    for (const auto& r : kept) {
        ++du[r.user_key];
        ++di[r.item_key];
    }
    for (const auto& [k, d] : du) CHECK(d >= 4);
    for (const auto& [k, d] : di) CHECK(d >= 4);
    auto it = records.begin();
    for (const auto& r : kept) {
        it = std::find(it, records.end(), r);
        REQUIRE(it != records.end());
    }
}

TEST_CASE("split_counts follows the floor rule with one val and one test edge minimum") {
    CHECK(split_counts(10) == SplitCounts{8, 1, 1});
    CHECK(split_counts(5) == SplitCounts{3, 1, 1});
    // hand table: floor(0.1 d) is 0 below 10, so val = test = 1
    const std::vector<SplitCounts> table{{3, 1, 1}, {4, 1, 1}, {5, 1, 1}, {6, 1, 1},
                                         {7, 1, 1}, {8, 1, 1}, {9, 1, 1}, {10, 1, 1}};
    for (std::size_t d = 5; d <= 12; ++d) CHECK(split_counts(d) == table[d - 5]);
    CHECK(split_counts(20) == SplitCounts{16, 2, 2});
    CHECK(split_counts(3) == SplitCounts{1, 1, 1});
    CHECK(split_counts(2) == SplitCounts{2, 0, 0});
    CHECK(split_counts(1) == SplitCounts{1, 0, 0});
}

TEST_CASE("split_counts always sums to the degree") {
    for (std::size_t d = 0; d < 200; ++d) {
        const auto c = split_counts(d);
        CHECK(c.train + c.val + c.test == d);
        if (d > 0) CHECK(c.train >= 1);
    }
}

TEST_CASE("with_split is deterministic and matches split_counts per user") {
    const auto ds = InteractionDataset::from_records(random_graph(30, 25, 0.4, 3), {});
    std::vector<std::string> log;
    const auto a = ds.with_split({}, 9, &log);
    const auto b = ds.with_split({}, 9);
    CHECK(a.labels() == b.labels());
    CHECK(a.labels() != ds.with_split({}, 10).labels());
    for (std::size_t u = 0; u < a.n_users(); ++u) {
        const auto expect = split_counts(a.user_degree(u));
        CHECK(a.user_items(u, Split::train).size() == expect.train);
        CHECK(a.user_items(u, Split::val).size() == expect.val);
        CHECK(a.user_items(u, Split::test).size() == expect.test);
    }
    CHECK(a.count(Split::train) + a.count(Split::val) + a.count(Split::test) == a.edges().size());
}

TEST_CASE("users too small to split keep everything in train and are logged") {
    const auto ds = with_counts({2, 10});
    std::vector<std::string> log;
    const auto s = ds.with_split({}, 1, &log);
    CHECK(s.user_items(0, Split::train).size() == 2);
    CHECK(log.size() == 1);
}

TEST_CASE("dataset indices follow sorted keys and edges are sorted") {
    const auto ds = InteractionDataset::from_records({{"b", "y"}, {"a", "z"}, {"a", "y"}}, {});
    CHECK(ds.user_keys() == std::vector<std::string>{"a", "b"});
    CHECK(ds.item_keys() == std::vector<std::string>{"y", "z"});
    CHECK(std::is_sorted(ds.edges().begin(), ds.edges().end()));
    CHECK(ds.user_degree(0) == 2);
    CHECK(ds.item_degree(0) == 2);
    CHECK(ds.has_train_edge(1, 0));
    CHECK_FALSE(ds.has_train_edge(1, 1));
}

TEST_CASE("prepared dataset round-trips through save and load") {
    fixture::TempDir dir("ds-save");
    ContentMap content{{"i1", {{"title", "red lipstick"}}}};
    const auto ds = InteractionDataset::from_records(random_graph(12, 10, 0.6, 5), content).with_split({}, 2);
    ds.save(dir.path());
    const auto back = InteractionDataset::load(dir.path());
    CHECK(back.user_keys() == ds.user_keys());
    CHECK(back.item_keys() == ds.item_keys());
    CHECK(back.edges() == ds.edges());
    CHECK(back.labels() == ds.labels());
    for (std::size_t i = 0; i < ds.n_items(); ++i) CHECK(back.content(i) == ds.content(i));
}

TEST_CASE("segment_users: distinct counts put the two largest users in head") {
    const auto ds = with_counts({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    const auto seg = segment_users(ds);
    CHECK(seg.head == std::vector<std::uint32_t>{8, 9});
    CHECK(seg.tail.size() == 8);
}

TEST_CASE("segment_users: ties go to the lowest indices") {
    const auto seg = segment_users(with_counts(std::vector<std::size_t>(10, 3)));
    CHECK(seg.head == std::vector<std::uint32_t>{0, 1});
    CHECK(seg.is_head[0]);
    CHECK_FALSE(seg.is_head[2]);
}

TEST_CASE("segment_users matches an independent stable sort") {
    Rng rng(21);
    std::vector<std::size_t> counts(100);
    for (auto& c : counts) c = 1 + rng.uniform_index(12);
    const auto seg = segment_users(with_counts(counts));
    std::vector<std::uint32_t> order(counts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return counts[a] > counts[b]; });
    std::vector<std::uint32_t> head(order.begin(), order.begin() + 20);
    std::sort(head.begin(), head.end());
    CHECK(seg.head == head);
    std::vector<std::uint32_t> tail(order.begin() + 20, order.end());
    auto got_tail = seg.tail;
    std::sort(tail.begin(), tail.end());
    std::sort(got_tail.begin(), got_tail.end());
    CHECK(got_tail == tail);
}

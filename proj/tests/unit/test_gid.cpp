#include <algorithm>
#include <set>

#include "colarec/error.hpp"
#include "colarec/gid.hpp"
#include "colarec/rng.hpp"
#include "colarec/text.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace colarec;

namespace {

std::set<std::vector<std::uint32_t>> gid_set(const GidAssignment& g) {
    std::set<std::vector<std::uint32_t>> out;
    for (std::size_t i = 0; i < g.n_items(); ++i) out.emplace(g.gid(i).begin(), g.gid(i).end());
    return out;
}

Tensor<double> random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<double> t = Tensor<double>::matrix(n, d);
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

GidAssignment from_gids(std::size_t k, std::size_t l, const std::vector<std::vector<std::uint32_t>>& gids) {
    std::vector<std::uint32_t> flat;
    for (const auto& g : gids) flat.insert(flat.end(), g.begin(), g.end());
    return GidAssignment(GidStrategy::random, k, l, 0, flat);
}

}  // namespace

TEST_CASE("capacity is K^l and overflow is reported") {
    CHECK(gid_capacity(32, 3) == 32768u);
    CHECK(gid_capacity(2, 1) == 2u);
    CHECK_FALSE(gid_capacity(1u << 20, 4).has_value());
}

TEST_CASE("a single item gets a valid GID and a one-leaf trie") {
    for (const auto& g : {build_random(1, 2, 2, 1), build_collaborative(random_points(1, 3, 1), 2, 2, 1)}) {
        CHECK(g.n_items() == 1);
        CHECK(g.gid(0).size() == 2);
        CHECK(g.gid(0)[0] < 2);
        CHECK(GidTrie::build(g).leaf_count() == 1);
    }
}

TEST_CASE("four 2-D points split into their two natural pairs at level 1") {
    Tensor<double> pts = Tensor<double>::matrix(4, 2);
    const double raw[4][2] = {{0, 0}, {0, 1}, {10, 0}, {10, 1}};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 2; ++c) pts(r, c) = raw[r][c];
    const auto g = build_collaborative(pts, 2, 2, 5);
    CHECK(g.gid(0)[0] == g.gid(1)[0]);
    CHECK(g.gid(2)[0] == g.gid(3)[0]);
    CHECK(g.gid(0)[0] != g.gid(2)[0]);
    CHECK(g.is_bijective());
}

TEST_CASE("oversized catalogues are refused with the required capacity") {
    try {
        build_random(10, 3, 2, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::capacity);
        const std::string msg = e.what();
        CHECK(msg.find("10") != std::string::npos);
        CHECK(msg.find("9") != std::string::npos);
    }
    CHECK_THROWS_AS(build_collaborative(random_points(10, 2, 1), 3, 2, 1), Error);
    CHECK_THROWS_AS(build_content(random_points(10, 2, 1), 3, 2, 1), Error);
}

TEST_CASE("random GIDs with n = K^l use every sequence") {
    const auto g = build_random(27, 3, 3, 4);
    const auto all = gid_set(g);
    CHECK(all.size() == 27);
    for (const auto& s : all)
        for (auto z : s) CHECK(z < 3);
}

TEST_CASE("random GIDs differ across seeds") {
    const auto a = build_random(100, 32, 3, 1);
    const auto b = build_random(100, 32, 3, 2);
    std::size_t same = 0;
    for (std::size_t i = 0; i < 100; ++i) same += std::equal(a.gid(i).begin(), a.gid(i).end(), b.gid(i).begin());
    // expected collisions ~ 100 / 32768
    CHECK(same <= 1);
}

TEST_CASE("10^4 random GIDs have no duplicates") {
    const auto g = build_random(10000, 32, 3, 8);
    CHECK(gid_set(g).size() == 10000);
    CHECK(g.is_bijective());
    CHECK(g.satisfies_capacity());
}

TEST_CASE("clustered strategies satisfy bijectivity and prefix capacity") {
    for (auto [k, l] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 3}, {3, 2}, {4, 3}, {5, 2}}) {
        const std::size_t n = *gid_capacity(k, l) - 1;
        const auto g = build_collaborative(random_points(n, 4, k * 10 + l), k, l, 3);
        CHECK(g.is_bijective());
        CHECK(g.satisfies_capacity());
        for (std::size_t t = 1; t < l; ++t) CHECK(g.max_prefix_load(t) <= *gid_capacity(k, l - t));
    }
}

TEST_CASE("identical content vectors still give a valid assignment") {
    Tensor<double> same = Tensor<double>::matrix(9, 4, 0.5);
    const auto g = build_content(same, 3, 2, 1);
    CHECK(g.is_bijective());
    CHECK(g.satisfies_capacity());
}

TEST_CASE("two bag-of-words clusters split at level 1") {
    std::vector<ItemContent> items;
    for (int i = 0; i < 8; ++i) {
        const std::string topic = i < 4 ? "lipstick red matte" : "hammer steel tool";
        items.push_back({{"title", topic + " v" + std::to_string(i)}});
    }
    const auto g = build_content(content_vectors(items), 2, 3, 2);
    for (int i = 1; i < 4; ++i) CHECK(g.gid(i)[0] == g.gid(0)[0]);
    for (int i = 5; i < 8; ++i) CHECK(g.gid(i)[0] == g.gid(4)[0]);
    CHECK(g.gid(0)[0] != g.gid(4)[0]);
}

TEST_CASE("content vectors are unit-norm hashed term frequencies") {
    const std::vector<ItemContent> items{{{"title", "Red, red lipstick!"}}, {}};
    const auto v = content_vectors(items);
    CHECK(v.cols() == kContentHashDim);
    double norm = 0.0;
    for (double x : v.row(0)) norm += x * x;
    CHECK(norm == doctest::Approx(1.0));
    for (double x : v.row(1)) CHECK(x == 0.0);
    CHECK(tokenize("Red, red lipstick!") == std::vector<std::string>{"red", "red", "lipstick"});
}

TEST_CASE("iad is the identity mapping") {
    const auto g = build_iad(3);
    CHECK(g.length() == 1);
    CHECK(g.k() == 3);
    for (std::uint32_t i = 0; i < 3; ++i) CHECK(g.gid(i)[0] == i);
    const auto trie = GidTrie::build(g);
    CHECK(trie.depth() == 1);
    CHECK(trie.leaf_count() == 3);
}

TEST_CASE("trie children are sorted and leaves round-trip") {
    const auto g = from_gids(2, 2, {{1, 0}, {0, 1}, {0, 0}});
    const auto trie = GidTrie::build(g);
    const auto& root = trie.node(GidTrie::root());
    REQUIRE(root.children.size() == 2);
    CHECK(root.children[0].first == 0);
    CHECK(root.children[1].first == 1);
    const auto& zero = trie.node(root.children[0].second);
    REQUIRE(zero.children.size() == 2);
    CHECK(zero.children[0].first == 0);
    CHECK(zero.children[1].first == 1);
    CHECK(trie.lookup(std::vector<std::uint32_t>{1, 0}) == 0u);
    CHECK_FALSE(trie.lookup(std::vector<std::uint32_t>{1, 1}).has_value());
    const auto leaves = trie.leaves();
    REQUIRE(leaves.size() == 3);
    CHECK(leaves[0].gid == std::vector<std::uint32_t>{0, 0});
    CHECK(leaves[0].item == 2);
    CHECK(leaves[2].item == 0);
}

TEST_CASE("duplicate GIDs are rejected by the trie") {
    CHECK_THROWS_AS(GidTrie::build(from_gids(2, 2, {{0, 1}, {0, 1}})), Error);
}

TEST_CASE("trie over 10^4 random GIDs has one leaf per distinct GID") {
    const auto g = build_random(10000, 25, 3, 12);
    const auto trie = GidTrie::build(g);
    CHECK(trie.leaf_count() == gid_set(g).size());
    std::set<std::size_t> items;
    for (const auto& leaf : trie.leaves()) {
        items.insert(leaf.item);
        CHECK(std::equal(leaf.gid.begin(), leaf.gid.end(), g.gid(leaf.item).begin()));
    }
    CHECK(items.size() == 10000);
}

TEST_CASE("assignments round-trip through save and load") {
    fixture::TempDir dir("gids");
    const auto g = build_collaborative(random_points(20, 3, 4), 3, 3, 6);
    g.save(dir / "gids.tsv");
    const auto back = GidAssignment::load(dir / "gids.tsv");
    CHECK(back.strategy() == GidStrategy::collaborative);
    CHECK(back.k() == 3);
    CHECK(back.length() == 3);
    CHECK(back.seed() == 6);
    CHECK(gid_set(back) == gid_set(g));
    for (std::size_t i = 0; i < 20; ++i) CHECK(std::equal(back.gid(i).begin(), back.gid(i).end(), g.gid(i).begin()));
}

TEST_CASE("strategy names parse") {
    for (auto s : {GidStrategy::collaborative, GidStrategy::content, GidStrategy::random, GidStrategy::iad}) {
        CHECK(parse_gid_strategy(to_string(s)) == s);
    }
    CHECK_THROWS_AS(parse_gid_strategy("bert"), Error);
}

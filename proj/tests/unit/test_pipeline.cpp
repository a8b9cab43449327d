#include <algorithm>
#include <sstream>

#include "colarec/error.hpp"
#include "colarec/io.hpp"
#include "colarec/pipeline.hpp"
#include "colarec/synthetic.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace colarec;
namespace fs = std::filesystem;

namespace {

const fs::path kAssets = COLAREC_ASSETS_DIR;

/// Smoke settings over the bundled synthetic set, rooted in `run`.
RunConfig smoke(const fs::path& run) {
    RunConfig c;
    c.merge_file(kAssets / "synthetic" / "smoke.conf");
    c.set("run", run.string());
    c.set("interactions", (kAssets / "synthetic" / "interactions.tsv").string());
    c.set("content", (kAssets / "synthetic" / "content.tsv").string());
    return c;
}

}  // namespace

TEST_CASE("synthetic data has planted blocks and depends on the seed") {
    SyntheticConfig s;
    const auto a = make_synthetic(s);
    std::size_t inside = 0;
    for (const auto& r : a.records) {
        const auto u = std::stoul(r.user_key.substr(1));
        const auto i = std::stoul(r.item_key.substr(1));
        inside += a.user_cluster[u] == a.item_cluster[i];
    }
    CHECK(static_cast<double>(inside) / static_cast<double>(a.records.size()) > 0.8);
    CHECK(a.content.size() == s.n_items);
    s.seed = 1;
    CHECK(make_synthetic(s).records != a.records);

    fixture::TempDir dir("synth");
    write_synthetic(a, dir.path());
    const auto back = read_interactions(dir / "interactions.tsv");
    CHECK(back.size() == a.records.size());
    CHECK(read_content(dir / "content.tsv").size() == s.n_items);
}

TEST_CASE("bundled assets run prepare, random GIDs, train and evaluate") {
    fixture::TempDir dir("pipe-smoke");
    auto c = smoke(dir.path());
    c.set("strategy", "random");
    std::ostringstream log;
    run_prepare(c, log);
    run_build_gid(c, log);
    const auto result = run_train(c, log);
    CHECK(result.trace.size() >= 1);
    const auto report = run_evaluate(c, log);
    CHECK(report.rows.size() == 9);
    const auto rec = run_recommend(c, 0, log);
    CHECK(rec.size() == c.count("topn"));
    for (const char* f : {"data", "gids.tsv", "model.ckpt", "report.tsv"}) CHECK(fs::exists(dir / f));
}

TEST_CASE("collaborative GIDs need the CF checkpoint") {
    fixture::TempDir dir("pipe-missing");
    auto c = smoke(dir.path());
    std::ostringstream log;
    run_prepare(c, log);
    try {
        run_build_gid(c, log);
        FAIL("expected a missing artifact");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::missing_artifact);
        CHECK(std::string(e.what()).find("cf.ckpt") != std::string::npos);
    }
}

TEST_CASE("stages are idempotent and leave their inputs alone") {
    fixture::TempDir dir("pipe-idem");
    auto c = smoke(dir.path());
    c.set("strategy", "random");
    const auto raw_before = fixture::read_file(kAssets / "synthetic" / "interactions.tsv");
    std::ostringstream log;
    run_prepare(c, log);
    run_build_gid(c, log);
    const auto gids = fixture::read_file(dir / "gids.tsv");
    run_prepare(c, log);
    run_build_gid(c, log);
    CHECK(fixture::read_file(dir / "gids.tsv") == gids);
    CHECK(fixture::read_file(kAssets / "synthetic" / "interactions.tsv") == raw_before);
}

TEST_CASE("gid-length sweep writes one row per length") {
    fixture::TempDir dir("pipe-sweep");
    auto c = smoke(dir.path());
    c.set("strategy", "random");
    c.set("axis", "gid-length");
    c.set("epochs", "1");
    std::ostringstream log;
    run_prepare(c, log);
    const auto rows = run_sweep(c, log);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].value == "1");
    const auto table = fixture::read_file(dir / "sweep.tsv");
    CHECK(table.find("# axis=gid-length") != std::string::npos);
    CHECK(std::count(table.begin(), table.end(), '\n') == 4 + 4);
}

TEST_CASE("sweep variants adjust the right keys") {
    RunConfig base;
    base.set("clusters", "2");
    // length 1 needs K >= n
    CHECK(sweep_variant(base, "gid-length", "1", 40).count("clusters") == 40);
    CHECK(sweep_variant(base, "gid-length", "3", 40).count("clusters") == 4);
    CHECK_FALSE(sweep_variant(base, "ablation", "no-content", 40).flag("use_content"));
    CHECK_FALSE(sweep_variant(base, "ablation", "no-bpr", 40).flag("loss_bpr"));
    CHECK(sweep_variant(base, "variants", "iad", 40).text("strategy") == "iad");
    CHECK_THROWS_AS(sweep_variant(base, "ablation", "iad", 40), Error);
    CHECK_THROWS_AS(sweep_variant(base, "nonsense", "1", 40), Error);
}

TEST_CASE("sweep values fall back to axis defaults") {
    CHECK(sweep_values("gid-length", "") == std::vector<std::string>{"1", "2", "3", "4"});
    CHECK(sweep_values("clusters", "") == std::vector<std::string>{"32", "64", "96", "128"});
    CHECK(sweep_values("clusters", " 4, 8 ") == std::vector<std::string>{"4", "8"});
    CHECK(sweep_values("ablation", "").size() == 5);
    CHECK(sweep_values("variants", "").size() == 8);
    CHECK_THROWS_AS(sweep_values("variants", "full"), Error);
    CHECK_THROWS_AS(sweep_values("other", ""), Error);
}

#include <algorithm>
#include <cmath>
#include <numeric>

#include "colarec/error.hpp"
#include "colarec/model.hpp"
#include "colarec/rng.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace colarec;

namespace {

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
    return worst;
}

Tensor<double> row_of(const Tensor<double>& t, std::size_t r) {
    Tensor<double> out = Tensor<double>::matrix(1, t.cols());
    std::copy(t.row(r).begin(), t.row(r).end(), out.data());
    return out;
}

}  // namespace

TEST_CASE("config validation rejects inconsistent shapes") {
    auto c = fixture::tiny_config();
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = fixture::tiny_config();
    c.gid_length = 0;
    CHECK_THROWS_AS(Seq2SeqModel<double>(c, 1), Error);
}

TEST_CASE("single-token input pools to that token's final state") {
    Seq2SeqModel<double> model(fixture::tiny_config(), 1);
    Graph<double> g;
    const std::vector<std::uint32_t> x{7};
    const auto enc = model.encode(g, x);
    CHECK(max_abs_diff(g.value(enc.pooled), g.value(enc.hidden)) < 1e-15);
}

TEST_CASE("pooling averages the non-pad rows only") {
    Seq2SeqModel<double> model(fixture::tiny_config(), 2);
    Graph<double> g;
    const std::vector<std::uint32_t> x{5, 0, 9};
    const auto enc = model.encode(g, x);
    const auto& h = g.value(enc.hidden);
    for (std::size_t c = 0; c < h.cols(); ++c) {
        CHECK(g.value(enc.pooled)(0, c) == doctest::Approx((h(0, c) + h(2, c)) / 2.0));
    }
}

TEST_CASE("padding does not change non-pad hidden states") {
    Seq2SeqModel<double> model(fixture::tiny_config(), 3);
    Graph<double> g;
    const std::vector<std::uint32_t> a{5, 9}, b{5, 9, 0, 0};
    const auto ea = model.encode(g, a);
    const auto eb = model.encode(g, b);
    CHECK(max_abs_diff(g.value(ea.pooled), g.value(eb.pooled)) < 1e-12);
}

TEST_CASE("encoder input errors") {
    Seq2SeqModel<double> model(fixture::tiny_config(), 1);
    Graph<double> g;
    CHECK_THROWS_AS(model.encode(g, std::vector<std::uint32_t>{}), Error);
    CHECK_THROWS_AS(model.encode(g, std::vector<std::uint32_t>{0, 0}), Error);
    CHECK_THROWS_AS(model.encode(g, std::vector<std::uint32_t>{999}), Error);
    CHECK_THROWS_AS(model.encode(g, std::vector<std::uint32_t>(17, 3)), Error);
}

TEST_CASE("decoder is causal and returns l states under teacher forcing") {
    auto cfg = fixture::tiny_config();
    cfg.gid_length = 3;
    Seq2SeqModel<double> model(cfg, 4);
    Graph<double> g;
    const auto enc = model.encode(g, std::vector<std::uint32_t>{3, 4, 5});
    const Var a = model.decode(g, enc, std::vector<std::uint32_t>{0, 2});
    const Var b = model.decode(g, enc, std::vector<std::uint32_t>{1, 2});
    const Var c = model.decode(g, enc, std::vector<std::uint32_t>{0, 1});
    const Var first = model.decode(g, enc, std::vector<std::uint32_t>{});
    CHECK(g.value(a).rows() == 3);
    CHECK(g.value(first).rows() == 1);
    // d_1 depends only on BOS and the encoder
    CHECK(max_abs_diff(row_of(g.value(a), 0), row_of(g.value(first), 0)) < 1e-14);
    CHECK(max_abs_diff(row_of(g.value(a), 0), row_of(g.value(b), 0)) < 1e-14);
    // z^1 reaches d_2; z^2 reaches only d_3
    CHECK(max_abs_diff(row_of(g.value(a), 1), row_of(g.value(b), 1)) > 1e-6);
    CHECK(max_abs_diff(row_of(g.value(a), 1), row_of(g.value(c), 1)) < 1e-14);
    CHECK(max_abs_diff(row_of(g.value(a), 2), row_of(g.value(c), 2)) > 1e-6);
}

TEST_CASE("decoder prefix errors") {
    Seq2SeqModel<double> model(fixture::tiny_config(), 1);
    Graph<double> g;
    const auto enc = model.encode(g, std::vector<std::uint32_t>{3});
    CHECK_THROWS_AS(model.decode(g, enc, std::vector<std::uint32_t>{0, 1}), Error);
    CHECK_THROWS_AS(model.decode(g, enc, std::vector<std::uint32_t>{3}), Error);
}

TEST_CASE("token distribution from a hand-set codebook") {
    ModelConfig cfg = fixture::tiny_config();
    cfg.dim = 2;
    cfg.heads = 1;
    cfg.codebook_size = 2;
    Seq2SeqModel<double> model(cfg, 1);
    auto& book = model.parameter("codebook.0").value;
    book(0, 0) = 1.0;
    book(0, 1) = 0.0;
    book(1, 0) = 0.0;
    book(1, 1) = 1.0;
    Graph<double> g;
    Tensor<double> d = Tensor<double>::matrix(1, 2);
    d[0] = 1.0;
    const Var p = g.softmax_rows(model.logits(g, g.constant(d), 0, 0));
    CHECK(g.value(p)[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)));
    CHECK(g.value(p)[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(g.value(p)[1] == doctest::Approx(0.2689).epsilon(1e-4));

    // orthogonal to every codebook row -> uniform
    book(1, 0) = 2.0;
    book(1, 1) = 0.0;
    Tensor<double> ortho = Tensor<double>::matrix(1, 2);
    ortho[1] = 3.0;
    const Var q = g.softmax_rows(model.logits(g, g.constant(ortho), 0, 0));
    CHECK(g.value(q)[0] == doctest::Approx(0.5));
    CHECK(g.value(q)[1] == doctest::Approx(0.5));
}

TEST_CASE("scaling a codebook keeps the token order") {
    Seq2SeqModel<double> model(fixture::tiny_config(), 5);
    const auto state = model.encode_state(std::vector<std::uint32_t>{4, 8});
    const auto before = model.step_log_probs(state, {});
    for (auto& v : model.parameter("codebook.0").value.values()) v *= 3.0;
    const auto after = model.step_log_probs(state, {});
    std::vector<std::size_t> ob(before.size()), oa(after.size());
    std::iota(ob.begin(), ob.end(), 0);
    std::iota(oa.begin(), oa.end(), 0);
    std::sort(ob.begin(), ob.end(), [&](auto x, auto y) { return before[x] > before[y]; });
    std::sort(oa.begin(), oa.end(), [&](auto x, auto y) { return after[x] > after[y]; });
    CHECK(ob == oa);
}

TEST_CASE("every step distribution sums to one") {
    Rng rng(6);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = fixture::tiny_config();
        cfg.gid_length = 3;
        cfg.codebook_size = 5;
        Seq2SeqModel<float> model(cfg, seed);
        const auto state = model.encode_state(fixture::random_tokens(rng, cfg.vocab_size, 1, 10));
        for (const auto& prefix : {std::vector<std::uint32_t>{}, {2}, {4, 0}}) {
            const auto lp = model.step_log_probs(state, prefix);
            double total = 0.0;
            for (float v : lp) total += std::exp(static_cast<double>(v));
            CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("uniform model costs l ln K per example") {
    auto cfg = fixture::tiny_config();
    cfg.gid_length = 3;
    cfg.codebook_size = 4;
    Seq2SeqModel<double> model(cfg, 7);
    for (std::size_t t = 0; t < 3; ++t) model.parameter("codebook." + std::to_string(t)).value.fill(0.0);
    Graph<double> g;
    const auto enc = model.encode(g, std::vector<std::uint32_t>{3, 9});
    const Var nll = model.sequence_nll(g, enc, std::vector<std::uint32_t>{1, 3, 0});
    CHECK(g.value(nll)[0] == doctest::Approx(3.0 * std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("teacher-forced NLL equals step-by-step log-prob accumulation") {
    Rng rng(8);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto cfg = fixture::tiny_config();
        cfg.gid_length = 3;
        cfg.codebook_size = 4;
        Seq2SeqModel<double> model(cfg, seed);
        const auto x = fixture::random_tokens(rng, cfg.vocab_size, 1, 8);
        std::vector<std::uint32_t> gid(3);
        for (auto& z : gid) z = static_cast<std::uint32_t>(rng.uniform_index(4));
        Graph<double> g;
        const double nll = g.value(model.sequence_nll(g, model.encode(g, x), gid))[0];
        const auto state = model.encode_state(x);
        double oracle = 0.0;
        for (std::size_t t = 0; t < 3; ++t) {
            const std::vector<std::uint32_t> prefix(gid.begin(), gid.begin() + static_cast<long>(t));
            oracle -= model.step_log_probs(state, prefix)[gid[t]];
        }
        CHECK(nll == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("a sharply peaked model drives the NLL towards zero") {
    ModelConfig cfg = fixture::tiny_config();
    cfg.gid_length = 1;
    Seq2SeqModel<double> model(cfg, 9);
    Graph<double> g;
    const auto enc = model.encode(g, std::vector<std::uint32_t>{3});
    const auto d = g.value(model.decode(g, enc, {}));
    // codebook row 1 aligned with d_1, the others opposed
    auto& book = model.parameter("codebook.0").value;
    for (std::size_t k = 0; k < cfg.codebook_size; ++k)
        for (std::size_t c = 0; c < cfg.dim; ++c) book(k, c) = (k == 1 ? 1e3 : -1e3) * d(0, c);
    Graph<double> g2;
    const double nll = g2.value(model.sequence_nll(g2, model.encode(g2, std::vector<std::uint32_t>{3}),
                                                   std::vector<std::uint32_t>{1}))[0];
    CHECK(nll < 1e-9);
    CHECK(nll >= 0.0);
}

TEST_CASE("checkpoint round trip preserves outputs and architecture") {
    auto cfg = fixture::tiny_config();
    cfg.gid_length = 3;
    Seq2SeqModel<float> model(cfg, 10);
    const auto ckpt = model.to_checkpoint();
    const auto back = Seq2SeqModel<float>::from_checkpoint(ckpt);
    const auto c2 = Seq2SeqModel<float>::config_from_checkpoint(ckpt);
    CHECK(c2.dim == cfg.dim);
    CHECK(c2.gid_length == 3);
    CHECK(c2.codebook_size == cfg.codebook_size);
    CHECK(c2.vocab_size == cfg.vocab_size);
    auto copy = back;
    const std::vector<std::uint32_t> x{4, 5, 6};
    CHECK(model.step_log_probs(model.encode_state(x), std::vector<std::uint32_t>{1}) ==
          copy.step_log_probs(copy.encode_state(x), std::vector<std::uint32_t>{1}));
}

TEST_CASE("checkpoint with a wrong parameter shape is rejected") {
    Seq2SeqModel<double> model(fixture::tiny_config(), 11);
    auto records = model.to_checkpoint().records();
    for (auto& r : records) {
        if (r.name == "codebook.1") {
            r.shape = {r.shape[0] - 1, r.shape[1]};
            r.values.resize(r.shape[0] * r.shape[1]);
        }
    }
    CHECK_THROWS_AS(Seq2SeqModel<double>::from_checkpoint(Checkpoint(records)), Error);
}

TEST_CASE("float and double models agree for the same seed") {
    Seq2SeqModel<float> mf(fixture::tiny_config(), 12);
    Seq2SeqModel<double> md(fixture::tiny_config(), 12);
    const std::vector<std::uint32_t> x{2, 7, 11};
    const auto lf = mf.step_log_probs(mf.encode_state(x), {});
    const auto ld = md.step_log_probs(md.encode_state(x), {});
    for (std::size_t k = 0; k < lf.size(); ++k) CHECK(std::abs(lf[k] - ld[k]) < 1e-4);
}

TEST_CASE("snapshot and restore return the exact parameters") {
    Seq2SeqModel<double> model(fixture::tiny_config(), 13);
    const auto snap = model.snapshot();
    model.parameter("embed.tokens").value.fill(0.25);
    model.restore(snap);
    CHECK(model.snapshot() == snap);
    Seq2SeqModel<double> same(fixture::tiny_config(), 13);
    CHECK(same.snapshot() == snap);
}

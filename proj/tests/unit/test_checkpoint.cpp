#include <cmath>
#include <fstream>

#include "colarec/checkpoint.hpp"
#include "colarec/error.hpp"
#include "colarec/rng.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace colarec;

namespace {

Checkpoint sample() {
    Rng rng(5);
    Tensor<double> m = Tensor<double>::matrix(3, 4);
    for (auto& v : m.values()) v = rng.normal();
    Tensor<float> f({2, 2}, std::vector<float>{0.1f, -2.5f, 3.0e-8f, 7.0f});
    Checkpoint c;
    c.add(NamedTensor::from("m", m));
    c.add(NamedTensor::from("f", f));
    c.add(NamedTensor::scalar("meta/k", 32));
    return c;
}

}  // namespace

TEST_CASE("save then load returns identical tensors") {
    fixture::TempDir dir("ckpt");
    const Checkpoint c = sample();
    c.save(dir / "a.ckpt");
    const Checkpoint back = Checkpoint::load(dir / "a.ckpt");
    REQUIRE(back.records().size() == 3);
    CHECK(back.at("m").to_tensor<double>() == c.at("m").to_tensor<double>());
    CHECK(back.at("f").to_tensor<float>() == c.at("f").to_tensor<float>());
    CHECK(back.scalar("meta/k") == 32.0);
    CHECK(back.scalar_or("meta/missing") == std::nullopt);
    CHECK(back.find("nope") == nullptr);
    CHECK_THROWS_AS(back.at("nope"), Error);
}

TEST_CASE("saving is byte-stable") {
    fixture::TempDir dir("ckpt-stable");
    sample().save(dir / "a.ckpt");
    sample().save(dir / "b.ckpt");
    CHECK(fixture::read_file(dir / "a.ckpt") == fixture::read_file(dir / "b.ckpt"));
}

TEST_CASE("truncated file is rejected") {
    fixture::TempDir dir("ckpt-trunc");
    sample().save(dir / "a.ckpt");
    const std::string bytes = fixture::read_file(dir / "a.ckpt");
    for (std::size_t cut : {std::size_t{2}, std::size_t{7}, bytes.size() / 2, bytes.size() - 1}) {
        fixture::write_file(dir / "t.ckpt", bytes.substr(0, cut));
        CHECK_THROWS_AS(Checkpoint::load(dir / "t.ckpt"), Error);
    }
}

TEST_CASE("wrong magic is rejected") {
    fixture::TempDir dir("ckpt-magic");
    sample().save(dir / "a.ckpt");
    std::string bytes = fixture::read_file(dir / "a.ckpt");
    bytes[0] = 'X';
    fixture::write_file(dir / "m.ckpt", bytes);
    try {
        Checkpoint::load(dir / "m.ckpt");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::format);
    }
}

TEST_CASE("version mismatch is refused with a message") {
    fixture::TempDir dir("ckpt-version");
    sample().save(dir / "a.ckpt");
    std::string bytes = fixture::read_file(dir / "a.ckpt");
    bytes[4] = static_cast<char>(kCheckpointVersion + 1);
    fixture::write_file(dir / "v.ckpt", bytes);
    try {
        Checkpoint::load(dir / "v.ckpt");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
}

TEST_CASE("missing file is a missing-artifact error") {
    try {
        Checkpoint::load("/nonexistent/colarec.ckpt");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::missing_artifact);
        CHECK(std::string(e.what()).find("/nonexistent/colarec.ckpt") != std::string::npos);
    }
}

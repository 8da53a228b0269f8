#include "doctest.h"

#include <random>

#include "attrigraph/error.hpp"
#include "attrigraph/tensor.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace attrigraph;

TEST_CASE("conv2d_single: identity kernel returns the input") {
    std::mt19937 rng(1);
    const auto x = fixture::random_map(rng, 5, 7);
    Map2 k(3, 3);
    k.at(1, 1) = 1.0f;
    CHECK(conv2d_single(x, k) == x);
}

TEST_CASE("conv2d_single: hand-checked 3x3 with zero padding") {
    Map2 x(3, 3);
    for (std::size_t i = 0; i < 9; ++i) x.data[i] = static_cast<float>(i + 1);
    Map2 k(3, 3, 1.0f);
    const auto y = conv2d_single(x, k);
    // corner sees 1+2+4+5, centre sees everything
    CHECK(y.at(0, 0) == doctest::Approx(12.0));
    CHECK(y.at(1, 1) == doctest::Approx(45.0));
    CHECK(y.at(2, 2) == doctest::Approx(28.0));
}

TEST_CASE("conv2d_single: no kernel flip") {
    Map2 x(1, 3);
    x.data = {1.0f, 2.0f, 3.0f};
    Map2 k(1, 3);
    k.data = {0.0f, 0.0f, 1.0f};  // picks the right neighbour
    const auto y = conv2d_single(x, k);
    CHECK(y.data == std::vector<float>{2.0f, 3.0f, 0.0f});
}

TEST_CASE("conv2d_single matches the nested-loop reference") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t h = 1 + rng() % 12, w = 1 + rng() % 12;
        const std::size_t kh = 1 + 2 * (rng() % 3), kw = 1 + 2 * (rng() % 3);
        const auto x = fixture::random_map(rng, h, w);
        const auto k = fixture::random_map(rng, kh, kw);
        const auto got = conv2d_single(x, k);
        const auto want = oracle::conv_single(x, k);
        for (std::size_t i = 0; i < got.data.size(); ++i) CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-5));
    }
}

TEST_CASE("conv2d_single rejects even or empty kernels") {
    Map2 x(4, 4, 1.0f);
    CHECK_THROWS_AS(conv2d_single(x, Map2(2, 3)), Error);
    CHECK_THROWS_AS(conv2d_single(x, Map2()), Error);
}

TEST_CASE("conv2d_full with bias matches the reference; per-channel maps sum to it") {
    std::mt19937 rng(11);
    const auto x = fixture::random_tensor(rng, 6, 5, 4);
    const auto k = fixture::random_kernel(rng, 3, 3, 4, 3);
    const std::vector<float> bias = {0.1f, -0.2f, 0.3f};
    const auto y = conv2d_full(x, k, bias);
    const auto ref = oracle::conv_full(x, k, bias);
    REQUIRE(y.data.size() == ref.data.size());
    for (std::size_t i = 0; i < y.data.size(); ++i) CHECK(y.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-5));

    const auto nobias = conv2d_full(x, k);
    for (std::size_t j = 0; j < 3; ++j) {
        Map2 sum(6, 5);
        for (std::size_t i = 0; i < 4; ++i) {
            const auto m = conv2d_single(x.channel(i), k.slice(i, j));
            for (std::size_t p = 0; p < m.data.size(); ++p) sum.data[p] += m.data[p];
        }
        const auto full = nobias.channel(j);
        for (std::size_t p = 0; p < sum.data.size(); ++p) CHECK(sum.data[p] == doctest::Approx(full.data[p]).epsilon(1e-5));
    }
}

TEST_CASE("conv2d_full shape errors name both operands") {
    Tensor3 x(4, 4, 3);
    Kernel4 k(3, 3, 2, 1);
    try {
        conv2d_full(x, k);
        FAIL("expected a shape error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::shape_mismatch);
        CHECK(std::string(e.what()).find("4x4x3") != std::string::npos);
    }
    const std::vector<float> bad_bias = {1.0f, 2.0f};
    CHECK_THROWS_AS(conv2d_full(Tensor3(4, 4, 2), k, bad_bias), Error);
}

TEST_CASE("maxpool2 matches window scan and rejects odd extents") {
    std::mt19937 rng(3);
    const auto x = fixture::random_tensor(rng, 8, 6, 5);
    CHECK(maxpool2(x) == oracle::maxpool(x));
    CHECK_THROWS_AS(maxpool2(Tensor3(5, 4, 1)), Error);
    CHECK_THROWS_AS(maxpool2(Tensor3()), Error);
}

TEST_CASE("relu and channel_max") {
    Tensor3 x(2, 2, 2);
    x.data = {-1.0f, 2.0f, 3.0f, -4.0f, 0.5f, -0.5f, -2.0f, 1.0f};
    const auto r = relu(x);
    CHECK(r.data == std::vector<float>{0.0f, 2.0f, 3.0f, 0.0f, 0.5f, 0.0f, 0.0f, 1.0f});
    CHECK(channel_max(x) == std::vector<float>{3.0f, 2.0f});
}

TEST_CASE("channel / slice round trip") {
    std::mt19937 rng(5);
    auto x = fixture::random_tensor(rng, 3, 4, 2);
    const auto c1 = x.channel(1);
    Tensor3 y(3, 4, 2);
    y.set_channel(0, x.channel(0));
    y.set_channel(1, c1);
    CHECK(y == x);

    auto k = fixture::random_kernel(rng, 3, 1, 2, 2);
    const auto s = k.slice(1, 0);
    CHECK(s.height == 3);
    CHECK(s.width == 1);
    CHECK(s.at(2, 0) == k.at(2, 0, 1, 0));
    CHECK_NOTHROW(k.validate());
    k.data.pop_back();
    CHECK_THROWS_AS(k.validate(), Error);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "sigdla/mac_array.hpp"

using namespace sigdla;
using namespace sigdla::mac;

namespace {

int64_t rand_in(std::mt19937_64& rng, int bits) {
    int64_t lo = -(int64_t{1} << (bits - 1));
    int64_t hi = (int64_t{1} << (bits - 1)) - 1;
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
}

}  // namespace

TEST_CASE("mul4 basics") {
    CHECK(mul4(0xF, 0x2, true, false) == -2);  // (-1) * 2
    for (int x = 0; x < 16; ++x) {
        CHECK(mul4(0x0, static_cast<uint8_t>(x), true, true) == 0);
        CHECK(mul4(0x0, static_cast<uint8_t>(x), false, false) == 0);
    }
}

TEST_CASE("mul4 exhaustive against widened-integer multiply") {
    for (int a = 0; a < 16; ++a)
        for (int b = 0; b < 16; ++b)
            for (int flags = 0; flags < 4; ++flags) {
                bool as = flags & 1, bs = flags & 2;
                int av = as && (a & 8) ? a - 16 : a;
                int bv = bs && (b & 8) ? b - 16 : b;
                REQUIRE(mul4(static_cast<uint8_t>(a), static_cast<uint8_t>(b), as, bs) == av * bv);
            }
}

TEST_CASE("lanes_per_pe covers exactly {16,8,4,2,1}") {
    CHECK(lanes_per_pe({4, 4}) == 16);
    CHECK(lanes_per_pe({8, 4}) == 8);
    CHECK(lanes_per_pe({4, 8}) == 8);
    CHECK(lanes_per_pe({8, 8}) == 4);
    CHECK(lanes_per_pe({16, 4}) == 4);
    CHECK(lanes_per_pe({4, 16}) == 4);
    CHECK(lanes_per_pe({16, 8}) == 2);
    CHECK(lanes_per_pe({8, 16}) == 2);
    CHECK(lanes_per_pe({16, 16}) == 1);
    CHECK_THROWS_AS(lanes_per_pe({12, 8}), Error);
}

TEST_CASE("compose_mul worked example uses the documented partial schedule") {
    // 18 = 0x12, 52 = 0x34: 2*4<<0 + 1*4<<4 + 2*3<<4 + 1*3<<8 = 936.
    CHECK(compose_mul(18, 52, {8, 8}) == 936);
    CHECK(compose_mul(-128, 127, {8, 8}) == -16256);
    CHECK(compose_mul(0, 77, {8, 8}) == 0);
    CHECK(compose_mul(0, -8, {16, 4}) == 0);
    CHECK_THROWS_AS(compose_mul(200, 1, {8, 8}), Error);
}

TEST_CASE("compose_mul equals the direct product: exhaustive 8x8") {
    for (int a = -128; a <= 127; ++a)
        for (int w = -128; w <= 127; ++w)
            REQUIRE(compose_mul(a, w, {8, 8}) == int64_t{a} * w);
}

TEST_CASE("compose_mul equals the direct product: random 16x16 plus corners") {
    std::mt19937_64 rng(0xc0ffee);
    for (int i = 0; i < 100000; ++i) {
        int64_t a = rand_in(rng, 16), w = rand_in(rng, 16);
        REQUIRE(compose_mul(a, w, {16, 16}) == a * w);
    }
    for (int64_t a : {-32768ll, 32767ll})
        for (int64_t w : {-32768ll, 32767ll}) CHECK(compose_mul(a, w, {16, 16}) == a * w);
}

TEST_CASE("compose_mul equals the direct product on every mixed config") {
    std::mt19937_64 rng(0xdead10cc);
    for (int ab : {4, 8, 16})
        for (int wb : {4, 8, 16}) {
            BitwidthConfig cfg{ab, wb};
            for (int i = 0; i < 20000; ++i) {
                int64_t a = rand_in(rng, ab), w = rand_in(rng, wb);
                REQUIRE(compose_mul(a, w, cfg) == a * w);
            }
        }
}

TEST_CASE("pe_dot examples") {
    BitwidthConfig cfg44{4, 4};
    PeState pe;
    std::vector<int64_t> ones(16, 1);
    CHECK(pe_dot(pe, ones, ones, cfg44) == 16);

    PeState pe16;
    std::vector<int64_t> a{-32768}, w{-32768};
    CHECK(pe_dot(pe16, a, w, {16, 16}) == 1073741824);

    PeState bad;
    std::vector<int64_t> three(3, 1);
    CHECK_THROWS_AS(pe_dot(bad, three, three, cfg44), Error);
}

TEST_CASE("pe_dot accumulates across calls and detects overflow") {
    PeState pe;
    std::vector<int64_t> a{-32768}, w{-32768};
    CHECK(pe_dot(pe, a, w, {16, 16}) == 1073741824);
    // A second maximal product pushes the lane accumulator past 2^31-1.
    CHECK_THROWS_AS(pe_dot(pe, a, w, {16, 16}), EngineFault);
}

TEST_CASE("pe_dot matches a scalar dot-product oracle") {
    std::mt19937_64 rng(0x5eed);
    for (int ab : {4, 8, 16})
        for (int wb : {4, 8, 16}) {
            BitwidthConfig cfg{ab, wb};
            int lanes = lanes_per_pe(cfg);
            for (int trial = 0; trial < 2000; ++trial) {
                std::vector<int64_t> a(lanes), w(lanes);
                int64_t expect = 0;
                for (int l = 0; l < lanes; ++l) {
                    a[l] = rand_in(rng, ab);
                    w[l] = rand_in(rng, wb);
                    expect += a[l] * w[l];
                }
                PeState pe;
                REQUIRE(pe_dot(pe, a, w, cfg) == expect);
            }
        }
}

TEST_CASE("array_step broadcast symmetry and one-hot selection") {
    BitwidthConfig cfg{4, 4};
    std::mt19937_64 rng(0xbead);
    std::vector<int64_t> acts(16);
    for (auto& v : acts) v = rand_in(rng, 4);

    std::vector<int64_t> shared(16);
    for (auto& v : shared) v = rand_in(rng, 4);
    std::vector<std::span<const int64_t>> same(8, std::span<const int64_t>(shared));
    ArrayState st;
    auto out = array_step(st, acts, same, cfg);
    for (int p = 1; p < 8; ++p) CHECK(out[p] == out[0]);

    // weight_sets[k] = one-hot(k) selects activation k.
    std::vector<std::vector<int64_t>> onehot(8, std::vector<int64_t>(16, 0));
    std::vector<std::span<const int64_t>> views;
    for (int k = 0; k < 8; ++k) {
        onehot[k][k] = 1;
        views.emplace_back(onehot[k]);
    }
    ArrayState st2;
    auto sel = array_step(st2, acts, views, cfg);
    for (int k = 0; k < 8; ++k) CHECK(sel[k] == acts[k]);
}

TEST_CASE("array_step equals eight independent dot products") {
    std::mt19937_64 rng(0x1234);
    BitwidthConfig cfg{8, 8};
    int lanes = lanes_per_pe(cfg);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<int64_t> acts(lanes);
        for (auto& v : acts) v = rand_in(rng, 8);
        std::vector<std::vector<int64_t>> w(8, std::vector<int64_t>(lanes));
        std::vector<std::span<const int64_t>> views;
        std::array<int64_t, 8> expect{};
        for (int p = 0; p < 8; ++p) {
            for (int l = 0; l < lanes; ++l) {
                w[p][l] = rand_in(rng, 8);
                expect[p] += acts[l] * w[p][l];
            }
            views.emplace_back(w[p]);
        }
        ArrayState st;
        auto out = array_step(st, acts, views, cfg);
        REQUIRE(out == expect);
    }
}

TEST_CASE("throughput: products per step never increase with operand width") {
    int prev = 17;
    for (int w : {4, 8, 16}) {
        int lanes = lanes_per_pe({w, w});
        CHECK(lanes < prev);
        prev = lanes;
    }
    CHECK(lanes_per_pe({8, 8}) <= lanes_per_pe({8, 4}));
    CHECK(lanes_per_pe({16, 8}) <= lanes_per_pe({8, 8}));
}

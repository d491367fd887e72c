#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>

#include "sigdla/engine.hpp"
#include "sigdla/mapper.hpp"
#include "sigdla/quantize.hpp"
#include "sigdla/reference.hpp"
#include "sigdla/workload.hpp"

using namespace sigdla;

namespace {

const MachineConfig kMc{};

int64_t rand_in(std::mt19937_64& rng, int bits) {
    return std::uniform_int_distribution<int64_t>(-(int64_t{1} << (bits - 1)),
                                                  (int64_t{1} << (bits - 1)) - 1)(rng);
}

// Static well-formedness: complete shuffle config before any shuffle-exec,
// trailing halt, conv addresses inside the buffer.
void check_well_formed(const Lowered& low, const MachineConfig& mc) {
    std::array<bool, 16> configured{};
    bool sealed = false;
    uint64_t words = static_cast<uint64_t>(mc.banks) * mc.bank_kib * 1024 / 8;
    REQUIRE(!low.program.code.empty());
    REQUIRE(std::holds_alternative<isa::Halt>(low.program.code.back()));
    for (const auto& ins : low.program.code) {
        if (const auto* cs = std::get_if<isa::CtrlShuffling>(&ins)) {
            configured[cs->unit_num] = true;
            sealed = cs->finish_flag;
        } else if (std::holds_alternative<isa::ShuffleExec>(ins)) {
            for (bool c : configured) REQUIRE(c);
            REQUIRE(sealed);
        } else if (const auto* cv = std::get_if<isa::ConvExec>(&ins)) {
            uint64_t fmap_end =
                cv->fmap_base +
                ((static_cast<uint64_t>(cv->out_rows - 1) * cv->row_stride + cv->k_len) * 16 + 63) / 64;
            REQUIRE(fmap_end <= words);
            REQUIRE(cv->out_base < words);
            REQUIRE(cv->weight_base < words);
        }
    }
}

std::vector<int64_t> quantize_complex(const std::vector<std::complex<double>>& x, int bits) {
    std::vector<int64_t> out;
    for (auto& v : x) {
        out.push_back(quantize_one(v.real(), bits, bits - 2));
        out.push_back(quantize_one(v.imag(), bits, bits - 2));
    }
    return out;
}

}  // namespace

TEST_CASE("fft schedule at float precision equals DFT/n") {
    std::mt19937_64 rng(0xf10a7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (uint32_t n : {8u, 64u, 256u}) {
        std::vector<std::complex<double>> x(n);
        ref::ComplexVec xv;
        for (auto& v : x) {
            v = {dist(rng), dist(rng)};
            xv.re.push_back(v.real());
            xv.im.push_back(v.imag());
        }
        auto got = fft_schedule_float(x);
        auto X = ref::dft_oracle(xv);
        for (uint32_t k = 0; k < n; ++k) {
            REQUIRE(std::abs(got[k].real() - X.re[k] / n) < 1e-9);
            REQUIRE(std::abs(got[k].imag() - X.im[k] / n) < 1e-9);
        }
    }
}

TEST_CASE("mapped fft: DC pair at n=2") {
    Lowered low = map_fft(2, {16, 16}, kMc);
    check_well_formed(low, kMc);
    std::vector<int64_t> input{16384, 0, 16384, 0};  // [1+0j, 1+0j] at Q14
    auto res = run(low, input, kMc);
    CHECK(res.outputs == std::vector<int64_t>{16384, 0, 0, 0});
}

TEST_CASE("mapped fft matches the fixed-point golden model bit-exactly") {
    std::mt19937_64 rng(0xfe57);
    std::uniform_real_distribution<double> dist(-0.95, 0.95);
    for (uint32_t n : {8u, 128u}) {
        std::vector<std::complex<double>> x(n);
        for (auto& v : x) v = {dist(rng), dist(rng)};
        auto input = quantize_complex(x, 16);
        Lowered low = map_fft(n, {16, 16}, kMc);
        check_well_formed(low, kMc);
        auto res = run(low, input, kMc);
        auto golden = ref::golden_fft_fixed(input, 16);
        REQUIRE(res.outputs == golden);

        // Executed MACs include the padded 1/0 lanes, so they dominate the
        // analytic count.
        Workload w;
        w.kind = Workload::Kind::Fft;
        w.fft_n = n;
        CHECK(res.report.mac_ops >= count_mult_adds(w));
    }
}

TEST_CASE("mapped fft tracks the double-precision DFT/n") {
    std::mt19937_64 rng(0x0f0f);
    std::uniform_real_distribution<double> dist(-0.95, 0.95);
    uint32_t n = 128;
    std::vector<std::complex<double>> x(n);
    ref::ComplexVec xv;
    for (auto& v : x) {
        v = {dist(rng), dist(rng)};
        xv.re.push_back(v.real());
        xv.im.push_back(v.imag());
    }
    Lowered low = map_fft(n, {16, 16}, kMc);
    auto res = run(low, quantize_complex(x, 16), kMc);
    auto X = ref::dft_oracle(xv);
    double err = 0, ref_e = 0;
    for (uint32_t k = 0; k < n; ++k) {
        double gr = static_cast<double>(res.outputs[2 * k]) * low.plan.output_scale;
        double gi = static_cast<double>(res.outputs[2 * k + 1]) * low.plan.output_scale;
        double tr = X.re[k] / n, ti = X.im[k] / n;
        err += (gr - tr) * (gr - tr) + (gi - ti) * (gi - ti);
        ref_e += tr * tr + ti * ti;
    }
    CHECK(std::sqrt(err / ref_e) < 2e-3);
}

TEST_CASE("map_fft rejects bad sizes") {
    CHECK_THROWS_AS(map_fft(96, {16, 16}, kMc), MapError);
    CHECK_THROWS_AS(map_fft(8192, {16, 16}, kMc), MapError);
    CHECK_THROWS_AS(map_fft(128, {16, 8}, kMc), MapError);
}

TEST_CASE("mapped fir: identity filter returns the input") {
    std::vector<int64_t> taps{1};
    Lowered low = map_fir(taps, 32, {8, 8}, kMc, true);
    check_well_formed(low, kMc);
    std::mt19937_64 rng(0xf1);
    std::vector<int64_t> x(32);
    for (auto& v : x) v = rand_in(rng, 8);
    auto res = run(low, x, kMc);
    CHECK(res.outputs == x);
    CHECK(res.report.total_cycles > 0);
}

TEST_CASE("mapped fir accumulators are bit-exact against the oracle") {
    std::mt19937_64 rng(0xf1b);
    for (auto cfg : {mac::BitwidthConfig{4, 4}, {8, 8}, {8, 4}, {16, 16}, {16, 8}}) {
        // Operand magnitudes leave headroom so exact accumulators fit 32 bits.
        int ab = std::min(cfg.a_bits, 10), wb = std::min(cfg.w_bits, 10);
        for (int trial = 0; trial < 20; ++trial) {
            uint32_t taps = 1 + static_cast<uint32_t>(rng() % 12);
            uint32_t len = taps + static_cast<uint32_t>(rng() % 80);
            std::vector<int64_t> h(taps), x(len);
            for (auto& v : h) v = rand_in(rng, wb);
            for (auto& v : x) v = rand_in(rng, ab);
            Lowered low = map_fir(h, len, cfg, kMc, true);
            auto res = run(low, x, kMc);
            REQUIRE(res.outputs == ref::fir_oracle(x, h));
        }
    }
}

TEST_CASE("fir requantized outputs follow the plan shift") {
    std::mt19937_64 rng(0x9f);
    std::vector<int64_t> h{3, -7, 2, 9, -1, 4, 4, -8};
    std::vector<int64_t> x(200);
    for (auto& v : x) v = rand_in(rng, 8);
    Lowered low = map_fir(h, 200, {8, 8}, kMc, false);
    auto res = run(low, x, kMc);
    REQUIRE(low.plan.stage_requant_shifts.size() == 1);
    auto acc = ref::fir_oracle(x, h);
    for (std::size_t i = 0; i < acc.size(); ++i)
        REQUIRE(res.outputs[i] == rne_shift(acc[i], low.plan.stage_requant_shifts[0]));
}

TEST_CASE("mapped dct: constant block concentrates in DC, zero block gives zero") {
    Lowered low = map_dct({16, 8}, kMc, 1, 8);
    check_well_formed(low, kMc);
    std::vector<int64_t> block(64, 37);
    auto res = run(low, block, kMc);
    CHECK(res.outputs[0] != 0);
    for (std::size_t i = 1; i < 64; ++i) CHECK(res.outputs[i] == 0);

    std::vector<int64_t> zeros(64, 0);
    auto rz = run(low, zeros, kMc);
    for (int64_t v : rz.outputs) CHECK(v == 0);
}

TEST_CASE("mapped dct tracks the double-precision oracle within 1e-2") {
    std::mt19937_64 rng(0xdc7);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int64_t> block(64);
        for (auto& v : block) v = rand_in(rng, 8);
        Lowered low = map_dct({16, 8}, kMc, 1, 8);
        auto res = run(low, block, kMc);
        std::vector<double> in(64), got(64);
        for (int i = 0; i < 64; ++i) {
            in[static_cast<std::size_t>(i)] = static_cast<double>(block[static_cast<std::size_t>(i)]);
            got[static_cast<std::size_t>(i)] =
                static_cast<double>(res.outputs[static_cast<std::size_t>(i)]) * low.plan.output_scale;
        }
        auto want = ref::dct2d_oracle(in);
        double err = 0, ref_e = 0;
        for (int i = 0; i < 64; ++i) {
            err += (got[static_cast<std::size_t>(i)] - want[static_cast<std::size_t>(i)]) *
                   (got[static_cast<std::size_t>(i)] - want[static_cast<std::size_t>(i)]);
            ref_e += want[static_cast<std::size_t>(i)] * want[static_cast<std::size_t>(i)];
        }
        worst = std::max(worst, std::sqrt(err / ref_e));
    }
    CHECK(worst < 1e-2);
}

TEST_CASE("mapped dwt: Haar detail of a constant input is zero everywhere") {
    auto qh = quantize_one(1.0 / std::sqrt(2.0), 8, 6);
    std::vector<int64_t> lo{qh, qh}, hi{qh, -qh};
    Lowered low = map_dwt(lo, hi, 64, 2, {8, 8}, kMc);
    check_well_formed(low, kMc);
    std::vector<int64_t> x(64, 21);
    auto res = run(low, x, kMc);
    // Output layout: [hi level 1 (32)][hi level 2 (16)][lo level 2 (16)].
    REQUIRE(res.outputs.size() == 64);
    for (std::size_t i = 0; i < 48; ++i) CHECK(res.outputs[i] == 0);
    for (std::size_t i = 48; i < 64; ++i) CHECK(res.outputs[i] != 0);
}

TEST_CASE("mapped dwt matches the staged integer oracle") {
    std::mt19937_64 rng(0xd37);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int64_t> lo(4), hi(4);
        for (auto& v : lo) v = rand_in(rng, 8);
        for (auto& v : hi) v = rand_in(rng, 8);
        uint32_t levels = 1 + static_cast<uint32_t>(rng() % 2);
        std::vector<int64_t> x(256);
        for (auto& v : x) v = rand_in(rng, 8);
        Lowered low = map_dwt(lo, hi, 256, levels, {8, 8}, kMc);
        auto res = run(low, x, kMc);
        auto want = ref::dwt_oracle(x, lo, hi, static_cast<int>(levels), low.plan.dwt_level_shift);
        std::vector<int64_t> flat;
        for (const auto& b : want.hi_bands) flat.insert(flat.end(), b.begin(), b.end());
        flat.insert(flat.end(), want.lo_final.begin(), want.lo_final.end());
        REQUIRE(res.outputs == flat);
    }
}

TEST_CASE("dwt level sizes: levels=2 gives [n/2 hi, n/4 hi, n/4 lo]") {
    auto qh = quantize_one(1.0 / std::sqrt(2.0), 8, 6);
    std::vector<int64_t> lo{qh, qh}, hi{qh, -qh};
    Lowered low = map_dwt(lo, hi, 128, 2, {8, 8}, kMc);
    REQUIRE(low.plan.outputs.size() == 3);
    CHECK(low.plan.outputs[0].count == 64);
    CHECK(low.plan.outputs[1].count == 32);
    CHECK(low.plan.outputs[2].count == 32);
}

TEST_CASE("mapped conv: exact-fit 1x1 layer is a single array step") {
    ConvLayerDesc d;
    d.in_h = d.in_w = 1;
    d.in_c = 16;
    d.k = 1;
    d.out_c = 8;
    d.stride = 1;
    d.weights.assign(16 * 8, 1);
    Lowered low = map_conv_layer(d, {4, 4}, kMc, true);
    check_well_formed(low, kMc);
    std::vector<int64_t> x(16, 1);
    auto res = run(low, x, kMc);
    CHECK(res.report.mac_ops == 16 * 8);  // one step of the full array
    for (int64_t v : res.outputs) CHECK(v == 16);
}

TEST_CASE("mapped conv layers are bit-exact against the direct oracle") {
    std::mt19937_64 rng(0xc0);
    for (auto cfg : {mac::BitwidthConfig{4, 4}, {8, 8}, {8, 4}, {16, 16}}) {
        int ab = std::min(cfg.a_bits, 10), wb = std::min(cfg.w_bits, 10);
        for (int trial = 0; trial < 10; ++trial) {
            ConvLayerDesc d;
            d.in_h = 3 + static_cast<uint32_t>(rng() % 5);
            d.in_w = 3 + static_cast<uint32_t>(rng() % 5);
            d.in_c = 1 + static_cast<uint32_t>(rng() % 6);
            d.k = 1 + static_cast<uint32_t>(rng() % 3);
            if (d.k > d.in_h || d.k > d.in_w) d.k = 1;
            d.out_c = 1 + static_cast<uint32_t>(rng() % 12);
            d.stride = 1 + static_cast<uint32_t>(rng() % 2);
            d.same_pad = (rng() & 1) != 0;
            d.weights.resize(static_cast<std::size_t>(d.out_c) * d.k * d.k * d.in_c);
            for (auto& v : d.weights) v = rand_in(rng, wb);
            std::vector<int64_t> x(static_cast<std::size_t>(d.in_h) * d.in_w * d.in_c);
            for (auto& v : x) v = rand_in(rng, ab);

            Lowered low = map_conv_layer(d, cfg, kMc, true);
            auto res = run(low, x, kMc);
            auto got = reassemble_conv_output(low.plan, res.outputs);
            auto want = ref::conv_oracle(x, static_cast<int>(d.in_h), static_cast<int>(d.in_w),
                                         static_cast<int>(d.in_c), d.weights,
                                         static_cast<int>(d.k), static_cast<int>(d.out_c),
                                         static_cast<int>(d.stride), d.same_pad);
            REQUIRE(got == want);
        }
    }
}

TEST_CASE("conv rejects kernels larger than the input") {
    ConvLayerDesc d;
    d.in_h = d.in_w = 2;
    d.in_c = 1;
    d.k = 3;
    d.out_c = 1;
    d.weights.assign(9, 1);
    CHECK_THROWS_AS(map_conv_layer(d, {8, 8}, kMc, true), MapError);
}

TEST_CASE("single-stage pipeline equals the stage's own mapping") {
    Workload fir;
    fir.kind = Workload::Kind::Fir;
    fir.fir_taps = {2, -1, 3};
    fir.fir_length = 50;
    fir.cfg = {8, 8};
    fir.wide_output = true;
    Lowered direct = map_workload(fir, kMc);
    std::vector<Workload> stages{fir};
    Lowered piped = map_pipeline(stages, kMc, true);
    CHECK(direct.program == piped.program);
}

TEST_CASE("count_mult_adds analytic values") {
    Workload fft;
    fft.kind = Workload::Kind::Fft;
    fft.fft_n = 1024;
    CHECK(count_mult_adds(fft) == 51200);

    Workload fir;
    fir.kind = Workload::Kind::Fir;
    fir.fir_taps.assign(80, 1);
    fir.fir_length = 256;
    CHECK(count_mult_adds(fir) == 20480);

    Workload conv;
    conv.kind = Workload::Kind::ConvLayer;
    conv.conv = {32, 32, 3, 3, 64, 1, true, {}, 1};
    CHECK(count_mult_adds(conv) == 9ull * 3 * 64 * 32 * 32);
}

TEST_CASE("pipeline with spilled conv stage is rejected") {
    Workload fft;
    fft.kind = Workload::Kind::Fft;
    fft.fft_n = 128;
    fft.cfg = {8, 8};
    Workload conv;
    conv.kind = Workload::Kind::ConvLayer;
    conv.conv = {16, 8, 2, 3, 4, 1, true, {}, 1};  // 3x3 cannot chain on-chip
    conv.cfg = {8, 4};
    std::vector<Workload> stages{fft, conv};
    CHECK_THROWS_AS(map_pipeline(stages, kMc, true), MapError);
}

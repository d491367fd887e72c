#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "sigdla/engine.hpp"
#include "sigdla/mapper.hpp"
#include "sigdla/reference.hpp"

using namespace sigdla;

namespace {
const MachineConfig kMc{};

isa::Program assemble_lines(const std::string& text) { return isa::assemble(text); }
}  // namespace

TEST_CASE("halt is a terminal one-cycle step") {
    Machine m(kMc);
    isa::Program p;
    p.code = {isa::Halt{}};
    step(m, p);
    CHECK(m.halted);
    CHECK(m.compute_cycles == 1);
    CHECK_THROWS_AS(step(m, p), EngineFault);
}

TEST_CASE("element accessors round-trip at every width") {
    OnChipBuffer buf;
    std::mt19937_64 rng(0xe1e);
    for (int bits : {4, 8, 16, 32}) {
        for (int i = 0; i < 200; ++i) {
            uint64_t idx = rng() % 500;
            int64_t v = std::uniform_int_distribution<int64_t>(
                -(int64_t{1} << (bits - 1)), (int64_t{1} << (bits - 1)) - 1)(rng);
            write_element(buf, 100, idx, bits, v);
            REQUIRE(read_element(buf, 100, idx, bits) == v);
        }
    }
    CHECK_THROWS_AS(write_element(buf, 0, 0, 8, 200), EngineFault);
}

TEST_CASE("shuffle-exec cost: 1 shuffle + 1 read + 1 write cycle per word") {
    std::string src;
    for (int u = 0; u < 16; ++u)
        src += "ctrl-shuffling unit=" + std::to_string(u) + " sel=0 split=" + std::to_string(u) +
               (u == 15 ? " finish=1\n" : " finish=0\n");
    src += "rd-buf bank-start=0 bank-offset=0 length=4\n";
    src += "shuffle-exec src=0 dst=32 count=4\n";
    src += "wr-buf bank-start=1 bank-offset=0 length=4\n";
    src += "halt\n";
    isa::Program p = assemble_lines(src);
    Machine m(kMc);
    while (!m.halted) step(m, p);
    // 16 config + 1 rd-buf + 1 wr-buf + (4 + 4 + 4) for the exec itself.
    CHECK(m.shuffle_cycles == 16 + 1 + 1 + 12);
    CHECK(m.compute_cycles == 1);  // halt
    CHECK(m.dma_cycles == 0);
}

TEST_CASE("shuffle-exec with identity config copies a word through staging") {
    OnChipBuffer* buf = nullptr;
    Machine m(kMc);
    buf = &m.onchip;
    buf->write_word_index(3, 0xfeedfacecafebeefull);
    std::string src;
    for (int u = 0; u < 16; ++u)
        src += "ctrl-shuffling unit=" + std::to_string(u) + " sel=3 split=" + std::to_string(u) +
               (u == 15 ? " finish=1\n" : " finish=0\n");
    src += "rd-buf bank-start=0 bank-offset=0 length=4\n";
    src += "shuffle-exec src=0 dst=32 count=1\n";
    src += "wr-buf bank-start=0 bank-offset=8 length=1\n";
    src += "halt\n";
    isa::Program p = assemble_lines(src);
    while (!m.halted) step(m, p);
    CHECK(m.onchip.read_word_index(8) == 0xfeedfacecafebeefull);
}

TEST_CASE("shuffle-exec faults without a finished configuration") {
    isa::Program p = assemble_lines(
        "rd-buf bank-start=0 bank-offset=0 length=4\n"
        "shuffle-exec src=0 dst=32 count=1\n");
    Machine m(kMc);
    step(m, p);
    CHECK_THROWS_AS(step(m, p), EngineFault);
}

TEST_CASE("conv-exec charges one cycle per array step") {
    // rows=5, k=8 at {8,8} (4 lanes) -> 2 steps per row -> 10 array steps.
    isa::Program p = assemble_lines(
        "ctrl-bitwidth a=8 w=8\n"
        "conv-exec fmap=0 weight=64 out=128 rows=5 cols=1 k=8 stride=1 shift=0 wide=1 transpose=0\n"
        "halt\n");
    Machine m(kMc);
    while (!m.halted) step(m, p);
    CHECK(m.compute_cycles == 2 + 10);  // ctrl-bitwidth + halt + 10 steps
    CHECK(m.mac_ops == 10 * 4 * 1);
}

TEST_CASE("conv-exec detects accumulator overflow") {
    Machine m(kMc);
    // Two maximal 16-bit products exceed the 32-bit lane accumulator.
    for (uint64_t k = 0; k < 2; ++k) {
        write_element(m.onchip, 0, k, 16, -32768);
        write_element(m.onchip, 8, k, 16, -32768);
    }
    isa::Program p = assemble_lines(
        "ctrl-bitwidth a=16 w=16\n"
        "conv-exec fmap=0 weight=8 out=16 rows=1 cols=1 k=2 stride=1 shift=0 wide=1 transpose=0\n"
        "halt\n");
    step(m, p);
    CHECK_THROWS_AS(step(m, p), EngineFault);
}

TEST_CASE("requantized outputs that exceed the element width fault") {
    Machine m(kMc);
    write_element(m.onchip, 0, 0, 8, 127);
    write_element(m.onchip, 8, 0, 8, 127);
    isa::Program p = assemble_lines(
        "ctrl-bitwidth a=8 w=8\n"
        "conv-exec fmap=0 weight=8 out=16 rows=1 cols=1 k=1 stride=1 shift=0 wide=0 transpose=0\n"
        "halt\n");
    step(m, p);
    CHECK_THROWS_AS(step(m, p), EngineFault);  // 127*127 does not fit int8
}

TEST_CASE("cycle budget exhaustion is an error, not a hang") {
    MachineConfig mc;
    mc.cycle_budget = 8;
    std::vector<int64_t> taps{1, 2, 3};
    Lowered low = map_fir(taps, 64, {8, 8}, mc, true);
    std::vector<int64_t> x(64, 1);
    CHECK_THROWS_AS(run(low, x, mc), EngineFault);
}

TEST_CASE("dma instructions move data and charge the bandwidth model") {
    Machine m(kMc);
    std::vector<uint8_t> payload(64);
    for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<uint8_t>(i);
    m.offchip.write_bytes(4096, payload);
    isa::Program p = assemble_lines(
        "load-tile dram=4096 bank-start=0 bank-offset=0 bytes=64\n"
        "store-tile dram=8192 bank-start=0 bank-offset=0 bytes=64\n"
        "halt\n");
    while (!m.halted) step(m, p);
    CHECK(m.dma_cycles == 2 * (20 + 4));
    std::vector<uint8_t> back(64);
    m.offchip.read_bytes(8192, back);
    CHECK(back == payload);
}

TEST_CASE("dma out of bounds raises a memory fault") {
    Machine m(kMc);
    isa::Program p;
    p.code = {isa::LoadTile{(16ull << 20) - 8, 0, 0, 64}, isa::Halt{}};
    CHECK_THROWS_AS(step(m, p), MemoryFault);
}

TEST_CASE("runs are deterministic: identical programs give identical reports") {
    std::vector<int64_t> taps{5, -3, 2, 7};
    Lowered low = map_fir(taps, 100, {8, 8}, kMc, true);
    std::mt19937_64 rng(0xdede);
    std::vector<int64_t> x(100);
    for (auto& v : x) v = std::uniform_int_distribution<int64_t>(-100, 100)(rng);
    auto a = run(low, x, kMc);
    auto b = run(low, x, kMc);
    CHECK(a.outputs == b.outputs);
    CHECK(a.report.total_cycles == b.report.total_cycles);
    CHECK(a.report.compute_cycles == b.report.compute_cycles);
    CHECK(a.report.shuffle_cycles == b.report.shuffle_cycles);
    CHECK(a.report.dma_cycles == b.report.dma_cycles);
    CHECK(a.report.mac_ops == b.report.mac_ops);
    CHECK(a.report.total_cycles ==
          a.report.compute_cycles + a.report.shuffle_cycles + a.report.dma_cycles +
              a.report.stall_cycles);
}

TEST_CASE("mac_ops equals the per-conv-exec lane product sum") {
    Lowered low = map_fir(std::vector<int64_t>{1, 2, 3, 4, 5}, 64, {8, 8}, kMc, true);
    std::vector<int64_t> x(64, 1);
    auto res = run(low, x, kMc);
    uint64_t expect = 0;
    int lanes = mac::lanes_per_pe({8, 8});
    for (const auto& ins : low.program.code) {
        if (const auto* c = std::get_if<isa::ConvExec>(&ins)) {
            uint64_t steps_per_row = (c->k_len + static_cast<uint32_t>(lanes) - 1) /
                                     static_cast<uint32_t>(lanes);
            for (uint32_t c0 = 0; c0 < c->out_cols; c0 += 8) {
                uint32_t nc = std::min(8u, c->out_cols - c0);
                expect += steps_per_row * c->out_rows * static_cast<uint64_t>(lanes) * nc;
            }
        }
    }
    CHECK(res.report.mac_ops == expect);
}

TEST_CASE("overlap schedule charges max(dma, compute+shuffle)") {
    std::vector<int64_t> taps{1, 2, 3, 4};
    MachineConfig seq = kMc;
    MachineConfig ovl = kMc;
    ovl.overlap_dma = true;
    std::vector<int64_t> x(256, 1);
    Lowered low_seq = map_fir(taps, 256, {8, 8}, seq, true);
    auto rs = run(low_seq, x, seq);
    Lowered low_ovl = map_fir(taps, 256, {8, 8}, ovl, true);
    auto ro = run(low_ovl, x, ovl);
    CHECK(rs.report.total_cycles ==
          rs.report.compute_cycles + rs.report.shuffle_cycles + rs.report.dma_cycles);
    CHECK(ro.report.total_cycles ==
          std::max(ro.report.dma_cycles, ro.report.compute_cycles + ro.report.shuffle_cycles));
    CHECK(ro.report.total_cycles <= rs.report.total_cycles);
}

TEST_CASE("fused pipeline: no inter-stage DMA; staged variant round-trips") {
    Workload fft;
    fft.kind = Workload::Kind::Fft;
    fft.fft_n = 128;
    fft.cfg = {8, 8};
    Workload conv1;
    conv1.kind = Workload::Kind::ConvLayer;
    conv1.conv = {16, 8, 2, 1, 8, 1, false, {}, 42};
    conv1.cfg = {8, 4};
    Workload conv2;
    conv2.kind = Workload::Kind::ConvLayer;
    conv2.conv = {16, 8, 8, 1, 4, 1, false, {}, 43};
    conv2.cfg = {8, 4};
    std::vector<Workload> stages{fft, conv1, conv2};

    Lowered fused = map_pipeline(stages, kMc, true);
    Lowered staged = map_pipeline(stages, kMc, false);

    std::mt19937_64 rng(0xcafe);
    std::vector<int64_t> input(fused.plan.input.count);
    for (auto& v : input) v = std::uniform_int_distribution<int64_t>(-63, 63)(rng);

    auto rf = run(fused, input, kMc);
    auto rs = run(staged, input, kMc);
    CHECK(rf.report.inter_stage_dma_bytes == 0);
    CHECK(rs.report.inter_stage_dma_bytes > 0);
    CHECK(rf.outputs == rs.outputs);
    CHECK(rs.report.total_cycles > rf.report.total_cycles);
}

TEST_CASE("compare_configs of identical configs is exactly 1") {
    Workload fir;
    fir.kind = Workload::Kind::Fir;
    fir.fir_taps = {1, 2, 3, 4, 5, 6, 7, 8};
    fir.fir_length = 200;
    CHECK(compare_configs(fir, {8, 8}, {8, 8}, kMc) == 1.0);
}

TEST_CASE("machine config json round-trips with defaults") {
    auto mc = machine_from_json_text("{\"bandwidth_mb_s\": 3200, \"overlap_dma\": true}");
    CHECK(mc.bandwidth_mb_s == 3200);
    CHECK(mc.overlap_dma);
    CHECK(mc.banks == 18);
    CHECK_THROWS_AS(machine_from_json_text("{\"bandwidth_mb_s\": 0}"), Error);
}

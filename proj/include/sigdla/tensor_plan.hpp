#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigdla/isa.hpp"

namespace sigdla {

// A named constant tensor preloaded into off-chip memory.
struct ConstTensor {
    std::string name;
    uint64_t dram_addr = 0;
    std::vector<uint8_t> bytes;
};

// Where the runtime input lands in off-chip memory. Values are packed
// little-endian at elem_bits starting elem_offset elements into the region;
// when expand_map is non-empty each expanded element e takes input value
// expand_map[e] (or 0 for -1), which is how im2col layouts are realized.
struct InputDesc {
    uint64_t dram_addr = 0;
    uint64_t region_bytes = 0;
    uint64_t elem_offset = 0;
    uint32_t elem_bits = 8;
    uint64_t count = 0;  // logical input element count
    int frac_bits = 0;   // quantization format the CLI applies to real inputs
    bool complex_pairs = false;
};

struct OutputSegment {
    bool on_chip = false;  // fused-pipeline intermediates stay on chip
    uint64_t byte_addr = 0;
    uint32_t elem_bits = 8;
    uint64_t count = 0;
};

// Output block bookkeeping for tiled convolutions: segment `segment` holds
// rows [row0, row0+rows) x kernels [m0, m0+cols) in row-major order.
struct ConvBlock {
    uint32_t segment = 0;
    uint32_t row0 = 0, rows = 0;
    uint32_t m0 = 0, cols = 0;
};

struct TensorPlan {
    std::vector<ConstTensor> constants;
    InputDesc input;
    std::vector<int32_t> expand_map;
    std::vector<OutputSegment> outputs;
    std::vector<ConvBlock> conv_blocks;

    double output_scale = 1.0;  // real value = integer output * output_scale
    int dwt_level_shift = 0;
    std::vector<int> stage_requant_shifts;  // one per requantizing pass, in emission order

    // DMA executed in [prologue_end_pc, epilogue_start_pc) is inter-stage
    // traffic; a fused pipeline keeps this at zero bytes.
    uint32_t prologue_end_pc = 0;
    uint32_t epilogue_start_pc = 0;
    std::vector<std::pair<uint32_t, uint32_t>> stage_pc_spans;

    uint64_t dram_bytes = 0;
    uint64_t analytic_mult_adds = 0;

    uint64_t output_count() const {
        uint64_t n = 0;
        for (const auto& s : outputs) n += s.count;
        return n;
    }
};

struct Lowered {
    isa::Program program;
    TensorPlan plan;
};

std::string plan_to_json(const TensorPlan& plan);

// Serializes the plan JSON next to raw tensor binaries (one file per
// constant) under dir; returns the manifest path.
std::string write_plan(const TensorPlan& plan, const std::string& dir);

}  // namespace sigdla

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sigdla/mac_array.hpp"

namespace sigdla {

struct ConvLayerDesc {
    uint32_t in_h = 0, in_w = 0, in_c = 0;
    uint32_t k = 1;
    uint32_t out_c = 1;
    uint32_t stride = 1;
    bool same_pad = false;
    std::vector<int64_t> weights;  // correlation order [m][ky][kx][c]; may be seeded
    uint64_t weight_seed = 0;      // used when weights is empty

    uint32_t out_h() const {
        return same_pad ? (in_h + stride - 1) / stride : (in_h - k) / stride + 1;
    }
    uint32_t out_w() const {
        return same_pad ? (in_w + stride - 1) / stride : (in_w - k) / stride + 1;
    }
};

// A mappable job description, loadable from JSON.
struct Workload {
    enum class Kind { Fft, Fir, Dct2d, Dwt, ConvLayer, Pipeline };

    Kind kind = Kind::Fir;
    mac::BitwidthConfig cfg{8, 8};
    bool wide_output = false;   // store raw 32-bit accumulators where supported
    int input_value_bits = 0;   // value range hint for requant planning; 0 = cfg.a_bits

    uint32_t fft_n = 0;

    uint32_t fir_length = 0;
    std::vector<int64_t> fir_taps;

    uint32_t dct_blocks = 1;

    uint32_t dwt_n = 0;
    uint32_t dwt_levels = 1;
    std::vector<int64_t> dwt_lo, dwt_hi;

    ConvLayerDesc conv;

    std::vector<Workload> stages;  // pipeline
    bool fused = true;             // pipeline: chain stages on-chip vs. DRAM round-trips

    // Test hook: replace a named plan constant with raw bytes from a file.
    std::map<std::string, std::string> constant_overrides;

    std::string name;
};

Workload workload_from_json_text(const std::string& text);
Workload workload_from_file(const std::string& path);

// Analytic multiply-add count: FFT 10*(N/2)*log2(N), FIR taps*length,
// convolution K*K*C*M*OH*OW, DCT/DWT from their GEMM/filter-bank forms.
uint64_t count_mult_adds(const Workload& w);

// Deterministic weight material for seeded conv layers.
std::vector<int64_t> seeded_weights(const ConvLayerDesc& d, int w_bits);

}  // namespace sigdla

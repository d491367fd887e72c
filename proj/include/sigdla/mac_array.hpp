#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "sigdla/error.hpp"

namespace sigdla::mac {

// Activation/weight element widths; each must be 4, 8, or 16.
struct BitwidthConfig {
    int a_bits = 8;
    int w_bits = 8;
    bool operator==(const BitwidthConfig&) const = default;
};

bool width_ok(int bits);
void validate(BitwidthConfig cfg);

// Independent multiply channels per PE. 16 four-bit multipliers shared
// among lanes: one lane consumes (a_bits/4) * (w_bits/4) multipliers.
int lanes_per_pe(BitwidthConfig cfg);

inline constexpr int kPeCount = 8;
inline constexpr int kMultipliersPerPe = 16;

// 4-bit multiplier primitive. The signed flags mark a field as the most
// significant nibble of a two's-complement operand; lower nibbles are
// unsigned. Result is exact and widened.
int32_t mul4(uint8_t a, uint8_t b, bool a_signed, bool b_signed);

// Fused multiplication from 4-bit partial products: 8-bit operands use the
// shift schedule 0/4/4/8, 16-bit recurses through 8-bit halves adding
// 0/8/8/16 (total shift up to 24). Equals the direct two's-complement
// product for all in-range operands. Throws on operands outside cfg.
int64_t compose_mul(int64_t a, int64_t w, BitwidthConfig cfg);

bool fits(int64_t v, int bits);

// One PE: per-lane 32-bit accumulators. Overflow is detected, never wrapped.
struct PeState {
    std::array<int64_t, kMultipliersPerPe> lane_acc{};

    void reset() { lane_acc.fill(0); }
    int64_t total(int lanes) const;
};

// Accumulates one lane group into the PE and returns the running sum
// across lanes. Vector lengths must equal lanes_per_pe(cfg).
int64_t pe_dot(PeState& pe, std::span<const int64_t> activations,
               std::span<const int64_t> weights, BitwidthConfig cfg);

// 8 PEs sharing one activation broadcast.
struct ArrayState {
    std::array<PeState, kPeCount> pes{};

    void reset() {
        for (auto& p : pes) p.reset();
    }
};

// One simulated cycle: every PE consumes the same activations against its
// own weight vector. Returns the 8 running partial sums.
std::array<int64_t, kPeCount> array_step(ArrayState& st, std::span<const int64_t> activations,
                                         std::span<const std::span<const int64_t>> weight_sets,
                                         BitwidthConfig cfg);

}  // namespace sigdla::mac

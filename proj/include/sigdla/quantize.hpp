#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sigdla {

struct QuantResult {
    std::vector<int64_t> values;
    std::size_t saturated = 0;  // how many inputs hit the format extremes
};

// Fixed-point front door: value * 2^frac_bits, round-half-to-even,
// saturated to the signed range of `bits`.
QuantResult quantize(std::span<const double> signal, int bits, int frac_bits);
int64_t quantize_one(double v, int bits, int frac_bits, bool* saturated = nullptr);
double dequantize(int64_t v, int frac_bits);

// Round-half-to-even arithmetic right shift; shift 0 is the identity.
int64_t rne_shift(int64_t v, int shift);

}  // namespace sigdla

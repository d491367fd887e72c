#include "sigdla/quantize.hpp"

#include <cmath>

namespace sigdla {

int64_t rne_shift(int64_t v, int shift) {
    if (shift == 0) return v;
    int64_t q = v >> shift;  // floor
    int64_t rem = v - (q << shift);
    int64_t half = int64_t{1} << (shift - 1);
    if (rem > half || (rem == half && (q & 1))) ++q;
    return q;
}

int64_t quantize_one(double v, int bits, int frac_bits, bool* saturated) {
    double scaled = std::ldexp(v, frac_bits);
    // Ties to even, matching the hardware requantizer's rounding.
    double r = std::nearbyint(scaled);
    int64_t lo = -(int64_t{1} << (bits - 1));
    int64_t hi = (int64_t{1} << (bits - 1)) - 1;
    bool sat = false;
    int64_t out;
    if (r <= static_cast<double>(lo)) {
        out = lo;
        sat = r < static_cast<double>(lo);
    } else if (r >= static_cast<double>(hi)) {
        out = hi;
        sat = r > static_cast<double>(hi);
    } else {
        out = static_cast<int64_t>(r);
    }
    if (saturated) *saturated = sat;
    return out;
}

QuantResult quantize(std::span<const double> signal, int bits, int frac_bits) {
    QuantResult res;
    res.values.reserve(signal.size());
    for (double v : signal) {
        bool sat = false;
        res.values.push_back(quantize_one(v, bits, frac_bits, &sat));
        if (sat) ++res.saturated;
    }
    return res;
}

double dequantize(int64_t v, int frac_bits) { return std::ldexp(static_cast<double>(v), -frac_bits); }

}  // namespace sigdla

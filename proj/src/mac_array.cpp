#include "sigdla/mac_array.hpp"

#include <string>

namespace sigdla::mac {

namespace {

constexpr int32_t kAccMax = INT32_MAX;
constexpr int32_t kAccMin = INT32_MIN;

void check_acc(int64_t v) {
    if (v > kAccMax || v < kAccMin)
        throw EngineFault("accumulator overflow (" + std::to_string(v) + " exceeds 32 bits)");
}

// Product of two raw bit patterns, decomposed to 4-bit leaves. Only the top
// nibble of a signed operand carries a sign; splitting keeps the signed flag
// on the high half and clears it on the low half.
int64_t mul_patterns(uint64_t a, int a_bits, bool a_signed, uint64_t w, int w_bits,
                     bool w_signed) {
    if (a_bits == 4 && w_bits == 4)
        return mul4(static_cast<uint8_t>(a), static_cast<uint8_t>(w), a_signed, w_signed);
    if (a_bits >= w_bits) {
        int half = a_bits / 2;
        uint64_t lo = a & ((1ull << half) - 1);
        uint64_t hi = a >> half;
        return mul_patterns(lo, half, false, w, w_bits, w_signed) +
               (mul_patterns(hi, half, a_signed, w, w_bits, w_signed) << half);
    }
    int half = w_bits / 2;
    uint64_t lo = w & ((1ull << half) - 1);
    uint64_t hi = w >> half;
    return mul_patterns(a, a_bits, a_signed, lo, half, false) +
           (mul_patterns(a, a_bits, a_signed, hi, half, w_signed) << half);
}

}  // namespace

bool width_ok(int bits) { return bits == 4 || bits == 8 || bits == 16; }

void validate(BitwidthConfig cfg) {
    if (!width_ok(cfg.a_bits) || !width_ok(cfg.w_bits))
        throw Error("bitwidth config must use widths 4, 8, or 16");
}

int lanes_per_pe(BitwidthConfig cfg) {
    validate(cfg);
    return kMultipliersPerPe / ((cfg.a_bits / 4) * (cfg.w_bits / 4));
}

int32_t mul4(uint8_t a, uint8_t b, bool a_signed, bool b_signed) {
    int32_t av = a & 0xF;
    int32_t bv = b & 0xF;
    if (a_signed && (av & 0x8)) av -= 16;
    if (b_signed && (bv & 0x8)) bv -= 16;
    return av * bv;
}

bool fits(int64_t v, int bits) {
    int64_t lo = -(1ll << (bits - 1));
    int64_t hi = (1ll << (bits - 1)) - 1;
    return v >= lo && v <= hi;
}

int64_t compose_mul(int64_t a, int64_t w, BitwidthConfig cfg) {
    validate(cfg);
    if (!fits(a, cfg.a_bits))
        throw Error("activation " + std::to_string(a) + " out of range for " +
                    std::to_string(cfg.a_bits) + "-bit operands");
    if (!fits(w, cfg.w_bits))
        throw Error("weight " + std::to_string(w) + " out of range for " +
                    std::to_string(cfg.w_bits) + "-bit operands");
    uint64_t ap = static_cast<uint64_t>(a) & ((1ull << cfg.a_bits) - 1);
    uint64_t wp = static_cast<uint64_t>(w) & ((1ull << cfg.w_bits) - 1);
    return mul_patterns(ap, cfg.a_bits, true, wp, cfg.w_bits, true);
}

int64_t PeState::total(int lanes) const {
    int64_t sum = 0;
    for (int l = 0; l < lanes; ++l) sum += lane_acc[l];
    check_acc(sum);
    return sum;
}

int64_t pe_dot(PeState& pe, std::span<const int64_t> activations,
               std::span<const int64_t> weights, BitwidthConfig cfg) {
    int lanes = lanes_per_pe(cfg);
    if (activations.size() != static_cast<std::size_t>(lanes) ||
        weights.size() != static_cast<std::size_t>(lanes))
        throw Error("lane vector length must be " + std::to_string(lanes));
    for (int l = 0; l < lanes; ++l) {
        pe.lane_acc[l] += compose_mul(activations[l], weights[l], cfg);
        check_acc(pe.lane_acc[l]);
    }
    return pe.total(lanes);
}

std::array<int64_t, kPeCount> array_step(ArrayState& st, std::span<const int64_t> activations,
                                         std::span<const std::span<const int64_t>> weight_sets,
                                         BitwidthConfig cfg) {
    if (weight_sets.size() != kPeCount)
        throw Error("array step needs one weight vector per PE");
    std::array<int64_t, kPeCount> out{};
    for (int p = 0; p < kPeCount; ++p) out[p] = pe_dot(st.pes[p], activations, weight_sets[p], cfg);
    return out;
}

}  // namespace sigdla::mac

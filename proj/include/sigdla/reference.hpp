#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sigdla::ref {

// Deliberately naive scalar oracles for test and verify use. They share no
// arithmetic helpers with the mac_array or engine modules; rounding and
// twiddle quantization are reimplemented locally from the same definitions.

struct ComplexVec {
    std::vector<double> re;
    std::vector<double> im;

    std::size_t size() const { return re.size(); }
};

// O(N^2) direct DFT: X[k] = sum_j x[j] * e^{-i 2 pi k j / N}.
ComplexVec dft_oracle(const ComplexVec& x);

// y[n] = sum_k h[k] * x[n-k] with zero history; output length = |x|.
std::vector<int64_t> fir_oracle(std::span<const int64_t> x, std::span<const int64_t> h);

// Orthonormal 2-D DCT-II of an 8x8 block, double precision.
std::vector<double> dct2d_oracle(std::span<const double> block);

struct DwtResult {
    std::vector<std::vector<int64_t>> hi_bands;  // one per level, coarsening
    std::vector<int64_t> lo_final;
};

// Analysis filter bank: per level, causal convolution with the low/high
// taps, decimation by two (even phase), then a round-half-even shift by
// level_shift. The approximation band feeds the next level.
DwtResult dwt_oracle(std::span<const int64_t> x, std::span<const int64_t> lo,
                     std::span<const int64_t> hi, int levels, int level_shift);

// Direct NHWC convolution (correlation order), exact 64-bit accumulators.
// Output indexed [m][p] with p the row-major spatial position.
std::vector<int64_t> conv_oracle(std::span<const int64_t> input, int h, int w, int c,
                                 std::span<const int64_t> weights, int k, int m, int stride,
                                 bool same_pad);

int64_t full_width_mul_oracle(int64_t a, int64_t w, int a_bits, int w_bits);

// Scalar fixed-point radix-2 DIT FFT with the same per-stage arithmetic the
// accelerator mapping realizes: Q(bits-2) twiddles, the padded +-1/0
// butterfly rows, 32-bit accumulation, and a round-half-even shift of
// bits-1 per stage (output = DFT/N at Q(bits-2)). Input and output are
// interleaved re,im integer pairs.
std::vector<int64_t> golden_fft_fixed(std::span<const int64_t> interleaved, int bits);

// Twiddle components as the golden model quantizes them.
std::pair<int64_t, int64_t> golden_twiddle(int index, int n, int bits);

}  // namespace sigdla::ref

#include "sigdla/reference.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sigdla::ref {

namespace {

// Local copies of the fixed-point helpers; the oracles must not share
// arithmetic code with the simulator modules.
int64_t round_half_even_shift(int64_t v, int shift) {
    if (shift == 0) return v;
    int64_t q = v >> shift;
    int64_t rem = v - (q << shift);
    int64_t half = int64_t{1} << (shift - 1);
    if (rem > half || (rem == half && (q & 1))) ++q;
    return q;
}

int64_t round_half_even(double v) {
    double r = std::nearbyint(v);
    return static_cast<int64_t>(r);
}

void require(bool ok, const char* what) {
    if (!ok) throw std::runtime_error(what);
}

uint32_t bit_reverse(uint32_t v, int bits) {
    uint32_t r = 0;
    for (int i = 0; i < bits; ++i) r |= ((v >> i) & 1u) << (bits - 1 - i);
    return r;
}

}  // namespace

ComplexVec dft_oracle(const ComplexVec& x) {
    require(x.re.size() == x.im.size(), "dft oracle: mismatched re/im lengths");
    std::size_t n = x.size();
    ComplexVec out;
    out.re.assign(n, 0.0);
    out.im.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double sr = 0.0, si = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double ang = -2.0 * std::numbers::pi * static_cast<double>(k * j) /
                         static_cast<double>(n);
            double c = std::cos(ang), s = std::sin(ang);
            sr += x.re[j] * c - x.im[j] * s;
            si += x.re[j] * s + x.im[j] * c;
        }
        out.re[k] = sr;
        out.im[k] = si;
    }
    return out;
}

std::vector<int64_t> fir_oracle(std::span<const int64_t> x, std::span<const int64_t> h) {
    std::vector<int64_t> y(x.size(), 0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        int64_t acc = 0;
        for (std::size_t k = 0; k < h.size(); ++k) {
            if (n >= k) acc += h[k] * x[n - k];
        }
        y[n] = acc;
    }
    return y;
}

std::vector<double> dct2d_oracle(std::span<const double> block) {
    require(block.size() == 64, "dct oracle expects an 8x8 block");
    double c[8][8];
    for (int u = 0; u < 8; ++u) {
        double s = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
        for (int k = 0; k < 8; ++k)
            c[u][k] = s * std::cos((2.0 * k + 1.0) * u * std::numbers::pi / 16.0);
    }
    // Z = C * X * C^T
    double tmp[8][8] = {};
    for (int u = 0; u < 8; ++u)
        for (int j = 0; j < 8; ++j) {
            double s = 0.0;
            for (int k = 0; k < 8; ++k) s += c[u][k] * block[static_cast<std::size_t>(k) * 8 + j];
            tmp[u][j] = s;
        }
    std::vector<double> out(64, 0.0);
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int j = 0; j < 8; ++j) s += tmp[u][j] * c[v][j];
            out[static_cast<std::size_t>(u) * 8 + v] = s;
        }
    return out;
}

DwtResult dwt_oracle(std::span<const int64_t> x, std::span<const int64_t> lo,
                     std::span<const int64_t> hi, int levels, int level_shift) {
    require(levels >= 1, "dwt oracle: levels must be >= 1");
    require(x.size() % (1ull << levels) == 0, "dwt oracle: length not divisible by 2^levels");
    DwtResult res;
    std::vector<int64_t> cur(x.begin(), x.end());
    for (int l = 0; l < levels; ++l) {
        std::size_t half = cur.size() / 2;
        std::vector<int64_t> next_lo(half), band(half);
        for (std::size_t m = 0; m < half; ++m) {
            // Odd-phase decimation: y[m] = sum_k h[k] * x[2m+1-k].
            int64_t al = 0, ah = 0;
            for (std::size_t k = 0; k < lo.size(); ++k)
                if (2 * m + 1 >= k) al += lo[k] * cur[2 * m + 1 - k];
            for (std::size_t k = 0; k < hi.size(); ++k)
                if (2 * m + 1 >= k) ah += hi[k] * cur[2 * m + 1 - k];
            next_lo[m] = round_half_even_shift(al, level_shift);
            band[m] = round_half_even_shift(ah, level_shift);
        }
        res.hi_bands.push_back(std::move(band));
        cur = std::move(next_lo);
    }
    res.lo_final = std::move(cur);
    return res;
}

std::vector<int64_t> conv_oracle(std::span<const int64_t> input, int h, int w, int c,
                                 std::span<const int64_t> weights, int k, int m, int stride,
                                 bool same_pad) {
    require(h > 0 && w > 0 && c > 0 && k > 0 && m > 0 && stride > 0, "conv oracle: bad dims");
    require(input.size() == static_cast<std::size_t>(h) * w * c, "conv oracle: input size");
    require(weights.size() == static_cast<std::size_t>(m) * k * k * c, "conv oracle: weight size");
    require(same_pad || (h >= k && w >= k), "conv oracle: kernel larger than input");
    int pad = same_pad ? (k - 1) / 2 : 0;
    int oh = same_pad ? (h + stride - 1) / stride : (h - k) / stride + 1;
    int ow = same_pad ? (w + stride - 1) / stride : (w - k) / stride + 1;
    std::vector<int64_t> out(static_cast<std::size_t>(m) * oh * ow, 0);
    for (int mm = 0; mm < m; ++mm)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                int64_t acc = 0;
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        int iy = oy * stride + ky - pad;
                        int ix = ox * stride + kx - pad;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                        for (int cc = 0; cc < c; ++cc) {
                            int64_t xv = input[(static_cast<std::size_t>(iy) * w + ix) * c + cc];
                            int64_t wv = weights[((static_cast<std::size_t>(mm) * k + ky) * k + kx) * c + cc];
                            acc += xv * wv;
                        }
                    }
                out[(static_cast<std::size_t>(mm) * oh + oy) * ow + ox] = acc;
            }
    return out;
}

int64_t full_width_mul_oracle(int64_t a, int64_t w, int a_bits, int w_bits) {
    auto in_range = [](int64_t v, int bits) {
        return v >= -(int64_t{1} << (bits - 1)) && v <= (int64_t{1} << (bits - 1)) - 1;
    };
    require(in_range(a, a_bits) && in_range(w, w_bits), "mul oracle: operand out of range");
    return a * w;
}

std::pair<int64_t, int64_t> golden_twiddle(int index, int n, int bits) {
    double ang = 2.0 * std::numbers::pi * static_cast<double>(index) / static_cast<double>(n);
    double scale = std::ldexp(1.0, bits - 2);
    return {round_half_even(std::cos(ang) * scale), round_half_even(-std::sin(ang) * scale)};
}

std::vector<int64_t> golden_fft_fixed(std::span<const int64_t> interleaved, int bits) {
    require(interleaved.size() % 2 == 0, "golden fft: interleaved length must be even");
    std::size_t n = interleaved.size() / 2;
    require(n >= 2 && std::has_single_bit(n), "golden fft: N must be a power of two >= 2");
    int stages = std::countr_zero(n);
    int64_t one = int64_t{1} << (bits - 2);
    int64_t elem_min = -(int64_t{1} << (bits - 1));
    int64_t elem_max = (int64_t{1} << (bits - 1)) - 1;

    std::vector<int64_t> re(n), im(n);
    for (std::size_t i = 0; i < n; ++i) {
        uint32_t r = bit_reverse(static_cast<uint32_t>(i), stages);
        re[r] = interleaved[2 * i];
        im[r] = interleaved[2 * i + 1];
    }

    for (int t = 0; t < stages; ++t) {
        std::size_t half = std::size_t{1} << t;
        std::size_t block = half * 2;
        for (std::size_t base = 0; base < n; base += block) {
            for (std::size_t j = 0; j < half; ++j) {
                std::size_t p = base + j;
                std::size_t q = p + half;
                auto [wr, wi] = golden_twiddle(static_cast<int>(j * (n / block)),
                                               static_cast<int>(n), bits);
                int64_t pr = re[p], pi = im[p], qr = re[q], qi = im[q];
                int64_t rows[4] = {
                    one * pr + wr * qr - wi * qi,
                    one * pi + wi * qr + wr * qi,
                    one * pr - wr * qr + wi * qi,
                    one * pi - wi * qr - wr * qi,
                };
                int64_t out[4];
                for (int r4 = 0; r4 < 4; ++r4) {
                    require(rows[r4] >= INT32_MIN && rows[r4] <= INT32_MAX,
                            "golden fft: accumulator overflow");
                    out[r4] = round_half_even_shift(rows[r4], bits - 1);
                    require(out[r4] >= elem_min && out[r4] <= elem_max,
                            "golden fft: element overflow");
                }
                re[p] = out[0];
                im[p] = out[1];
                re[q] = out[2];
                im[q] = out[3];
            }
        }
    }

    std::vector<int64_t> result(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        result[2 * i] = re[i];
        result[2 * i + 1] = im[i];
    }
    return result;
}

}  // namespace sigdla::ref

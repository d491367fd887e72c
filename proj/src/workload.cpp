#include "sigdla/workload.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "sigdla/quantize.hpp"

namespace sigdla {

using nlohmann::json;

namespace {

Workload::Kind kind_from_string(const std::string& s) {
    if (s == "fft") return Workload::Kind::Fft;
    if (s == "fir") return Workload::Kind::Fir;
    if (s == "dct2d") return Workload::Kind::Dct2d;
    if (s == "dwt") return Workload::Kind::Dwt;
    if (s == "conv_layer") return Workload::Kind::ConvLayer;
    if (s == "pipeline") return Workload::Kind::Pipeline;
    throw Error("unknown workload kind '" + s + "'");
}

// Tap arrays come either as integers ("taps_int") or as reals quantized at
// "tap_frac_bits" into the weight width.
std::vector<int64_t> taps_from_json(const json& j, const char* int_key, const char* real_key,
                                    int w_bits) {
    if (j.contains(int_key)) return j.at(int_key).get<std::vector<int64_t>>();
    if (!j.contains(real_key)) throw Error(std::string("workload: missing ") + real_key);
    auto reals = j.at(real_key).get<std::vector<double>>();
    int frac = j.value("tap_frac_bits", w_bits - 2);
    auto q = quantize(reals, w_bits, frac);
    return q.values;
}

Workload parse(const json& j);

Workload parse_stage(const json& j) { return parse(j); }

Workload parse(const json& j) {
    Workload w;
    w.kind = kind_from_string(j.at("kind").get<std::string>());
    w.cfg.a_bits = j.value("a_bits", 8);
    w.cfg.w_bits = j.value("w_bits", 8);
    w.wide_output = j.value("wide_output", false);
    w.input_value_bits = j.value("input_value_bits", 0);
    w.name = j.value("name", std::string());
    if (j.contains("constant_overrides"))
        w.constant_overrides =
            j.at("constant_overrides").get<std::map<std::string, std::string>>();

    switch (w.kind) {
        case Workload::Kind::Fft:
            w.fft_n = j.at("n").get<uint32_t>();
            break;
        case Workload::Kind::Fir:
            w.fir_length = j.at("length").get<uint32_t>();
            w.fir_taps = taps_from_json(j, "taps_int", "taps", w.cfg.w_bits);
            break;
        case Workload::Kind::Dct2d:
            w.dct_blocks = j.value("blocks", 1u);
            break;
        case Workload::Kind::Dwt:
            w.dwt_n = j.at("n").get<uint32_t>();
            w.dwt_levels = j.value("levels", 1u);
            w.dwt_lo = taps_from_json(j, "lo_int", "lo", w.cfg.w_bits);
            w.dwt_hi = taps_from_json(j, "hi_int", "hi", w.cfg.w_bits);
            break;
        case Workload::Kind::ConvLayer: {
            auto& c = w.conv;
            c.in_h = j.at("in_h").get<uint32_t>();
            c.in_w = j.at("in_w").get<uint32_t>();
            c.in_c = j.at("in_c").get<uint32_t>();
            c.k = j.at("k").get<uint32_t>();
            c.out_c = j.at("out_c").get<uint32_t>();
            c.stride = j.value("stride", 1u);
            c.same_pad = j.value("pad", std::string("valid")) == "same";
            if (j.contains("weights")) c.weights = j.at("weights").get<std::vector<int64_t>>();
            c.weight_seed = j.value("weight_seed", 1u);
            break;
        }
        case Workload::Kind::Pipeline:
            for (const auto& s : j.at("stages")) w.stages.push_back(parse_stage(s));
            w.fused = j.value("fused", true);
            break;
    }
    return w;
}

}  // namespace

Workload workload_from_json_text(const std::string& text) { return parse(json::parse(text)); }

Workload workload_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open workload " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    Workload w = workload_from_json_text(ss.str());
    // Override files resolve relative to the workload document.
    auto slash = path.find_last_of('/');
    if (slash != std::string::npos) {
        std::string dir = path.substr(0, slash + 1);
        for (auto& [name, p] : w.constant_overrides)
            if (!p.empty() && p.front() != '/') p = dir + p;
    }
    return w;
}

std::vector<int64_t> seeded_weights(const ConvLayerDesc& d, int w_bits) {
    if (!d.weights.empty()) return d.weights;
    std::mt19937_64 rng(d.weight_seed);
    int64_t lo = -(int64_t{1} << (w_bits - 1));
    int64_t hi = (int64_t{1} << (w_bits - 1)) - 1;
    std::uniform_int_distribution<int64_t> dist(lo, hi);
    std::vector<int64_t> w(static_cast<std::size_t>(d.out_c) * d.k * d.k * d.in_c);
    for (auto& v : w) v = dist(rng);
    return w;
}

uint64_t count_mult_adds(const Workload& w) {
    switch (w.kind) {
        case Workload::Kind::Fft: {
            if (w.fft_n < 2 || !std::has_single_bit(w.fft_n))
                throw Error("fft size must be a power of two");
            uint64_t stages = static_cast<uint64_t>(std::countr_zero(w.fft_n));
            return 10ull * (w.fft_n / 2) * stages;
        }
        case Workload::Kind::Fir:
            return static_cast<uint64_t>(w.fir_taps.size()) * w.fir_length;
        case Workload::Kind::Dct2d:
            // Two 8x8 GEMM passes per block.
            return static_cast<uint64_t>(w.dct_blocks) * 2 * 8 * 8 * 8;
        case Workload::Kind::Dwt: {
            uint64_t total = 0;
            uint64_t n = w.dwt_n;
            uint64_t taps = w.dwt_lo.size() + w.dwt_hi.size();
            for (uint32_t l = 0; l < w.dwt_levels; ++l) {
                total += (n / 2) * taps;
                n /= 2;
            }
            return total;
        }
        case Workload::Kind::ConvLayer: {
            const auto& c = w.conv;
            return static_cast<uint64_t>(c.k) * c.k * c.in_c * c.out_c * c.out_h() * c.out_w();
        }
        case Workload::Kind::Pipeline: {
            uint64_t total = 0;
            for (const auto& s : w.stages) total += count_mult_adds(s);
            return total;
        }
    }
    throw Error("unreachable workload kind");
}

}  // namespace sigdla

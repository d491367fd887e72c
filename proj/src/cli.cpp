#include "sigdla/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sigdla/isa.hpp"
#include "sigdla/mapper.hpp"
#include "sigdla/quantize.hpp"
#include "sigdla/reference.hpp"

namespace sigdla::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fixture_dir() {
    const char* env = std::getenv("SIGDLA_FIXTURES");
    return env ? env : "fixtures";
}

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, std::string_view data) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

MachineConfig load_machine(const RunManifest& m) {
    MachineConfig cfg;
    if (!m.machine_path.empty()) cfg = machine_from_file(m.machine_path);
    if (m.overlap_dma) cfg.overlap_dma = true;
    if (m.cycle_budget) cfg.cycle_budget = *m.cycle_budget;
    return cfg;
}

}  // namespace

void cmd_assemble(const std::string& in_path, const std::string& out_path) {
    isa::Program p = isa::assemble(slurp(in_path));
    auto bytes = isa::to_bytes(p);
    spit(out_path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void cmd_disassemble(const std::string& in_path, const std::string& out_path) {
    std::string raw = slurp(in_path);
    std::span<const uint8_t> bytes(reinterpret_cast<const uint8_t*>(raw.data()), raw.size());
    spit(out_path, isa::disassemble(isa::from_bytes(bytes)));
}

std::vector<int64_t> read_input_file(const std::string& path, const InputDesc& desc) {
    std::vector<int64_t> vals;
    if (path.ends_with(".bin")) {
        std::string raw = slurp(path);
        if (raw.size() % 2 != 0) throw Error("raw input must be 16-bit little-endian samples");
        for (std::size_t i = 0; i < raw.size(); i += 2) {
            int16_t v = static_cast<int16_t>(static_cast<uint8_t>(raw[i]) |
                                             (static_cast<uint8_t>(raw[i + 1]) << 8));
            vals.push_back(v);
        }
        return vals;
    }
    std::istringstream in(slurp(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::string tok;
        int fields = 0;
        while (std::getline(ls, tok, ',')) {
            try {
                double v = std::stod(tok);
                vals.push_back(quantize_one(v, static_cast<int>(desc.elem_bits), desc.frac_bits));
            } catch (const std::exception&) {
                throw ParseError(line_no, "bad sample '" + tok + "'");
            }
            ++fields;
        }
        if (desc.complex_pairs && fields == 1) vals.push_back(0);  // real-only line: im = 0
    }
    return vals;
}

std::vector<int64_t> generated_input(const InputDesc& desc, uint64_t seed, int value_bits) {
    std::vector<int64_t> vals(desc.count, 0);
    if (seed == 0) return vals;
    std::mt19937_64 rng(seed);
    int bits = value_bits > 0 ? value_bits : static_cast<int>(desc.elem_bits);
    int64_t hi;
    int64_t lo;
    if (desc.frac_bits > 0) {
        // Keep quantized magnitudes within +-1.0 for transform inputs.
        hi = (int64_t{1} << desc.frac_bits) - 1;
        lo = -hi;
    } else {
        hi = (int64_t{1} << (bits - 1)) - 1;
        lo = -(int64_t{1} << (bits - 1));
    }
    std::uniform_int_distribution<int64_t> dist(lo, hi);
    for (auto& v : vals) v = dist(rng);
    return vals;
}

namespace {

std::vector<int64_t> input_for(const RunManifest& m, const Workload& w, const TensorPlan& plan) {
    if (!m.input_path.empty()) {
        auto vals = read_input_file(m.input_path, plan.input);
        if (vals.size() != plan.input.count)
            throw Error("input file holds " + std::to_string(vals.size()) + " values, expected " +
                        std::to_string(plan.input.count));
        return vals;
    }
    int ivb = w.input_value_bits;
    if (w.kind == Workload::Kind::Pipeline && !w.stages.empty())
        ivb = w.stages.front().input_value_bits;
    return generated_input(plan.input, m.seed, ivb);
}

std::string pack_output_bytes(const TensorPlan& plan, std::span<const int64_t> outputs) {
    std::string bytes;
    std::size_t at = 0;
    for (const auto& seg : plan.outputs) {
        uint64_t seg_bytes = (seg.count * seg.elem_bits + 7) / 8;
        std::string chunk(seg_bytes, '\0');
        for (uint64_t i = 0; i < seg.count; ++i) {
            uint64_t raw = static_cast<uint64_t>(outputs[at + i]) &
                           ((seg.elem_bits == 64) ? ~0ull : ((uint64_t{1} << seg.elem_bits) - 1));
            uint64_t bit = i * seg.elem_bits;
            for (uint32_t b = 0; b < seg.elem_bits; ++b)
                if ((raw >> b) & 1)
                    chunk[(bit + b) / 8] =
                        static_cast<char>(chunk[(bit + b) / 8] | (1 << ((bit + b) % 8)));
        }
        bytes += chunk;
        at += seg.count;
    }
    return bytes;
}

}  // namespace

RunResult cmd_run(const RunManifest& m) {
    Workload w = workload_from_file(m.workload_path);
    MachineConfig mc = load_machine(m);
    Lowered low = map_workload(w, mc);
    std::vector<int64_t> input = input_for(m, w, low.plan);
    RunResult res = run(low, input, mc);

    if (!m.out_dir.empty()) {
        fs::create_directories(m.out_dir);
        spit((fs::path(m.out_dir) / "output.bin").string(), pack_output_bytes(low.plan, res.outputs));
        std::ostringstream csv;
        for (int64_t v : res.outputs) csv << v << '\n';
        spit((fs::path(m.out_dir) / "output.csv").string(), csv.str());
        if (m.format == "csv")
            spit((fs::path(m.out_dir) / "report.csv").string(), res.report.to_csv());
        else
            spit((fs::path(m.out_dir) / "report.json").string(), res.report.to_json());
        spit((fs::path(m.out_dir) / "plan.json").string(), plan_to_json(low.plan));
    }
    return res;
}

namespace {

double rel_rms(std::span<const double> got, std::span<const double> want) {
    double err = 0, ref = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        err += (got[i] - want[i]) * (got[i] - want[i]);
        ref += want[i] * want[i];
    }
    return ref > 0 ? std::sqrt(err / ref) : std::sqrt(err);
}

// Documented accuracy bounds for verify: relative RMS of the simulated FFT
// against the double-precision DFT/N, by element width (frozen from
// calibration runs), and the DCT bound against its oracle.
double fft_rms_bound(int bits) { return bits >= 16 ? 2e-3 : 6e-2; }
constexpr double kDctRmsBound = 1e-2;

VerifyCheck check_exact(const std::string& name, std::span<const int64_t> got,
                        std::span<const int64_t> want) {
    VerifyCheck c{name, true, 0.0};
    if (got.size() != want.size()) {
        c.pass = false;
        c.max_err = static_cast<double>(got.size() > want.size() ? got.size() - want.size()
                                                                 : want.size() - got.size());
        return c;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
        double d = std::abs(static_cast<double>(got[i]) - static_cast<double>(want[i]));
        c.max_err = std::max(c.max_err, d);
    }
    c.pass = c.max_err == 0.0;
    return c;
}

std::vector<int64_t> conv_stage_oracle(const Workload& stage, std::span<const int64_t> input,
                                       int shift) {
    const auto& d = stage.conv;
    auto weights = seeded_weights(d, stage.cfg.w_bits);
    auto wide = ref::conv_oracle(input, static_cast<int>(d.in_h), static_cast<int>(d.in_w),
                                 static_cast<int>(d.in_c), weights, static_cast<int>(d.k),
                                 static_cast<int>(d.out_c), static_cast<int>(d.stride),
                                 d.same_pad);
    // [m][p] -> interleaved [p][m] rows to match the chained on-chip layout.
    uint64_t hw = static_cast<uint64_t>(d.out_h()) * d.out_w();
    std::vector<int64_t> out(wide.size());
    for (uint64_t p = 0; p < hw; ++p)
        for (uint32_t mm = 0; mm < d.out_c; ++mm) {
            int64_t acc = wide[mm * hw + p];
            out[p * d.out_c + mm] = stage.wide_output ? acc : rne_shift(acc, shift);
        }
    return out;
}

}  // namespace

VerifyResult cmd_verify(const RunManifest& m) {
    Workload w = workload_from_file(m.workload_path);
    MachineConfig mc = load_machine(m);
    Lowered low = map_workload(w, mc);
    std::vector<int64_t> input = input_for(m, w, low.plan);
    RunResult res = run(low, input, mc);

    VerifyResult vr;
    switch (w.kind) {
        case Workload::Kind::Fft: {
            auto golden = ref::golden_fft_fixed(input, w.cfg.a_bits);
            vr.checks.push_back(check_exact("fft_vs_fixed_point_golden", res.outputs, golden));

            ref::ComplexVec x;
            for (std::size_t i = 0; i < input.size(); i += 2) {
                x.re.push_back(dequantize(input[i], low.plan.input.frac_bits));
                x.im.push_back(dequantize(input[i + 1], low.plan.input.frac_bits));
            }
            auto X = ref::dft_oracle(x);
            std::vector<double> got, want;
            for (std::size_t k = 0; k < x.size(); ++k) {
                got.push_back(static_cast<double>(res.outputs[2 * k]) * low.plan.output_scale);
                got.push_back(static_cast<double>(res.outputs[2 * k + 1]) * low.plan.output_scale);
                want.push_back(X.re[k] / static_cast<double>(x.size()));
                want.push_back(X.im[k] / static_cast<double>(x.size()));
            }
            double rms = rel_rms(got, want);
            vr.checks.push_back({"fft_vs_dft_oracle", rms <= fft_rms_bound(w.cfg.a_bits), rms});
            break;
        }
        case Workload::Kind::Fir: {
            auto acc = ref::fir_oracle(input, w.fir_taps);
            std::vector<int64_t> want(acc.size());
            int shift = low.plan.stage_requant_shifts.empty() ? 0
                                                              : low.plan.stage_requant_shifts[0];
            for (std::size_t i = 0; i < acc.size(); ++i)
                want[i] = w.wide_output ? acc[i] : rne_shift(acc[i], shift);
            vr.checks.push_back(check_exact("fir_vs_integer_oracle", res.outputs, want));
            break;
        }
        case Workload::Kind::Dct2d: {
            std::vector<double> got, want;
            for (uint32_t bk = 0; bk < w.dct_blocks; ++bk) {
                std::vector<double> block(64);
                for (int i = 0; i < 64; ++i)
                    block[static_cast<std::size_t>(i)] =
                        static_cast<double>(input[static_cast<std::size_t>(bk) * 64 + i]);
                auto Z = ref::dct2d_oracle(block);
                for (int i = 0; i < 64; ++i) {
                    got.push_back(
                        static_cast<double>(res.outputs[static_cast<std::size_t>(bk) * 64 + i]) *
                        low.plan.output_scale);
                    want.push_back(Z[static_cast<std::size_t>(i)]);
                }
            }
            double rms = rel_rms(got, want);
            vr.checks.push_back({"dct_vs_double_oracle", rms <= kDctRmsBound, rms});
            break;
        }
        case Workload::Kind::Dwt: {
            auto want = ref::dwt_oracle(input, w.dwt_lo, w.dwt_hi, static_cast<int>(w.dwt_levels),
                                        low.plan.dwt_level_shift);
            std::vector<int64_t> flat;
            for (const auto& band : want.hi_bands) flat.insert(flat.end(), band.begin(), band.end());
            flat.insert(flat.end(), want.lo_final.begin(), want.lo_final.end());
            vr.checks.push_back(check_exact("dwt_vs_integer_oracle", res.outputs, flat));
            break;
        }
        case Workload::Kind::ConvLayer: {
            const auto& d = w.conv;
            auto weights = seeded_weights(d, w.cfg.w_bits);
            auto acc = ref::conv_oracle(input, static_cast<int>(d.in_h), static_cast<int>(d.in_w),
                                        static_cast<int>(d.in_c), weights, static_cast<int>(d.k),
                                        static_cast<int>(d.out_c), static_cast<int>(d.stride),
                                        d.same_pad);
            int shift = low.plan.stage_requant_shifts.empty() ? 0
                                                              : low.plan.stage_requant_shifts[0];
            std::vector<int64_t> want(acc.size());
            for (std::size_t i = 0; i < acc.size(); ++i)
                want[i] = w.wide_output ? acc[i] : rne_shift(acc[i], shift);
            auto got = reassemble_conv_output(low.plan, res.outputs);
            vr.checks.push_back(check_exact("conv_vs_integer_oracle", got, want));
            break;
        }
        case Workload::Kind::Pipeline: {
            if (w.stages.empty() || w.stages.front().kind != Workload::Kind::Fft)
                throw Error("pipeline verify expects an FFT first stage");
            auto data = ref::golden_fft_fixed(input, w.stages.front().cfg.a_bits);
            std::size_t shift_at = 0;
            for (std::size_t s = 1; s < w.stages.size(); ++s) {
                if (w.stages[s].kind != Workload::Kind::ConvLayer)
                    throw Error("pipeline verify expects conv stages after the FFT");
                int shift = low.plan.stage_requant_shifts.empty()
                                ? 0
                                : low.plan.stage_requant_shifts[shift_at++];
                data = conv_stage_oracle(w.stages[s], data, shift);
            }
            vr.checks.push_back(check_exact("pipeline_vs_composed_oracles", res.outputs, data));
            vr.checks.push_back({"inter_stage_dma_bytes_zero",
                                 !w.fused || res.report.inter_stage_dma_bytes == 0,
                                 static_cast<double>(res.report.inter_stage_dma_bytes)});
            break;
        }
    }
    return vr;
}

void cmd_bench(const std::string& suite_path, const std::string& machine_path,
               const std::string& out_dir, const std::string& format) {
    json suite = json::parse(slurp(suite_path));
    MachineConfig mc;
    if (!machine_path.empty()) mc = machine_from_file(machine_path);

    struct Row {
        std::string workload;
        int a, w;
        CycleReport report;
        double speedup;
    };
    std::vector<Row> rows;
    for (const auto& entry : suite.value("entries", json::array())) {
        std::string wpath = entry.at("workload").get<std::string>();
        if (!fs::path(wpath).is_absolute())
            wpath = (fs::path(suite_path).parent_path() / wpath).string();
        Workload w = workload_from_file(wpath);
        std::string name = w.name.empty() ? fs::path(wpath).stem().string() : w.name;

        uint64_t base_cycles = 0;
        {
            Workload base = w;
            base.cfg = {16, 16};
            for (auto& s : base.stages) s.cfg = {16, 16};
            Lowered low = map_workload(base, mc);
            std::vector<int64_t> zeros(low.plan.input.count, 0);
            base_cycles = run(low, zeros, mc).report.total_cycles;
        }
        for (const auto& cfgj : entry.at("configs")) {
            mac::BitwidthConfig cfg{cfgj.at(0).get<int>(), cfgj.at(1).get<int>()};
            Workload wk = w;
            wk.cfg = cfg;
            for (auto& s : wk.stages) s.cfg = cfg;
            Lowered low = map_workload(wk, mc);
            std::vector<int64_t> zeros(low.plan.input.count, 0);
            auto res = run(low, zeros, mc);
            rows.push_back({name, cfg.a_bits, cfg.w_bits, res.report,
                            static_cast<double>(base_cycles) /
                                static_cast<double>(res.report.total_cycles)});
        }
    }

    std::ostringstream csv;
    csv << "workload,a_bits,w_bits,total_cycles,compute_cycles,shuffle_cycles,dma_cycles,"
           "mac_ops,speedup_vs_16x16\n";
    json jout = json::array();
    for (const auto& r : rows) {
        csv << r.workload << ',' << r.a << ',' << r.w << ',' << r.report.total_cycles << ','
            << r.report.compute_cycles << ',' << r.report.shuffle_cycles << ','
            << r.report.dma_cycles << ',' << r.report.mac_ops << ',' << r.speedup << '\n';
        jout.push_back({{"workload", r.workload},
                        {"a_bits", r.a},
                        {"w_bits", r.w},
                        {"total_cycles", r.report.total_cycles},
                        {"speedup_vs_16x16", r.speedup}});
    }
    fs::create_directories(out_dir);
    if (format == "csv")
        spit((fs::path(out_dir) / "bench.csv").string(), csv.str());
    else
        spit((fs::path(out_dir) / "bench.json").string(), jout.dump(2) + "\n");
    std::cout << csv.str();
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"SigDLA accelerator simulator"};
    app.require_subcommand(1);

    std::string in_path, out_path;
    auto* asmc = app.add_subcommand("assemble", "assembly text -> binary");
    asmc->add_option("input", in_path)->required();
    asmc->add_option("output", out_path)->required();

    auto* disc = app.add_subcommand("disassemble", "binary -> assembly text");
    disc->add_option("input", in_path)->required();
    disc->add_option("output", out_path)->required();

    RunManifest m;
    auto add_common = [&m](CLI::App* c) {
        c->add_option("--workload", m.workload_path)->required();
        c->add_option("--machine", m.machine_path);
        c->add_option("--input", m.input_path);
        c->add_option("--out", m.out_dir);
        c->add_option("--format", m.format)->check(CLI::IsMember({"json", "csv"}));
        c->add_flag("--overlap-dma", m.overlap_dma);
        c->add_option("--cycle-budget", [&m](const CLI::results_t& r) {
            m.cycle_budget = std::stoull(r[0]);
            return true;
        });
        c->add_option("--seed", m.seed);
    };
    auto* runc = app.add_subcommand("run", "map a workload and simulate it");
    add_common(runc);
    auto* verc = app.add_subcommand("verify", "simulate and compare against oracles");
    add_common(verc);

    std::string suite_path, bench_machine, bench_out = "bench_out", bench_format = "csv";
    auto* benc = app.add_subcommand("bench", "run a suite and tabulate speedups");
    benc->add_option("--suite", suite_path)->required();
    benc->add_option("--machine", bench_machine);
    benc->add_option("--out", bench_out);
    benc->add_option("--format", bench_format)->check(CLI::IsMember({"json", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (asmc->parsed()) {
            cmd_assemble(in_path, out_path);
        } else if (disc->parsed()) {
            cmd_disassemble(in_path, out_path);
        } else if (runc->parsed()) {
            auto res = cmd_run(m);
            std::cout << res.report.to_json();
        } else if (verc->parsed()) {
            auto vr = cmd_verify(m);
            bool ok = vr.all_pass();
            for (const auto& c : vr.checks)
                std::cout << (c.pass ? "PASS" : "FAIL") << ' ' << c.name << " max_err=" << c.max_err
                          << '\n';
            return ok ? kExitOk : kExitVerifyFail;
        } else if (benc->parsed()) {
            cmd_bench(suite_path, bench_machine, bench_out, bench_format);
        }
    } catch (const EngineFault& e) {
        std::cerr << "engine fault: " << e.what() << '\n';
        return kExitEngineFault;
    } catch (const MemoryFault& e) {
        std::cerr << "memory fault: " << e.what() << '\n';
        return kExitEngineFault;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitOk;
}

}  // namespace sigdla::cli

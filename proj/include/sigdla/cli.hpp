#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sigdla/engine.hpp"

namespace sigdla::cli {

// Exit codes: 0 success, 1 verification failure, 2 usage/parse error,
// 3 engine fault.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFail = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitEngineFault = 3;

struct RunManifest {
    std::string workload_path;
    std::string machine_path;  // empty: defaults
    std::string input_path;    // empty: zeros, or seeded values when seed != 0
    std::string out_dir;
    std::string format = "json";  // json | csv
    bool overlap_dma = false;
    std::optional<uint64_t> cycle_budget;
    uint64_t seed = 0;
};

void cmd_assemble(const std::string& in_path, const std::string& out_path);
void cmd_disassemble(const std::string& in_path, const std::string& out_path);

// Maps, runs, and writes output.bin/output.csv plus report.json|csv.
RunResult cmd_run(const RunManifest& m);

struct VerifyCheck {
    std::string name;
    bool pass = false;
    double max_err = 0.0;
};
struct VerifyResult {
    std::vector<VerifyCheck> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }
};

// Runs the simulation and the matching oracle, returning per-check verdicts.
VerifyResult cmd_verify(const RunManifest& m);

// Suite file: {"entries": [{"workload": path, "configs": [[a,w], ...]}]}.
// Emits a cycles/speedup table row per (workload, config) pair.
void cmd_bench(const std::string& suite_path, const std::string& machine_path,
               const std::string& out_dir, const std::string& format);

int run_cli(int argc, const char* const* argv);

// Signal files: CSV with one sample per line ("x" or "re,im"), or raw
// little-endian 16-bit binaries. Reals are quantized per the plan's format.
std::vector<int64_t> read_input_file(const std::string& path, const InputDesc& desc);
std::vector<int64_t> generated_input(const InputDesc& desc, uint64_t seed, int value_bits);

std::string fixture_dir();

}  // namespace sigdla::cli

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sigdla/cli.hpp"
#include "sigdla/isa.hpp"
#include "sigdla/workload.hpp"

using namespace sigdla;
namespace fs = std::filesystem;

namespace {

fs::path fixtures() { return cli::fixture_dir(); }

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "sigdla_cli" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_argv(std::initializer_list<std::string> args) {
    std::vector<std::string> owned(args);
    std::vector<const char*> argv{"sigdla"};
    for (const auto& a : owned) argv.push_back(a.c_str());
    return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("fig. 7 style fixture assembles to 7 instructions and round-trips") {
    auto dir = temp_dir("fig7");
    auto bin = (dir / "fig7.bin").string();
    auto txt = (dir / "fig7.s").string();
    cli::cmd_assemble((fixtures() / "fig7.asm").string(), bin);
    isa::Program p = isa::from_bytes(std::vector<uint8_t>(slurp(bin).begin(), slurp(bin).end()));
    CHECK(p.size() == 7);
    cli::cmd_disassemble(bin, txt);
    auto bin2 = (dir / "fig7_2.bin").string();
    cli::cmd_assemble(txt, bin2);
    CHECK(slurp(bin) == slurp(bin2));
}

TEST_CASE("malformed assembly exits with a usage error") {
    auto dir = temp_dir("badasm");
    std::ofstream(dir / "bad.s") << "ctrl-shuffling unit=99 sel=0 split=0 finish=0\n";
    int rc = run_argv({"assemble", (dir / "bad.s").string(), (dir / "bad.bin").string()});
    CHECK(rc == cli::kExitUsage);
}

TEST_CASE("cmd_run writes outputs and reports; reruns are byte-identical") {
    auto out1 = temp_dir("run1");
    auto out2 = temp_dir("run2");
    cli::RunManifest m;
    m.workload_path = (fixtures() / "workloads" / "fir200_8tap.json").string();
    m.machine_path = (fixtures() / "machines" / "default.json").string();
    m.seed = 99;
    m.out_dir = out1.string();
    auto r1 = cli::cmd_run(m);
    m.out_dir = out2.string();
    auto r2 = cli::cmd_run(m);
    CHECK(r1.report.total_cycles > 0);
    for (const char* f : {"output.bin", "output.csv", "report.json", "plan.json"})
        CHECK(slurp(out1 / f) == slurp(out2 / f));
}

TEST_CASE("missing config file is a usage error") {
    int rc = run_argv({"run", "--workload", "does_not_exist.json"});
    CHECK(rc == cli::kExitUsage);
}

TEST_CASE("verify passes for fft, fir, dct, dwt, conv and the fused pipeline") {
    for (const char* wl : {"fft128_16b.json", "fir200_8tap.json", "dct2d_verify.json",
                           "dwt_haar256.json", "conv3x3_64_16x16.json", "pipeline_fft_cnn.json",
                           "pipeline_fft_cnn_staged.json"}) {
        CAPTURE(wl);
        cli::RunManifest m;
        m.workload_path = (fixtures() / "workloads" / wl).string();
        m.seed = 7;
        auto vr = cli::cmd_verify(m);
        REQUIRE(!vr.checks.empty());
        for (const auto& c : vr.checks) {
            CAPTURE(c.name);
            CHECK(c.pass);
        }
    }
}

TEST_CASE("verify accepts csv signal input") {
    cli::RunManifest m;
    m.workload_path = (fixtures() / "workloads" / "fft128_16b.json").string();
    m.input_path = (fixtures() / "inputs" / "tone128.csv").string();
    auto vr = cli::cmd_verify(m);
    for (const auto& c : vr.checks) CHECK(c.pass);
}

TEST_CASE("a corrupted twiddle table fails verification") {
    cli::RunManifest m;
    m.workload_path = (fixtures() / "workloads" / "fft128_corrupt.json").string();
    m.seed = 7;
    auto vr = cli::cmd_verify(m);
    CHECK(!vr.all_pass());

    int rc = run_argv({"verify", "--workload", m.workload_path, "--seed", "7"});
    CHECK(rc == cli::kExitVerifyFail);
}

TEST_CASE("bench emits one row per (workload, config) and an empty suite is fine") {
    auto out = temp_dir("bench");
    cli::cmd_bench((fixtures() / "suites" / "dsp_suite.json").string(),
                   (fixtures() / "machines" / "default.json").string(), out.string(), "csv");
    std::string table = slurp(out / "bench.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 1 + 6);  // header + 3 workloads x 2 cfgs

    auto out2 = temp_dir("bench_empty");
    cli::cmd_bench((fixtures() / "suites" / "empty_suite.json").string(), "", out2.string(), "csv");
    std::string empty = slurp(out2 / "bench.csv");
    CHECK(std::count(empty.begin(), empty.end(), '\n') == 1);
}

TEST_CASE("dsp suite shows the expected speedup ordering") {
    auto out = temp_dir("bench_order");
    cli::cmd_bench((fixtures() / "suites" / "dsp_suite.json").string(),
                   (fixtures() / "machines" / "default.json").string(), out.string(), "csv");
    std::istringstream table(slurp(out / "bench.csv"));
    std::string line;
    std::getline(table, line);  // header
    double fir88 = 0, dct88 = 0, fft88 = 0;
    while (std::getline(table, line)) {
        std::istringstream ls(line);
        std::string name, a, w, rest;
        std::getline(ls, name, ',');
        std::getline(ls, a, ',');
        std::getline(ls, w, ',');
        std::vector<std::string> cols;
        while (std::getline(ls, rest, ',')) cols.push_back(rest);
        double speedup = std::stod(cols.back());
        if (a == "8" && w == "8") {
            if (name.starts_with("fir")) fir88 = speedup;
            if (name.starts_with("dct")) dct88 = speedup;
            if (name.starts_with("fft")) fft88 = speedup;
        }
    }
    CHECK(fir88 > 1.0);
    CHECK(dct88 > 1.0);
    CHECK(fft88 > 1.0);
    CHECK(fft88 < fir88);
    CHECK(fft88 < dct88);
}

TEST_CASE("count_mult_adds on the shipped CNN fixtures") {
    auto tiny = workload_from_file((fixtures() / "workloads" / "tinyvggnet.json").string());
    auto ultra = workload_from_file((fixtures() / "workloads" / "ultranet.json").string());
    CHECK(count_mult_adds(tiny) == 169574400);
    CHECK(count_mult_adds(ultra) == 3850240);
}

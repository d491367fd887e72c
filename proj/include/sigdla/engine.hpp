#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "sigdla/mac_array.hpp"
#include "sigdla/memory.hpp"
#include "sigdla/shuffle_fabric.hpp"
#include "sigdla/tensor_plan.hpp"
#include "sigdla/workload.hpp"

namespace sigdla {

struct MachineConfig {
    uint32_t banks = 18;
    uint32_t bank_kib = 8;
    uint64_t offchip_mib = 16;
    uint64_t bandwidth_mb_s = 1600;
    uint32_t frequency_mhz = 100;
    uint32_t dma_setup_cycles = 20;
    bool overlap_dma = false;  // overlap DMA with compute: total = max(dma, rest)
    uint64_t cycle_budget = 1000000000;
};

MachineConfig machine_from_json_text(const std::string& text);
MachineConfig machine_from_file(const std::string& path);

struct CycleReport {
    uint64_t total_cycles = 0;
    uint64_t compute_cycles = 0;
    uint64_t shuffle_cycles = 0;
    uint64_t dma_cycles = 0;
    uint64_t stall_cycles = 0;
    uint64_t mac_ops = 0;
    uint64_t inter_stage_dma_bytes = 0;
    bool overlap_dma = false;

    std::string to_json() const;
    std::string to_csv() const;
};

// Full architectural state of one simulated SigDLA instance.
struct Machine {
    explicit Machine(const MachineConfig& cfg);

    MachineConfig cfg;
    OnChipBuffer onchip;
    OffChipMemory offchip;

    fabric::BcifRegisterFile rf;
    fabric::ShuffleArrayConfig shuffle_cfg;
    bool shuffle_sealed = false;
    bool staging_reset_pending = false;
    std::array<std::optional<uint32_t>, 16> pending_pad;  // slot -> raw value

    mac::BitwidthConfig bitwidth{8, 8};
    mac::ArrayState array;

    uint64_t pc = 0;
    bool halted = false;

    // Inter-stage DMA accounting window, from the plan.
    uint32_t prologue_end_pc = 0;
    uint32_t epilogue_start_pc = 0;

    uint64_t compute_cycles = 0;
    uint64_t shuffle_cycles = 0;
    uint64_t dma_cycles = 0;
    uint64_t mac_ops = 0;
    uint64_t inter_stage_dma_bytes = 0;

    uint64_t work_cycles() const { return compute_cycles + shuffle_cycles + dma_cycles; }
};

// Executes the instruction at pc and charges its cycle cost. Decode errors,
// memory faults, accumulator overflow and budget exhaustion halt the run by
// throwing EngineFault/MemoryFault with a diagnostic.
void step(Machine& m, const isa::Program& program);

// Signed element accessors used by ConvExec; exposed for tests.
int64_t read_element(const OnChipBuffer& buf, uint32_t base_word, uint64_t elem_index, int bits);
void write_element(OnChipBuffer& buf, uint32_t base_word, uint64_t elem_index, int bits,
                   int64_t value);

struct RunResult {
    std::vector<int64_t> outputs;  // all output segments, sign-extended
    CycleReport report;
};

// Deterministic end-to-end run: builds the DRAM image from the plan
// (constants + packed input), executes to Halt, and extracts outputs.
RunResult run(const Lowered& lowered, std::span<const int64_t> input, const MachineConfig& cfg);

// Same, but leaves the final machine state available for inspection.
RunResult run_on(Machine& m, const Lowered& lowered, std::span<const int64_t> input);

// Ratio of total cycles: workload mapped and run under cfg_b over cfg_a.
double compare_configs(const Workload& w, mac::BitwidthConfig cfg_a, mac::BitwidthConfig cfg_b,
                       const MachineConfig& mc);

}  // namespace sigdla

#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "sigdla/engine.hpp"
#include "sigdla/tensor_plan.hpp"
#include "sigdla/workload.hpp"

namespace sigdla {

// Lowers a workload to an instruction stream plus its buffer layout for the
// given machine geometry.
Lowered map_workload(const Workload& w, const MachineConfig& mc);

Lowered map_fft(uint32_t n, mac::BitwidthConfig cfg, const MachineConfig& mc);
Lowered map_fir(std::span<const int64_t> taps, uint32_t length, mac::BitwidthConfig cfg,
                const MachineConfig& mc, bool wide_output = true);
Lowered map_dct(mac::BitwidthConfig cfg, const MachineConfig& mc, uint32_t blocks = 1,
                int input_value_bits = 0);
Lowered map_dwt(std::span<const int64_t> lo, std::span<const int64_t> hi, uint32_t n,
                uint32_t levels, mac::BitwidthConfig cfg, const MachineConfig& mc);
Lowered map_conv_layer(const ConvLayerDesc& d, mac::BitwidthConfig cfg, const MachineConfig& mc,
                       bool wide_output = true, int input_value_bits = 0);
Lowered map_pipeline(std::span<const Workload> stages, const MachineConfig& mc, bool fused = true);

// Radix-2 DIT structure shared by the emitter and the float test hook.
struct FftButterfly {
    uint32_t p = 0, q = 0;
};
struct FftGroup {
    uint32_t twiddle_index = 0;  // W_N^{twiddle_index}
    std::vector<FftButterfly> butterflies;
};
struct FftStage {
    std::vector<FftGroup> groups;
};
struct FftSchedule {
    uint32_t n = 0;
    std::vector<FftStage> stages;

    static FftSchedule build(uint32_t n);
};

// Executes the schedule's canonical butterfly rows at double precision with
// exact coefficients and the 1/2 per-stage scale; equals DFT(x)/n up to
// floating-point error. Input in natural order.
std::vector<std::complex<double>> fft_schedule_float(std::span<const std::complex<double>> x);

// Reorders a conv layer's flat simulator output into [m][spatial] using the
// plan's block table.
std::vector<int64_t> reassemble_conv_output(const TensorPlan& plan,
                                            std::span<const int64_t> flat);

// Requantization shift so that accumulators bounded by max_abs fit out_bits.
int safe_requant_shift(int64_t max_abs, int out_bits);

}  // namespace sigdla

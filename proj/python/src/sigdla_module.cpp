#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sigdla/cli.hpp"
#include "sigdla/engine.hpp"
#include "sigdla/isa.hpp"
#include "sigdla/mapper.hpp"
#include "sigdla/reference.hpp"
#include "sigdla/workload.hpp"

namespace py = pybind11;
using namespace sigdla;

namespace {

MachineConfig machine_from(const std::string& json_text) {
    return json_text.empty() ? MachineConfig{} : machine_from_json_text(json_text);
}

py::dict report_dict(const CycleReport& r) {
    py::dict d;
    d["total_cycles"] = r.total_cycles;
    d["compute_cycles"] = r.compute_cycles;
    d["shuffle_cycles"] = r.shuffle_cycles;
    d["dma_cycles"] = r.dma_cycles;
    d["stall_cycles"] = r.stall_cycles;
    d["mac_ops"] = r.mac_ops;
    d["inter_stage_dma_bytes"] = r.inter_stage_dma_bytes;
    d["schedule"] = r.overlap_dma ? "overlap" : "sequential";
    return d;
}

}  // namespace

PYBIND11_MODULE(_sigdla, m) {
    m.doc() = "SigDLA accelerator simulator bindings";

    m.def("assemble", [](const std::string& text) {
        auto bytes = isa::to_bytes(isa::assemble(text));
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    });
    m.def("disassemble", [](const py::bytes& data) {
        std::string raw = data;
        std::span<const uint8_t> bytes(reinterpret_cast<const uint8_t*>(raw.data()), raw.size());
        return isa::disassemble(isa::from_bytes(bytes));
    });

    m.def("count_mult_adds", [](const std::string& workload_json) {
        return count_mult_adds(workload_from_json_text(workload_json));
    });

    m.def(
        "run_workload",
        [](const std::string& workload_json, const std::string& machine_json,
           const std::vector<int64_t>& input, uint64_t seed) {
            Workload w = workload_from_json_text(workload_json);
            MachineConfig mc = machine_from(machine_json);
            Lowered low = map_workload(w, mc);
            std::vector<int64_t> vals = input;
            if (vals.empty())
                vals = cli::generated_input(low.plan.input, seed, w.input_value_bits);
            RunResult res = run(low, vals, mc);
            py::dict d;
            d["outputs"] = res.outputs;
            d["output_scale"] = low.plan.output_scale;
            d["input_count"] = low.plan.input.count;
            d["report"] = report_dict(res.report);
            return d;
        },
        py::arg("workload_json"), py::arg("machine_json") = std::string(),
        py::arg("input") = std::vector<int64_t>{}, py::arg("seed") = uint64_t{0});

    m.def(
        "compare_configs",
        [](const std::string& workload_json, const std::string& machine_json, int a_bits_a,
           int w_bits_a, int a_bits_b, int w_bits_b) {
            Workload w = workload_from_json_text(workload_json);
            return compare_configs(w, {a_bits_a, w_bits_a}, {a_bits_b, w_bits_b},
                                   machine_from(machine_json));
        },
        py::arg("workload_json"), py::arg("machine_json") = std::string(), py::arg("a_bits_a") = 4,
        py::arg("w_bits_a") = 4, py::arg("a_bits_b") = 16, py::arg("w_bits_b") = 16);

    m.def("fir_oracle", [](const std::vector<int64_t>& x, const std::vector<int64_t>& h) {
        return ref::fir_oracle(x, h);
    });
    m.def("golden_fft_fixed", [](const std::vector<int64_t>& interleaved, int bits) {
        return ref::golden_fft_fixed(interleaved, bits);
    });

    m.attr("__version__") = "0.1.0";
}

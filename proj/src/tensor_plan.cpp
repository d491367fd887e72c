#include "sigdla/tensor_plan.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace sigdla {

using nlohmann::json;

std::string plan_to_json(const TensorPlan& plan) {
    json j;
    j["constants"] = json::array();
    for (const auto& t : plan.constants)
        j["constants"].push_back({{"name", t.name},
                                  {"address", t.dram_addr},
                                  {"length", t.bytes.size()},
                                  {"file", t.name + ".bin"}});
    j["input"] = {{"address", plan.input.dram_addr},
                  {"region_bytes", plan.input.region_bytes},
                  {"elem_offset", plan.input.elem_offset},
                  {"elem_bits", plan.input.elem_bits},
                  {"count", plan.input.count},
                  {"frac_bits", plan.input.frac_bits},
                  {"complex", plan.input.complex_pairs}};
    j["outputs"] = json::array();
    for (const auto& s : plan.outputs)
        j["outputs"].push_back({{"on_chip", s.on_chip},
                                {"address", s.byte_addr},
                                {"elem_bits", s.elem_bits},
                                {"count", s.count}});
    j["output_scale"] = plan.output_scale;
    j["prologue_end_pc"] = plan.prologue_end_pc;
    j["epilogue_start_pc"] = plan.epilogue_start_pc;
    j["dram_bytes"] = plan.dram_bytes;
    j["analytic_mult_adds"] = plan.analytic_mult_adds;
    return j.dump(2) + "\n";
}

std::string write_plan(const TensorPlan& plan, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const auto& t : plan.constants) {
        std::ofstream f(fs::path(dir) / (t.name + ".bin"), std::ios::binary);
        if (!f) throw Error("cannot write tensor " + t.name);
        f.write(reinterpret_cast<const char*>(t.bytes.data()),
                static_cast<std::streamsize>(t.bytes.size()));
    }
    fs::path manifest = fs::path(dir) / "plan.json";
    std::ofstream mf(manifest);
    if (!mf) throw Error("cannot write plan manifest");
    mf << plan_to_json(plan);
    return manifest.string();
}

}  // namespace sigdla

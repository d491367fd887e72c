#include "sigdla/engine.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sigdla/mapper.hpp"
#include "sigdla/quantize.hpp"

namespace sigdla {

using nlohmann::json;

MachineConfig machine_from_json_text(const std::string& text) {
    json j = json::parse(text);
    MachineConfig c;
    c.banks = j.value("banks", c.banks);
    c.bank_kib = j.value("bank_kib", c.bank_kib);
    c.offchip_mib = j.value("offchip_mib", c.offchip_mib);
    c.bandwidth_mb_s = j.value("bandwidth_mb_s", c.bandwidth_mb_s);
    c.frequency_mhz = j.value("frequency_mhz", c.frequency_mhz);
    c.dma_setup_cycles = j.value("dma_setup_cycles", c.dma_setup_cycles);
    c.overlap_dma = j.value("overlap_dma", c.overlap_dma);
    c.cycle_budget = j.value("cycle_budget", c.cycle_budget);
    if (c.bandwidth_mb_s == 0 || c.frequency_mhz == 0)
        throw Error("machine config: bandwidth and frequency must be positive");
    return c;
}

MachineConfig machine_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open machine config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return machine_from_json_text(ss.str());
}

std::string CycleReport::to_json() const {
    json j;
    j["total_cycles"] = total_cycles;
    j["compute_cycles"] = compute_cycles;
    j["shuffle_cycles"] = shuffle_cycles;
    j["dma_cycles"] = dma_cycles;
    j["stall_cycles"] = stall_cycles;
    j["mac_ops"] = mac_ops;
    j["inter_stage_dma_bytes"] = inter_stage_dma_bytes;
    j["schedule"] = overlap_dma ? "overlap" : "sequential";
    return j.dump(2) + "\n";
}

std::string CycleReport::to_csv() const {
    std::ostringstream os;
    os << "total_cycles,compute_cycles,shuffle_cycles,dma_cycles,stall_cycles,mac_ops,"
          "inter_stage_dma_bytes,schedule\n";
    os << total_cycles << ',' << compute_cycles << ',' << shuffle_cycles << ',' << dma_cycles
       << ',' << stall_cycles << ',' << mac_ops << ',' << inter_stage_dma_bytes << ','
       << (overlap_dma ? "overlap" : "sequential") << '\n';
    return os.str();
}

Machine::Machine(const MachineConfig& c)
    : cfg(c),
      onchip(c.banks, c.bank_kib * 1024),
      offchip(c.offchip_mib << 20, c.bandwidth_mb_s, c.dma_setup_cycles) {}

int64_t read_element(const OnChipBuffer& buf, uint32_t base_word, uint64_t elem_index, int bits) {
    uint64_t bit = elem_index * static_cast<uint64_t>(bits);
    uint64_t word = base_word + bit / 64;
    int shift = static_cast<int>(bit % 64);
    uint64_t raw = (buf.read_word_index(word) >> shift) & ((bits == 64) ? ~0ull : ((uint64_t{1} << bits) - 1));
    // sign extend
    if (raw & (uint64_t{1} << (bits - 1))) raw |= ~((uint64_t{1} << bits) - 1);
    return static_cast<int64_t>(raw);
}

void write_element(OnChipBuffer& buf, uint32_t base_word, uint64_t elem_index, int bits,
                   int64_t value) {
    if (!mac::fits(value, bits))
        throw EngineFault("value " + std::to_string(value) + " does not fit a " +
                          std::to_string(bits) + "-bit element");
    uint64_t bit = elem_index * static_cast<uint64_t>(bits);
    uint64_t word = base_word + bit / 64;
    int shift = static_cast<int>(bit % 64);
    uint64_t mask = ((bits == 64) ? ~0ull : ((uint64_t{1} << bits) - 1)) << shift;
    uint64_t raw = (static_cast<uint64_t>(value) << shift) & mask;
    buf.write_word_index(word, (buf.read_word_index(word) & ~mask) | raw);
}

namespace {

void charge_budget(Machine& m) {
    if (m.work_cycles() > m.cfg.cycle_budget)
        throw EngineFault("cycle budget exceeded (" + std::to_string(m.cfg.cycle_budget) + ")",
                          static_cast<long>(m.pc));
}

void exec_conv(Machine& m, const isa::ConvExec& c) {
    mac::BitwidthConfig bw = m.bitwidth;
    int lanes = mac::lanes_per_pe(bw);
    int out_bits = c.wide_out ? 32 : bw.a_bits;

    std::vector<int64_t> acts(static_cast<std::size_t>(lanes));
    std::array<std::vector<int64_t>, mac::kPeCount> wts;
    for (auto& v : wts) v.assign(static_cast<std::size_t>(lanes), 0);
    std::vector<std::span<const int64_t>> view_list(mac::kPeCount);

    uint64_t steps_per_row = (c.k_len + static_cast<uint32_t>(lanes) - 1) / static_cast<uint32_t>(lanes);

    for (uint32_t c0 = 0; c0 < c.out_cols; c0 += mac::kPeCount) {
        uint32_t ncols = std::min<uint32_t>(mac::kPeCount, c.out_cols - c0);
        for (uint32_t r = 0; r < c.out_rows; ++r) {
            m.array.reset();
            uint64_t row_base = static_cast<uint64_t>(r) * c.row_stride;
            for (uint64_t s = 0; s < steps_per_row; ++s) {
                for (int l = 0; l < lanes; ++l) {
                    uint64_t k = s * static_cast<uint64_t>(lanes) + static_cast<uint64_t>(l);
                    acts[static_cast<std::size_t>(l)] =
                        k < c.k_len ? read_element(m.onchip, c.fmap_base, row_base + k, bw.a_bits)
                                    : 0;
                    for (uint32_t cc = 0; cc < mac::kPeCount; ++cc) {
                        int64_t wv = 0;
                        if (cc < ncols && k < c.k_len)
                            wv = read_element(m.onchip, c.weight_base,
                                              static_cast<uint64_t>(c0 + cc) * c.k_len + k,
                                              bw.w_bits);
                        wts[cc][static_cast<std::size_t>(l)] = wv;
                    }
                }
                for (int p = 0; p < mac::kPeCount; ++p) view_list[static_cast<std::size_t>(p)] = wts[static_cast<std::size_t>(p)];
                mac::array_step(m.array, acts, view_list, bw);
                m.compute_cycles += 1;
                m.mac_ops += static_cast<uint64_t>(lanes) * ncols;
            }
            for (uint32_t cc = 0; cc < ncols; ++cc) {
                int64_t acc = m.array.pes[cc].total(lanes);
                int64_t y = rne_shift(acc, static_cast<int>(c.requant_shift));
                uint64_t elem = c.out_transpose
                                    ? static_cast<uint64_t>(c0 + cc) * c.out_rows + r
                                    : static_cast<uint64_t>(r) * c.out_cols + (c0 + cc);
                write_element(m.onchip, c.out_base, elem, out_bits, y);
            }
        }
    }
}

void exec_shuffle(Machine& m, const isa::ShuffleExec& s) {
    if (!m.shuffle_cfg.complete() || !m.shuffle_sealed)
        throw EngineFault("shuffle-exec before a finished ctrl-shuffling set",
                          static_cast<long>(m.pc));
    if (s.src_base + 16 > fabric::BcifRegisterFile::kRegionB)
        throw EngineFault("shuffle window must lie in staging region A", static_cast<long>(m.pc));
    if (s.dst_base < fabric::BcifRegisterFile::kRegionB ||
        s.dst_base + s.word_count > fabric::BcifRegisterFile::kCapacity)
        throw EngineFault("shuffle destination must lie in staging region B",
                          static_cast<long>(m.pc));

    fabric::PaddingConfig pad_cfg;
    pad_cfg.element_bits = m.bitwidth.a_bits;
    for (int slot = 0; slot < 16; ++slot) {
        if (m.pending_pad[static_cast<std::size_t>(slot)]) {
            pad_cfg.mask[static_cast<std::size_t>(slot)] = true;
            pad_cfg.values[static_cast<std::size_t>(slot)] = *m.pending_pad[static_cast<std::size_t>(slot)];
        }
    }

    std::span<const fabric::Word64, 16> window(m.rf.staging.data() + s.src_base, 16);
    for (uint32_t t = 0; t < s.word_count; ++t) {
        fabric::Word64 out = fabric::pad(fabric::shuffle_step(window, m.shuffle_cfg), pad_cfg);
        m.rf.staging[s.dst_base + t] = out;
    }
    // 1 shuffle + 1 BCIF read + 1 BCIF write cycle per output word.
    m.shuffle_cycles += 3ull * s.word_count;
    m.pending_pad.fill(std::nullopt);
    m.staging_reset_pending = true;
}

void exec_dma(Machine& m, bool load, uint64_t dram, uint32_t bank_start, uint32_t bank_offset,
              uint64_t bytes) {
    DmaDescriptor d;
    d.dir = load ? DmaDescriptor::Dir::Load : DmaDescriptor::Dir::Store;
    d.dram_addr = dram;
    d.bank_start = bank_start;
    d.bank_offset = bank_offset;
    d.length_bytes = bytes;
    m.dma_cycles += dma_transfer(m.offchip, m.onchip, d, m.cfg.frequency_mhz);
    if (m.pc >= m.prologue_end_pc && m.pc < m.epilogue_start_pc) m.inter_stage_dma_bytes += bytes;
}

}  // namespace

void step(Machine& m, const isa::Program& program) {
    if (m.halted) throw EngineFault("machine already halted");
    if (m.pc >= program.code.size())
        throw EngineFault("program counter ran past the last instruction",
                          static_cast<long>(m.pc));
    const isa::Instruction& ins = program.code[m.pc];
    try {
        std::visit(
            [&m](const auto& i) {
                using T = std::decay_t<decltype(i)>;
                if constexpr (std::is_same_v<T, isa::Halt>) {
                    m.halted = true;
                    m.compute_cycles += 1;
                } else if constexpr (std::is_same_v<T, isa::RdBuf>) {
                    if (m.staging_reset_pending) {
                        m.rf.reset_fill();
                        m.staging_reset_pending = false;
                    }
                    m.rf.read_desc = {i.bank_start, i.bank_offset, i.length};
                    fabric::bcif_read(m.onchip, m.rf);
                    m.shuffle_cycles += 1;
                } else if constexpr (std::is_same_v<T, isa::WrBuf>) {
                    m.rf.write_desc = {i.bank_start, i.bank_offset, i.length};
                    fabric::bcif_write(m.onchip, m.rf);
                    m.shuffle_cycles += 1;
                    m.staging_reset_pending = true;
                } else if constexpr (std::is_same_v<T, isa::CtrlBitwidth>) {
                    m.bitwidth = {static_cast<int>(i.a_bits), static_cast<int>(i.w_bits)};
                    m.compute_cycles += 1;
                } else if constexpr (std::is_same_v<T, isa::CtrlShuffling>) {
                    m.shuffle_cfg.units[i.unit_num] = {static_cast<uint8_t>(i.sel_code),
                                                       static_cast<uint8_t>(i.split_code)};
                    m.shuffle_cfg.configured[i.unit_num] = true;
                    m.shuffle_sealed = i.finish_flag;
                    m.shuffle_cycles += 1;
                } else if constexpr (std::is_same_v<T, isa::CtrlPadding>) {
                    m.pending_pad[i.position] = i.value;
                    m.shuffle_cycles += 1;
                } else if constexpr (std::is_same_v<T, isa::LoadTile>) {
                    exec_dma(m, true, i.dram_addr, i.bank_start, i.bank_offset, i.length_bytes);
                } else if constexpr (std::is_same_v<T, isa::StoreTile>) {
                    exec_dma(m, false, i.dram_addr, i.bank_start, i.bank_offset, i.length_bytes);
                } else if constexpr (std::is_same_v<T, isa::ConvExec>) {
                    exec_conv(m, i);
                } else if constexpr (std::is_same_v<T, isa::ShuffleExec>) {
                    exec_shuffle(m, i);
                }
            },
            ins);
    } catch (const EngineFault&) {
        throw;
    } catch (const MemoryFault&) {
        throw;
    } catch (const std::exception& e) {
        throw EngineFault(std::string(e.what()) + " [" + isa::to_string(ins) + "]",
                          static_cast<long>(m.pc));
    }
    m.pc += 1;
    charge_budget(m);
}

namespace {

void pack_dram_element(OffChipMemory& mem, uint64_t region_addr, uint64_t elem_index, int bits,
                       int64_t value) {
    if (!mac::fits(value, bits))
        throw Error("input value " + std::to_string(value) + " does not fit " +
                    std::to_string(bits) + " bits");
    uint64_t bit = elem_index * static_cast<uint64_t>(bits);
    uint64_t byte = region_addr + bit / 8;
    if (bits >= 8) {
        for (int b = 0; b < bits / 8; ++b) {
            uint8_t v = static_cast<uint8_t>(static_cast<uint64_t>(value) >> (8 * b));
            mem.write_bytes(byte + static_cast<uint64_t>(b), std::span<const uint8_t>(&v, 1));
        }
    } else {
        // 4-bit elements: two per byte, low nibble first.
        uint8_t cur = mem.read_byte(byte);
        int shift = static_cast<int>(bit % 8);
        uint8_t mask = static_cast<uint8_t>(0xF << shift);
        uint8_t nv = static_cast<uint8_t>((cur & ~mask) |
                                          ((static_cast<uint64_t>(value) & 0xF) << shift));
        mem.write_bytes(byte, std::span<const uint8_t>(&nv, 1));
    }
}

int64_t read_output_element(const Machine& m, const OutputSegment& seg, uint64_t idx) {
    uint64_t bit = idx * seg.elem_bits;
    uint64_t byte_addr = seg.byte_addr + bit / 8;
    uint64_t raw = 0;
    if (seg.elem_bits >= 8) {
        for (uint32_t b = 0; b < seg.elem_bits / 8; ++b) {
            uint8_t v;
            if (seg.on_chip) {
                std::span<uint8_t> one(&v, 1);
                m.onchip.read_bytes(byte_addr + b, one);
            } else {
                v = m.offchip.read_byte(byte_addr + b);
            }
            raw |= static_cast<uint64_t>(v) << (8 * b);
        }
    } else {
        uint8_t v;
        if (seg.on_chip) {
            std::span<uint8_t> one(&v, 1);
            m.onchip.read_bytes(byte_addr, one);
        } else {
            v = m.offchip.read_byte(byte_addr);
        }
        raw = (v >> (bit % 8)) & 0xF;
    }
    if (raw & (uint64_t{1} << (seg.elem_bits - 1))) raw |= ~((uint64_t{1} << seg.elem_bits) - 1);
    return static_cast<int64_t>(raw);
}

}  // namespace

RunResult run_on(Machine& m, const Lowered& lowered, std::span<const int64_t> input) {
    const TensorPlan& plan = lowered.plan;
    for (const auto& t : plan.constants) m.offchip.write_bytes(t.dram_addr, t.bytes);

    if (input.size() != plan.input.count)
        throw Error("expected " + std::to_string(plan.input.count) + " input values, got " +
                    std::to_string(input.size()));
    if (plan.expand_map.empty()) {
        for (uint64_t i = 0; i < input.size(); ++i)
            pack_dram_element(m.offchip, plan.input.dram_addr, plan.input.elem_offset + i,
                              static_cast<int>(plan.input.elem_bits), input[i]);
    } else {
        for (uint64_t e = 0; e < plan.expand_map.size(); ++e) {
            int32_t src = plan.expand_map[e];
            int64_t v = src < 0 ? 0 : input[static_cast<uint64_t>(src)];
            pack_dram_element(m.offchip, plan.input.dram_addr, plan.input.elem_offset + e,
                              static_cast<int>(plan.input.elem_bits), v);
        }
    }

    m.prologue_end_pc = plan.prologue_end_pc;
    m.epilogue_start_pc = plan.epilogue_start_pc;

    while (!m.halted) step(m, lowered.program);

    RunResult res;
    res.outputs.reserve(plan.output_count());
    for (const auto& seg : plan.outputs)
        for (uint64_t i = 0; i < seg.count; ++i) res.outputs.push_back(read_output_element(m, seg, i));

    CycleReport& r = res.report;
    r.compute_cycles = m.compute_cycles;
    r.shuffle_cycles = m.shuffle_cycles;
    r.dma_cycles = m.dma_cycles;
    r.mac_ops = m.mac_ops;
    r.inter_stage_dma_bytes = m.inter_stage_dma_bytes;
    r.overlap_dma = m.cfg.overlap_dma;
    if (m.cfg.overlap_dma) {
        r.total_cycles = std::max(m.dma_cycles, m.compute_cycles + m.shuffle_cycles);
        r.stall_cycles = 0;
    } else {
        r.stall_cycles = 0;
        r.total_cycles = m.compute_cycles + m.shuffle_cycles + m.dma_cycles + r.stall_cycles;
    }
    return res;
}

RunResult run(const Lowered& lowered, std::span<const int64_t> input, const MachineConfig& cfg) {
    Machine m(cfg);
    return run_on(m, lowered, input);
}

double compare_configs(const Workload& w, mac::BitwidthConfig cfg_a, mac::BitwidthConfig cfg_b,
                       const MachineConfig& mc) {
    auto cycles_for = [&](mac::BitwidthConfig cfg) {
        Workload wk = w;
        wk.cfg = cfg;
        for (auto& s : wk.stages) s.cfg = cfg;
        Lowered low = map_workload(wk, mc);
        std::vector<int64_t> zeros(low.plan.input.count, 0);
        return run(low, zeros, mc).report.total_cycles;
    };
    uint64_t a = cycles_for(cfg_a);
    uint64_t b = cycles_for(cfg_b);
    return static_cast<double>(b) / static_cast<double>(a);
}

}  // namespace sigdla

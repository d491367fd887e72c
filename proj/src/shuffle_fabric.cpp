#include "sigdla/shuffle_fabric.hpp"

#include <string>

#include "sigdla/memory.hpp"

namespace sigdla::fabric {

uint8_t shuffle_unit(std::span<const Word64, 16> inputs, ShuffleUnitConfig cfg) {
    if (cfg.sel_code > 15 || cfg.split_code > 15) throw Error("shuffle unit config out of range");
    return nibble(inputs[cfg.sel_code], cfg.split_code);
}

Word64 shuffle_step(std::span<const Word64, 16> inputs, const ShuffleArrayConfig& cfg) {
    if (!cfg.complete()) throw EngineFault("shuffle array not fully configured");
    Word64 out = 0;
    for (int i = 0; i < 16; ++i) out = set_nibble(out, i, shuffle_unit(inputs, cfg.units[i]));
    return out;
}

Word64 pad(Word64 w, const PaddingConfig& cfg) {
    if (cfg.element_bits != 4 && cfg.element_bits != 8 && cfg.element_bits != 16)
        throw Error("padding element width must be 4, 8, or 16");
    int slots = cfg.slot_count();
    Word64 out = w;
    for (int s = 0; s < 16; ++s) {
        if (!cfg.mask[s]) continue;
        if (s >= slots)
            throw EngineFault("padding position " + std::to_string(s) + " invalid at " +
                              std::to_string(cfg.element_bits) + "-bit elements");
        uint64_t v = cfg.values[s];
        if (cfg.element_bits < 64 && (v >> cfg.element_bits) != 0)
            throw EngineFault("padding value exceeds element width");
        Word64 mask = ((Word64{1} << cfg.element_bits) - 1) << (s * cfg.element_bits);
        out = (out & ~mask) | (v << (s * cfg.element_bits));
    }
    return out;
}

void bcif_read(const OnChipBuffer& buf, BcifRegisterFile& rf) {
    const auto& d = rf.read_desc;
    if (rf.fill + d.length > BcifRegisterFile::kRegionB)
        throw EngineFault("BCIF staging overflow (region A holds 32 words)");
    if (d.bank_start >= buf.banks()) throw MemoryFault("rd-buf bank out of range");
    if (d.bank_offset >= buf.words_per_bank()) throw MemoryFault("rd-buf bank offset out of range");
    uint64_t w0 = buf.word_index(d.bank_start, d.bank_offset);
    if (w0 + d.length > buf.total_words()) throw MemoryFault("rd-buf read past end of buffer");
    for (uint32_t i = 0; i < d.length; ++i) rf.staging[rf.fill + i] = buf.read_word_index(w0 + i);
    rf.fill += d.length;
}

void bcif_write(OnChipBuffer& buf, const BcifRegisterFile& rf) {
    const auto& d = rf.write_desc;
    if (BcifRegisterFile::kRegionB + d.length > BcifRegisterFile::kCapacity)
        throw EngineFault("wr-buf length exceeds output staging (32 words)");
    if (d.bank_start >= buf.banks()) throw MemoryFault("wr-buf bank out of range");
    if (d.bank_offset >= buf.words_per_bank()) throw MemoryFault("wr-buf bank offset out of range");
    uint64_t w0 = buf.word_index(d.bank_start, d.bank_offset);
    if (w0 + d.length > buf.total_words()) throw MemoryFault("wr-buf write past end of buffer");
    for (uint32_t i = 0; i < d.length; ++i)
        buf.write_word_index(w0 + i, rf.staging[BcifRegisterFile::kRegionB + i]);
}

}  // namespace sigdla::fabric

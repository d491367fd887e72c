#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "sigdla/error.hpp"

namespace sigdla {

class OnChipBuffer;

namespace fabric {

// 64-bit fabric word; nibble i occupies bits [4i, 4i+3], i = 0 least significant.
using Word64 = uint64_t;

inline uint8_t nibble(Word64 w, int i) { return static_cast<uint8_t>((w >> (4 * i)) & 0xF); }

inline Word64 set_nibble(Word64 w, int i, uint8_t v) {
    Word64 mask = Word64{0xF} << (4 * i);
    return (w & ~mask) | ((Word64{v} & 0xF) << (4 * i));
}

struct ShuffleUnitConfig {
    uint8_t sel_code = 0;    // which of the 16 input words
    uint8_t split_code = 0;  // which nibble of that word
    bool operator==(const ShuffleUnitConfig&) const = default;
};

// Unit i feeds output nibble i; there is no destination field.
struct ShuffleArrayConfig {
    std::array<ShuffleUnitConfig, 16> units{};
    std::array<bool, 16> configured{};

    bool complete() const {
        for (bool c : configured)
            if (!c) return false;
        return true;
    }
};

uint8_t shuffle_unit(std::span<const Word64, 16> inputs, ShuffleUnitConfig cfg);
Word64 shuffle_step(std::span<const Word64, 16> inputs, const ShuffleArrayConfig& cfg);

// Element slots to overwrite with constants. Slot count is 64/element_bits
// (16, 8, or 4); each value must fit the element width.
struct PaddingConfig {
    int element_bits = 8;
    std::array<bool, 16> mask{};
    std::array<uint64_t, 16> values{};

    int slot_count() const { return 64 / element_bits; }
};

Word64 pad(Word64 w, const PaddingConfig& cfg);

struct BufDescriptor {
    uint32_t bank_start = 0;
    uint32_t bank_offset = 0;
    uint32_t length = 0;
};

// BCIF staging: 64 words, input region A = slots [0,32), output region
// B = slots [32,64). rd-buf appends to region A; shuffle results land in
// region B; wr-buf drains region B from slot 32.
struct BcifRegisterFile {
    static constexpr uint32_t kCapacity = 64;
    static constexpr uint32_t kRegionB = 32;

    BufDescriptor read_desc{};
    BufDescriptor write_desc{};
    std::array<Word64, kCapacity> staging{};
    uint32_t fill = 0;  // next free input slot in region A

    void reset_fill() { fill = 0; }
};

// Stages read_desc.length words from on-chip memory into region A.
void bcif_read(const OnChipBuffer& buf, BcifRegisterFile& rf);

// Writes write_desc.length words from region B back to on-chip memory.
void bcif_write(OnChipBuffer& buf, const BcifRegisterFile& rf);

}  // namespace fabric
}  // namespace sigdla

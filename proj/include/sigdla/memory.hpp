#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sigdla/error.hpp"

namespace sigdla {

// Banked on-chip data buffer. Default geometry is 18 banks of 8 KB:
// 128 KB main region plus a 16 KB region carved out for signal processing
// (banks 16 and 17). Zero-initialized; addresses are byte addresses and
// word accesses must be 8-byte aligned.
class OnChipBuffer {
  public:
    OnChipBuffer(uint32_t banks = 18, uint32_t bank_bytes = 8 * 1024);

    uint32_t banks() const { return banks_; }
    uint32_t bank_bytes() const { return bank_bytes_; }
    uint32_t words_per_bank() const { return bank_bytes_ / 8; }
    uint64_t total_bytes() const { return static_cast<uint64_t>(banks_) * bank_bytes_; }
    uint64_t total_words() const { return total_bytes() / 8; }

    uint64_t read_word(uint64_t byte_addr) const;
    void write_word(uint64_t byte_addr, uint64_t w);

    // Word-index accessors used by the execution engine.
    uint64_t read_word_index(uint64_t word_index) const;
    void write_word_index(uint64_t word_index, uint64_t w);

    void read_bytes(uint64_t byte_addr, std::span<uint8_t> out) const;
    void write_bytes(uint64_t byte_addr, std::span<const uint8_t> in);

    uint64_t word_index(uint32_t bank, uint32_t bank_word_offset) const;

  private:
    void check_range(uint64_t byte_addr, uint64_t len) const;

    uint32_t banks_;
    uint32_t bank_bytes_;
    std::vector<uint64_t> words_;
};

// Byte-addressable off-chip memory behind a bandwidth-limited channel.
class OffChipMemory {
  public:
    explicit OffChipMemory(uint64_t bytes = 16ull << 20, uint64_t bandwidth_mb_s = 1600,
                           uint32_t setup_cycles = 20);

    uint64_t size() const { return bytes_.size(); }
    uint64_t bandwidth_mb_s() const { return bandwidth_mb_s_; }
    uint32_t setup_cycles() const { return setup_cycles_; }

    uint8_t read_byte(uint64_t addr) const;
    void read_bytes(uint64_t addr, std::span<uint8_t> out) const;
    void write_bytes(uint64_t addr, std::span<const uint8_t> in);

  private:
    void check_range(uint64_t addr, uint64_t len) const;

    std::vector<uint8_t> bytes_;
    uint64_t bandwidth_mb_s_;
    uint32_t setup_cycles_;
};

struct DmaDescriptor {
    enum class Dir { Load, Store };  // Load: off-chip -> on-chip
    Dir dir = Dir::Load;
    uint64_t dram_addr = 0;
    uint32_t bank_start = 0;
    uint32_t bank_offset = 0;   // word index within the bank
    uint64_t length_bytes = 0;  // multiple of 8
};

// Copies the described range and returns the cycle cost:
//   setup + ceil(length_bytes * frequency_mhz / bandwidth_mb_s)
// (16 bytes per cycle at the 1600 MB/s / 100 MHz defaults).
uint64_t dma_transfer(OffChipMemory& off, OnChipBuffer& on, const DmaDescriptor& d,
                      uint32_t frequency_mhz);

uint64_t dma_cycles(uint64_t length_bytes, uint64_t bandwidth_mb_s, uint32_t setup_cycles,
                    uint32_t frequency_mhz);

// Test-fixture memory images: a JSON manifest of {name, address, length,
// file} entries naming raw little-endian binary files.
struct MemoryImageEntry {
    std::string name;
    uint64_t address = 0;
    uint64_t length = 0;
    std::string file;
};

std::vector<MemoryImageEntry> read_image_manifest(const std::string& manifest_path);
void load_memory_image(OffChipMemory& mem, const std::string& manifest_path);
void store_memory_image(const OffChipMemory& mem, const std::vector<MemoryImageEntry>& entries,
                        const std::string& manifest_path);

}  // namespace sigdla

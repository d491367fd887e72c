#include "sigdla/memory.hpp"

#include <fstream>

#include "json.hpp"

namespace sigdla {

OnChipBuffer::OnChipBuffer(uint32_t banks, uint32_t bank_bytes)
    : banks_(banks), bank_bytes_(bank_bytes), words_(static_cast<size_t>(banks) * bank_bytes / 8, 0) {
    if (banks == 0 || bank_bytes == 0 || bank_bytes % 8 != 0)
        throw Error("bank geometry must be nonzero with 8-byte-aligned banks");
}

void OnChipBuffer::check_range(uint64_t byte_addr, uint64_t len) const {
    if (byte_addr + len > total_bytes())
        throw MemoryFault("on-chip access [" + std::to_string(byte_addr) + ", +" +
                          std::to_string(len) + ") out of bounds");
}

uint64_t OnChipBuffer::read_word(uint64_t byte_addr) const {
    if (byte_addr % 8 != 0) throw MemoryFault("unaligned word read at " + std::to_string(byte_addr));
    check_range(byte_addr, 8);
    return words_[byte_addr / 8];
}

void OnChipBuffer::write_word(uint64_t byte_addr, uint64_t w) {
    if (byte_addr % 8 != 0)
        throw MemoryFault("unaligned word write at " + std::to_string(byte_addr));
    check_range(byte_addr, 8);
    words_[byte_addr / 8] = w;
}

uint64_t OnChipBuffer::read_word_index(uint64_t word_index) const {
    if (word_index >= total_words()) throw MemoryFault("word index out of bounds");
    return words_[word_index];
}

void OnChipBuffer::write_word_index(uint64_t word_index, uint64_t w) {
    if (word_index >= total_words()) throw MemoryFault("word index out of bounds");
    words_[word_index] = w;
}

void OnChipBuffer::read_bytes(uint64_t byte_addr, std::span<uint8_t> out) const {
    check_range(byte_addr, out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        uint64_t a = byte_addr + i;
        out[i] = static_cast<uint8_t>(words_[a / 8] >> (8 * (a % 8)));
    }
}

void OnChipBuffer::write_bytes(uint64_t byte_addr, std::span<const uint8_t> in) {
    check_range(byte_addr, in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        uint64_t a = byte_addr + i;
        uint64_t shift = 8 * (a % 8);
        words_[a / 8] = (words_[a / 8] & ~(uint64_t{0xFF} << shift)) |
                        (static_cast<uint64_t>(in[i]) << shift);
    }
}

uint64_t OnChipBuffer::word_index(uint32_t bank, uint32_t bank_word_offset) const {
    if (bank >= banks_) throw MemoryFault("bank " + std::to_string(bank) + " out of range");
    return static_cast<uint64_t>(bank) * words_per_bank() + bank_word_offset;
}

OffChipMemory::OffChipMemory(uint64_t bytes, uint64_t bandwidth_mb_s, uint32_t setup_cycles)
    : bytes_(bytes, 0), bandwidth_mb_s_(bandwidth_mb_s), setup_cycles_(setup_cycles) {
    if (bandwidth_mb_s == 0) throw Error("off-chip bandwidth must be positive");
}

void OffChipMemory::check_range(uint64_t addr, uint64_t len) const {
    if (addr + len > bytes_.size())
        throw MemoryFault("off-chip access [" + std::to_string(addr) + ", +" +
                          std::to_string(len) + ") out of bounds");
}

uint8_t OffChipMemory::read_byte(uint64_t addr) const {
    check_range(addr, 1);
    return bytes_[addr];
}

void OffChipMemory::read_bytes(uint64_t addr, std::span<uint8_t> out) const {
    check_range(addr, out.size());
    std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(addr), out.size(), out.begin());
}

void OffChipMemory::write_bytes(uint64_t addr, std::span<const uint8_t> in) {
    check_range(addr, in.size());
    std::copy(in.begin(), in.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(addr));
}

uint64_t dma_cycles(uint64_t length_bytes, uint64_t bandwidth_mb_s, uint32_t setup_cycles,
                    uint32_t frequency_mhz) {
    if (bandwidth_mb_s == 0 || frequency_mhz == 0) throw Error("bandwidth and frequency must be positive");
    // bytes/cycle = bandwidth / frequency; exact rational ceiling.
    uint64_t data = (length_bytes * frequency_mhz + bandwidth_mb_s - 1) / bandwidth_mb_s;
    return setup_cycles + data;
}

uint64_t dma_transfer(OffChipMemory& off, OnChipBuffer& on, const DmaDescriptor& d,
                      uint32_t frequency_mhz) {
    if (d.length_bytes % 8 != 0) throw MemoryFault("DMA length must be a multiple of 8 bytes");
    if (d.dram_addr % 8 != 0) throw MemoryFault("DMA dram address must be 8-byte aligned");
    uint64_t on_addr = on.word_index(d.bank_start, d.bank_offset) * 8;
    std::vector<uint8_t> tmp(d.length_bytes);
    if (d.dir == DmaDescriptor::Dir::Load) {
        off.read_bytes(d.dram_addr, tmp);
        on.write_bytes(on_addr, tmp);
    } else {
        on.read_bytes(on_addr, tmp);
        off.write_bytes(d.dram_addr, tmp);
    }
    return dma_cycles(d.length_bytes, off.bandwidth_mb_s(), off.setup_cycles(), frequency_mhz);
}

std::vector<MemoryImageEntry> read_image_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot open manifest " + manifest_path);
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<MemoryImageEntry> entries;
    for (const auto& e : j.at("entries")) {
        MemoryImageEntry me;
        me.name = e.at("name").get<std::string>();
        me.address = e.at("address").get<uint64_t>();
        me.length = e.at("length").get<uint64_t>();
        me.file = e.at("file").get<std::string>();
        entries.push_back(std::move(me));
    }
    return entries;
}

namespace {
std::string sibling_path(const std::string& manifest_path, const std::string& file) {
    auto slash = manifest_path.find_last_of('/');
    if (slash == std::string::npos) return file;
    return manifest_path.substr(0, slash + 1) + file;
}
}  // namespace

void load_memory_image(OffChipMemory& mem, const std::string& manifest_path) {
    for (const auto& e : read_image_manifest(manifest_path)) {
        std::ifstream f(sibling_path(manifest_path, e.file), std::ios::binary);
        if (!f) throw Error("cannot open image file " + e.file);
        std::vector<uint8_t> data(e.length);
        f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(e.length));
        if (static_cast<uint64_t>(f.gcount()) != e.length)
            throw Error("image file " + e.file + " shorter than manifest length");
        mem.write_bytes(e.address, data);
    }
}

void store_memory_image(const OffChipMemory& mem, const std::vector<MemoryImageEntry>& entries,
                        const std::string& manifest_path) {
    nlohmann::json j;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
        std::vector<uint8_t> data(e.length);
        mem.read_bytes(e.address, data);
        std::ofstream f(sibling_path(manifest_path, e.file), std::ios::binary);
        if (!f) throw Error("cannot write image file " + e.file);
        f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(e.length));
        j["entries"].push_back({{"name", e.name},
                                {"address", e.address},
                                {"length", e.length},
                                {"file", e.file}});
    }
    std::ofstream mf(manifest_path);
    if (!mf) throw Error("cannot write manifest " + manifest_path);
    mf << j.dump(2) << '\n';
}

}  // namespace sigdla

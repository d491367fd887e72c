#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sigdla/error.hpp"

namespace sigdla::isa {

// The five shuffling-fabric instructions plus the tensor/data-movement
// plumbing ops. Every instruction encodes to a fixed three-word (96-bit)
// little-endian form: opcode in bits [31:27] of word 0, fields packed
// LSB-first in declaration order through the remaining 91 payload bits.

struct RdBuf {
    uint32_t bank_start = 0;   // u6
    uint32_t bank_offset = 0;  // u12, word index within the bank
    uint32_t length = 0;       // u13, 64-bit words to stage
    bool operator==(const RdBuf&) const = default;
};

struct WrBuf {
    uint32_t bank_start = 0;   // u6
    uint32_t bank_offset = 0;  // u12
    uint32_t length = 0;       // u13, words drained from the output stage
    bool operator==(const WrBuf&) const = default;
};

struct CtrlBitwidth {
    uint32_t a_bits = 8;  // activation element width, one of 4/8/16
    uint32_t w_bits = 8;  // weight element width, one of 4/8/16
    bool operator==(const CtrlBitwidth&) const = default;
};

struct CtrlShuffling {
    uint32_t unit_num = 0;    // u4, which shuffling unit (= output nibble)
    uint32_t sel_code = 0;    // u4, source word select
    uint32_t split_code = 0;  // u4, nibble select within the source word
    bool finish_flag = false; // set on the last instruction of a config batch
    bool operator==(const CtrlShuffling&) const = default;
};

struct CtrlPadding {
    uint32_t position = 0;  // u4, element slot index
    uint32_t value = 0;     // u16 raw pattern, must fit the element width in use
    bool operator==(const CtrlPadding&) const = default;
};

struct LoadTile {
    uint64_t dram_addr = 0;     // u32, byte address, 8-aligned
    uint32_t bank_start = 0;    // u6
    uint32_t bank_offset = 0;   // u12
    uint64_t length_bytes = 0;  // u20, multiple of 8
    bool operator==(const LoadTile&) const = default;
};

struct StoreTile {
    uint64_t dram_addr = 0;
    uint32_t bank_start = 0;
    uint32_t bank_offset = 0;
    uint64_t length_bytes = 0;
    bool operator==(const StoreTile&) const = default;
};

// One tiled GEMM/convolution pass over the computing array:
//   out[r][c] = sum_k fmap[r*row_stride + k] * weight[c*k_len + k]
// with elements read densely (element width from the current bitwidth
// config) starting at word-granular base addresses. Output elements are
// requantized by an arithmetic right shift with round-half-to-even, or
// stored as raw 32-bit accumulators when wide_out is set. out_transpose
// swaps the output index to c*out_rows + r.
struct ConvExec {
    uint32_t fmap_base = 0;    // u15, on-chip word address
    uint32_t weight_base = 0;  // u15
    uint32_t out_base = 0;     // u15
    uint32_t out_rows = 0;     // u11
    uint32_t out_cols = 0;     // u4, kernels per pass (engine tiles by 8)
    uint32_t k_len = 0;        // u12, reduction length in elements
    uint32_t row_stride = 0;   // u12, elements between consecutive row windows
    uint32_t requant_shift = 0;  // u5
    bool wide_out = false;
    bool out_transpose = false;
    bool operator==(const ConvExec&) const = default;
};

// Runs the configured shuffling array: each of word_count steps reads the
// 16-word window at staging slot src_base, produces one padded word, and
// stores it at staging slot dst_base + step.
struct ShuffleExec {
    uint32_t src_base = 0;    // u6, input staging slot of the window
    uint32_t dst_base = 0;    // u6, output staging slot
    uint32_t word_count = 0;  // u16
    bool operator==(const ShuffleExec&) const = default;
};

struct Halt {
    bool operator==(const Halt&) const = default;
};

using Instruction = std::variant<Halt, RdBuf, WrBuf, CtrlBitwidth, CtrlShuffling,
                                 CtrlPadding, LoadTile, StoreTile, ConvExec, ShuffleExec>;

constexpr std::size_t kWordsPerInstruction = 3;

struct Program {
    std::vector<Instruction> code;
    std::vector<int> source_lines;  // 1-based, parallel to code when assembled from text

    bool operator==(const Program& o) const { return code == o.code; }
    std::size_t size() const { return code.size(); }
};

// Field-level validation beyond what the bit layout enforces.
// Throws DecodeError with a description of the offending field.
void validate(const Instruction& ins);

std::array<uint32_t, kWordsPerInstruction> encode(const Instruction& ins);
Instruction decode(std::span<const uint32_t, kWordsPerInstruction> words);

std::vector<uint32_t> encode_program(const Program& p);
Program decode_program(std::span<const uint32_t> words);

// Binary form: the encoded words as a little-endian byte stream.
std::vector<uint8_t> to_bytes(const Program& p);
Program from_bytes(std::span<const uint8_t> bytes);

// Newline-separated mnemonics with key=value operands; '#' starts a comment.
Program assemble(const std::string& source);
std::string disassemble(const Program& p);
std::string to_string(const Instruction& ins);

const char* mnemonic(const Instruction& ins);

}  // namespace sigdla::isa

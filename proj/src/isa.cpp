#include "sigdla/isa.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <sstream>

namespace sigdla::isa {

namespace {

enum Opcode : uint32_t {
    kHalt = 0,
    kRdBuf = 1,
    kWrBuf = 2,
    kCtrlBitwidth = 3,
    kCtrlShuffling = 4,
    kCtrlPadding = 5,
    kLoadTile = 6,
    kStoreTile = 7,
    kConvExec = 8,
    kShuffleExec = 9,
};

constexpr int kPayloadBits = 91;  // 27 in word 0 below the opcode, then 32 + 32

// Maps payload bit index -> (word, bit). Word 0 keeps bits [26:0].
constexpr std::pair<int, int> payload_slot(int p) {
    if (p < 27) return {0, p};
    if (p < 59) return {1, p - 27};
    return {2, p - 59};
}

struct BitWriter {
    std::array<uint32_t, 3> words{0, 0, 0};
    int pos = 0;

    void put(uint64_t value, int width) {
        for (int i = 0; i < width; ++i, ++pos) {
            auto [w, b] = payload_slot(pos);
            words[w] |= static_cast<uint32_t>((value >> i) & 1u) << b;
        }
    }
};

struct BitReader {
    std::span<const uint32_t, 3> words;
    int pos = 0;

    uint64_t get(int width) {
        uint64_t v = 0;
        for (int i = 0; i < width; ++i, ++pos) {
            auto [w, b] = payload_slot(pos);
            v |= static_cast<uint64_t>((words[w] >> b) & 1u) << i;
        }
        return v;
    }

    // All payload bits past the declared fields must be zero.
    void expect_rest_zero() const {
        for (int p = pos; p < kPayloadBits; ++p) {
            auto [w, b] = payload_slot(p);
            if ((words[w] >> b) & 1u)
                throw DecodeError("nonzero bits beyond instruction fields");
        }
    }
};

uint32_t width_to_code(uint32_t bits) {
    switch (bits) {
        case 4: return 0;
        case 8: return 1;
        case 16: return 2;
    }
    throw DecodeError("element width must be 4, 8, or 16");
}

uint32_t code_to_width(uint64_t code) {
    switch (code) {
        case 0: return 4;
        case 1: return 8;
        case 2: return 16;
    }
    throw DecodeError("reserved bitwidth code 3");
}

void check(bool ok, const char* what) {
    if (!ok) throw DecodeError(what);
}

}  // namespace

void validate(const Instruction& ins) {
    std::visit(
        [](const auto& i) {
            using T = std::decay_t<decltype(i)>;
            if constexpr (std::is_same_v<T, RdBuf> || std::is_same_v<T, WrBuf>) {
                check(i.bank_start < 64, "bank-start out of range");
                check(i.bank_offset < 4096, "bank-offset out of range");
                check(i.length < 8192, "length out of range");
            } else if constexpr (std::is_same_v<T, CtrlBitwidth>) {
                width_to_code(i.a_bits);
                width_to_code(i.w_bits);
            } else if constexpr (std::is_same_v<T, CtrlShuffling>) {
                check(i.unit_num < 16, "unit out of range");
                check(i.sel_code < 16, "sel out of range");
                check(i.split_code < 16, "split out of range");
            } else if constexpr (std::is_same_v<T, CtrlPadding>) {
                check(i.position < 16, "pos out of range");
                check(i.value < 0x10000, "value out of range");
            } else if constexpr (std::is_same_v<T, LoadTile> || std::is_same_v<T, StoreTile>) {
                check(i.dram_addr < (1ull << 32), "dram address out of range");
                check(i.dram_addr % 8 == 0, "dram address must be 8-byte aligned");
                check(i.bank_start < 64, "bank-start out of range");
                check(i.bank_offset < 4096, "bank-offset out of range");
                check(i.length_bytes < (1ull << 20), "bytes out of range");
                check(i.length_bytes % 8 == 0, "bytes must be a multiple of 8");
            } else if constexpr (std::is_same_v<T, ConvExec>) {
                check(i.fmap_base < (1u << 15), "fmap base out of range");
                check(i.weight_base < (1u << 15), "weight base out of range");
                check(i.out_base < (1u << 15), "out base out of range");
                check(i.out_rows >= 1 && i.out_rows < (1u << 11), "rows out of range");
                check(i.out_cols >= 1 && i.out_cols < (1u << 4), "cols out of range");
                check(i.k_len >= 1 && i.k_len < (1u << 12), "k out of range");
                check(i.row_stride < (1u << 12), "stride out of range");
                check(i.requant_shift < 32, "shift out of range");
            } else if constexpr (std::is_same_v<T, ShuffleExec>) {
                check(i.src_base < 64, "src out of range");
                check(i.dst_base < 64, "dst out of range");
                check(i.word_count >= 1 && i.word_count < 0x10000, "count out of range");
            }
        },
        ins);
}

std::array<uint32_t, kWordsPerInstruction> encode(const Instruction& ins) {
    validate(ins);
    BitWriter w;
    uint32_t op = std::visit(
        [&w](const auto& i) -> uint32_t {
            using T = std::decay_t<decltype(i)>;
            if constexpr (std::is_same_v<T, Halt>) {
                return kHalt;
            } else if constexpr (std::is_same_v<T, RdBuf> || std::is_same_v<T, WrBuf>) {
                w.put(i.bank_start, 6);
                w.put(i.bank_offset, 12);
                w.put(i.length, 13);
                return std::is_same_v<T, RdBuf> ? kRdBuf : kWrBuf;
            } else if constexpr (std::is_same_v<T, CtrlBitwidth>) {
                w.put(width_to_code(i.a_bits), 2);
                w.put(width_to_code(i.w_bits), 2);
                return kCtrlBitwidth;
            } else if constexpr (std::is_same_v<T, CtrlShuffling>) {
                w.put(i.unit_num, 4);
                w.put(i.sel_code, 4);
                w.put(i.split_code, 4);
                w.put(i.finish_flag ? 1 : 0, 1);
                return kCtrlShuffling;
            } else if constexpr (std::is_same_v<T, CtrlPadding>) {
                w.put(i.position, 4);
                w.put(i.value, 16);
                return kCtrlPadding;
            } else if constexpr (std::is_same_v<T, LoadTile> || std::is_same_v<T, StoreTile>) {
                w.put(i.dram_addr, 32);
                w.put(i.bank_start, 6);
                w.put(i.bank_offset, 12);
                w.put(i.length_bytes, 20);
                return std::is_same_v<T, LoadTile> ? kLoadTile : kStoreTile;
            } else if constexpr (std::is_same_v<T, ConvExec>) {
                w.put(i.fmap_base, 15);
                w.put(i.weight_base, 15);
                w.put(i.out_base, 15);
                w.put(i.out_rows, 11);
                w.put(i.out_cols, 4);
                w.put(i.k_len, 12);
                w.put(i.row_stride, 12);
                w.put(i.requant_shift, 5);
                w.put(i.wide_out ? 1 : 0, 1);
                w.put(i.out_transpose ? 1 : 0, 1);
                return kConvExec;
            } else if constexpr (std::is_same_v<T, ShuffleExec>) {
                w.put(i.src_base, 6);
                w.put(i.dst_base, 6);
                w.put(i.word_count, 16);
                return kShuffleExec;
            }
        },
        ins);
    w.words[0] |= op << 27;
    return w.words;
}

Instruction decode(std::span<const uint32_t, kWordsPerInstruction> words) {
    uint32_t op = words[0] >> 27;
    BitReader r{words};
    Instruction ins;
    switch (op) {
        case kHalt:
            ins = Halt{};
            break;
        case kRdBuf:
        case kWrBuf: {
            uint32_t bs = static_cast<uint32_t>(r.get(6));
            uint32_t bo = static_cast<uint32_t>(r.get(12));
            uint32_t len = static_cast<uint32_t>(r.get(13));
            if (op == kRdBuf)
                ins = RdBuf{bs, bo, len};
            else
                ins = WrBuf{bs, bo, len};
            break;
        }
        case kCtrlBitwidth: {
            uint32_t a = code_to_width(r.get(2));
            uint32_t wd = code_to_width(r.get(2));
            ins = CtrlBitwidth{a, wd};
            break;
        }
        case kCtrlShuffling: {
            CtrlShuffling c;
            c.unit_num = static_cast<uint32_t>(r.get(4));
            c.sel_code = static_cast<uint32_t>(r.get(4));
            c.split_code = static_cast<uint32_t>(r.get(4));
            c.finish_flag = r.get(1) != 0;
            ins = c;
            break;
        }
        case kCtrlPadding: {
            CtrlPadding c;
            c.position = static_cast<uint32_t>(r.get(4));
            c.value = static_cast<uint32_t>(r.get(16));
            ins = c;
            break;
        }
        case kLoadTile:
        case kStoreTile: {
            uint64_t addr = r.get(32);
            uint32_t bs = static_cast<uint32_t>(r.get(6));
            uint32_t bo = static_cast<uint32_t>(r.get(12));
            uint64_t len = r.get(20);
            if (op == kLoadTile)
                ins = LoadTile{addr, bs, bo, len};
            else
                ins = StoreTile{addr, bs, bo, len};
            break;
        }
        case kConvExec: {
            ConvExec c;
            c.fmap_base = static_cast<uint32_t>(r.get(15));
            c.weight_base = static_cast<uint32_t>(r.get(15));
            c.out_base = static_cast<uint32_t>(r.get(15));
            c.out_rows = static_cast<uint32_t>(r.get(11));
            c.out_cols = static_cast<uint32_t>(r.get(4));
            c.k_len = static_cast<uint32_t>(r.get(12));
            c.row_stride = static_cast<uint32_t>(r.get(12));
            c.requant_shift = static_cast<uint32_t>(r.get(5));
            c.wide_out = r.get(1) != 0;
            c.out_transpose = r.get(1) != 0;
            ins = c;
            break;
        }
        case kShuffleExec: {
            ShuffleExec s;
            s.src_base = static_cast<uint32_t>(r.get(6));
            s.dst_base = static_cast<uint32_t>(r.get(6));
            s.word_count = static_cast<uint32_t>(r.get(16));
            ins = s;
            break;
        }
        default:
            throw DecodeError("unknown opcode " + std::to_string(op));
    }
    r.expect_rest_zero();
    validate(ins);
    return ins;
}

std::vector<uint32_t> encode_program(const Program& p) {
    std::vector<uint32_t> out;
    out.reserve(p.code.size() * kWordsPerInstruction);
    for (const auto& ins : p.code) {
        auto words = encode(ins);
        out.insert(out.end(), words.begin(), words.end());
    }
    return out;
}

Program decode_program(std::span<const uint32_t> words) {
    if (words.size() % kWordsPerInstruction != 0)
        throw DecodeError("word stream is not a whole number of instructions");
    Program p;
    for (std::size_t i = 0; i < words.size(); i += kWordsPerInstruction)
        p.code.push_back(decode(words.subspan(i).first<kWordsPerInstruction>()));
    return p;
}

std::vector<uint8_t> to_bytes(const Program& p) {
    auto words = encode_program(p);
    std::vector<uint8_t> bytes;
    bytes.reserve(words.size() * 4);
    for (uint32_t w : words)
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>(w >> (8 * i)));
    return bytes;
}

Program from_bytes(std::span<const uint8_t> bytes) {
    if (bytes.size() % 4 != 0) throw DecodeError("byte stream is not a whole number of words");
    std::vector<uint32_t> words(bytes.size() / 4);
    for (std::size_t i = 0; i < words.size(); ++i)
        for (int b = 0; b < 4; ++b)
            words[i] |= static_cast<uint32_t>(bytes[i * 4 + b]) << (8 * b);
    return decode_program(words);
}

namespace {

struct FieldSpec {
    const char* key;
    uint64_t max;
};

struct Operands {
    std::map<std::string, uint64_t> kv;
    int line;

    uint64_t req(const char* key) const {
        auto it = kv.find(key);
        if (it == kv.end()) throw ParseError(line, std::string("missing operand '") + key + "'");
        return it->second;
    }
};

uint64_t parse_value(const std::string& tok, int line) {
    uint64_t v = 0;
    int base = 10;
    std::string_view sv = tok;
    if (sv.starts_with("0x") || sv.starts_with("0X")) {
        sv.remove_prefix(2);
        base = 16;
    }
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v, base);
    if (ec != std::errc() || ptr != sv.data() + sv.size())
        throw ParseError(line, "bad numeric value '" + tok + "'");
    return v;
}

// Range errors at assemble time carry the operand name and line.
uint64_t bounded(const Operands& ops, const char* key, uint64_t max) {
    uint64_t v = ops.req(key);
    if (v > max)
        throw ParseError(ops.line, std::string(key) + " out of range (max " + std::to_string(max) + ")");
    return v;
}

}  // namespace

Program assemble(const std::string& source) {
    Program p;
    std::istringstream in(source);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw.substr(0, raw.find('#'));
        std::istringstream ls(line);
        std::string mnem;
        if (!(ls >> mnem)) continue;

        Operands ops{{}, line_no};
        std::string tok;
        while (ls >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ParseError(line_no, "expected key=value operand, got '" + tok + "'");
            std::string key = tok.substr(0, eq);
            if (ops.kv.count(key)) throw ParseError(line_no, "duplicate operand '" + key + "'");
            ops.kv[key] = parse_value(tok.substr(eq + 1), line_no);
        }

        Instruction ins;
        try {
            if (mnem == "halt") {
                ins = Halt{};
            } else if (mnem == "rd-buf" || mnem == "wr-buf") {
                uint32_t bs = static_cast<uint32_t>(bounded(ops, "bank-start", 63));
                uint32_t bo = static_cast<uint32_t>(bounded(ops, "bank-offset", 4095));
                uint32_t len = static_cast<uint32_t>(bounded(ops, "length", 8191));
                if (mnem == "rd-buf")
                    ins = RdBuf{bs, bo, len};
                else
                    ins = WrBuf{bs, bo, len};
            } else if (mnem == "ctrl-bitwidth") {
                ins = CtrlBitwidth{static_cast<uint32_t>(ops.req("a")),
                                   static_cast<uint32_t>(ops.req("w"))};
            } else if (mnem == "ctrl-shuffling") {
                CtrlShuffling c;
                c.unit_num = static_cast<uint32_t>(bounded(ops, "unit", 15));
                c.sel_code = static_cast<uint32_t>(bounded(ops, "sel", 15));
                c.split_code = static_cast<uint32_t>(bounded(ops, "split", 15));
                c.finish_flag = bounded(ops, "finish", 1) != 0;
                ins = c;
            } else if (mnem == "ctrl-padding") {
                ins = CtrlPadding{static_cast<uint32_t>(bounded(ops, "pos", 15)),
                                  static_cast<uint32_t>(bounded(ops, "value", 0xFFFF))};
            } else if (mnem == "load-tile" || mnem == "store-tile") {
                uint64_t addr = bounded(ops, "dram", (1ull << 32) - 1);
                uint32_t bs = static_cast<uint32_t>(bounded(ops, "bank-start", 63));
                uint32_t bo = static_cast<uint32_t>(bounded(ops, "bank-offset", 4095));
                uint64_t len = bounded(ops, "bytes", (1ull << 20) - 1);
                if (mnem == "load-tile")
                    ins = LoadTile{addr, bs, bo, len};
                else
                    ins = StoreTile{addr, bs, bo, len};
            } else if (mnem == "conv-exec") {
                ConvExec c;
                c.fmap_base = static_cast<uint32_t>(bounded(ops, "fmap", (1u << 15) - 1));
                c.weight_base = static_cast<uint32_t>(bounded(ops, "weight", (1u << 15) - 1));
                c.out_base = static_cast<uint32_t>(bounded(ops, "out", (1u << 15) - 1));
                c.out_rows = static_cast<uint32_t>(bounded(ops, "rows", (1u << 11) - 1));
                c.out_cols = static_cast<uint32_t>(bounded(ops, "cols", 15));
                c.k_len = static_cast<uint32_t>(bounded(ops, "k", 4095));
                c.row_stride = static_cast<uint32_t>(bounded(ops, "stride", 4095));
                c.requant_shift = static_cast<uint32_t>(bounded(ops, "shift", 31));
                c.wide_out = bounded(ops, "wide", 1) != 0;
                c.out_transpose = bounded(ops, "transpose", 1) != 0;
                ins = c;
            } else if (mnem == "shuffle-exec") {
                ShuffleExec s;
                s.src_base = static_cast<uint32_t>(bounded(ops, "src", 63));
                s.dst_base = static_cast<uint32_t>(bounded(ops, "dst", 63));
                s.word_count = static_cast<uint32_t>(bounded(ops, "count", 0xFFFF));
                ins = s;
            } else {
                throw ParseError(line_no, "unknown mnemonic '" + mnem + "'");
            }
            validate(ins);
        } catch (const DecodeError& e) {
            throw ParseError(line_no, e.what());
        }
        p.code.push_back(ins);
        p.source_lines.push_back(line_no);
    }
    return p;
}

const char* mnemonic(const Instruction& ins) {
    static constexpr const char* names[] = {"halt",         "rd-buf",       "wr-buf",
                                            "ctrl-bitwidth", "ctrl-shuffling", "ctrl-padding",
                                            "load-tile",    "store-tile",   "conv-exec",
                                            "shuffle-exec"};
    return names[ins.index()];
}

std::string to_string(const Instruction& ins) {
    std::ostringstream os;
    std::visit(
        [&os](const auto& i) {
            using T = std::decay_t<decltype(i)>;
            if constexpr (std::is_same_v<T, Halt>) {
                os << "halt";
            } else if constexpr (std::is_same_v<T, RdBuf> || std::is_same_v<T, WrBuf>) {
                os << (std::is_same_v<T, RdBuf> ? "rd-buf" : "wr-buf") << " bank-start="
                   << i.bank_start << " bank-offset=" << i.bank_offset << " length=" << i.length;
            } else if constexpr (std::is_same_v<T, CtrlBitwidth>) {
                os << "ctrl-bitwidth a=" << i.a_bits << " w=" << i.w_bits;
            } else if constexpr (std::is_same_v<T, CtrlShuffling>) {
                os << "ctrl-shuffling unit=" << i.unit_num << " sel=" << i.sel_code
                   << " split=" << i.split_code << " finish=" << (i.finish_flag ? 1 : 0);
            } else if constexpr (std::is_same_v<T, CtrlPadding>) {
                os << "ctrl-padding pos=" << i.position << " value=" << i.value;
            } else if constexpr (std::is_same_v<T, LoadTile> || std::is_same_v<T, StoreTile>) {
                os << (std::is_same_v<T, LoadTile> ? "load-tile" : "store-tile") << " dram="
                   << i.dram_addr << " bank-start=" << i.bank_start
                   << " bank-offset=" << i.bank_offset << " bytes=" << i.length_bytes;
            } else if constexpr (std::is_same_v<T, ConvExec>) {
                os << "conv-exec fmap=" << i.fmap_base << " weight=" << i.weight_base
                   << " out=" << i.out_base << " rows=" << i.out_rows << " cols=" << i.out_cols
                   << " k=" << i.k_len << " stride=" << i.row_stride
                   << " shift=" << i.requant_shift << " wide=" << (i.wide_out ? 1 : 0)
                   << " transpose=" << (i.out_transpose ? 1 : 0);
            } else if constexpr (std::is_same_v<T, ShuffleExec>) {
                os << "shuffle-exec src=" << i.src_base << " dst=" << i.dst_base
                   << " count=" << i.word_count;
            }
        },
        ins);
    return os.str();
}

std::string disassemble(const Program& p) {
    std::string out;
    for (const auto& ins : p.code) {
        out += to_string(ins);
        out += '\n';
    }
    return out;
}

}  // namespace sigdla::isa

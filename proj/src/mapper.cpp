#include "sigdla/mapper.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>

#include "sigdla/quantize.hpp"

namespace sigdla {

namespace {

constexpr int kMaxConvRows = (1 << 11) - 1;
constexpr int kMaxK = (1 << 12) - 1;

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

int safe_shift_impl(int64_t max_abs, int out_bits) {
    int64_t hi = (int64_t{1} << (out_bits - 1)) - 1;
    int s = 0;
    while ((max_abs >> s) + (s > 0 ? 1 : 0) > hi) {
        ++s;
        if (s >= 32) throw MapError("no requantization shift fits the accumulator range");
    }
    return s;
}

// Little-endian bit packing of signed elements; padded to whole 8-byte words.
std::vector<uint8_t> pack_elements(std::span<const int64_t> vals, int bits) {
    std::vector<uint8_t> bytes(ceil_div(vals.size() * static_cast<uint64_t>(bits), 64) * 8, 0);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (!mac::fits(vals[i], bits))
            throw MapError("constant value " + std::to_string(vals[i]) + " does not fit " +
                           std::to_string(bits) + " bits");
        uint64_t raw = static_cast<uint64_t>(vals[i]) & ((bits == 64) ? ~0ull : ((uint64_t{1} << bits) - 1));
        uint64_t bit = i * static_cast<uint64_t>(bits);
        for (int b = 0; b < bits; ++b) {
            if ((raw >> b) & 1) bytes[(bit + b) / 8] |= static_cast<uint8_t>(1u << ((bit + b) % 8));
        }
    }
    return bytes;
}

class OnChipAllocator {
  public:
    OnChipAllocator(const MachineConfig& mc) {
        uint64_t total = static_cast<uint64_t>(mc.banks) * mc.bank_kib * 1024 / 8;
        uint64_t wpb = mc.bank_kib * 1024 / 8;
        // The last two banks form the signal-processing region.
        sig_begin_ = mc.banks > 2 ? (mc.banks - 2) * wpb : total;
        sig_next_ = sig_begin_;
        sig_end_ = total;
        main_next_ = 0;
        main_end_ = sig_begin_;
    }

    uint64_t alloc(uint64_t words, bool prefer_signal) {
        if (prefer_signal) {
            if (sig_next_ + words <= sig_end_) return take(sig_next_, words);
            if (main_next_ + words <= main_end_) return take(main_next_, words);
        } else {
            if (main_next_ + words <= main_end_) return take(main_next_, words);
            if (sig_next_ + words <= sig_end_) return take(sig_next_, words);
        }
        throw MapError("workload exceeds on-chip buffer capacity");
    }

    uint64_t free_words() const { return (main_end_ - main_next_) + (sig_end_ - sig_next_); }
    uint64_t main_free() const { return main_end_ - main_next_; }

  private:
    uint64_t take(uint64_t& next, uint64_t words) {
        uint64_t at = next;
        next += words;
        return at;
    }
    uint64_t main_next_, main_end_, sig_begin_, sig_next_, sig_end_;
};

class ProgramBuilder {
  public:
    explicit ProgramBuilder(const MachineConfig& mc) : wpb_(mc.bank_kib * 1024 / 8) {}

    uint32_t pc() const { return static_cast<uint32_t>(prog_.code.size()); }

    void emit(isa::Instruction ins) {
        isa::validate(ins);
        prog_.code.push_back(std::move(ins));
    }

    void set_bitwidth(mac::BitwidthConfig cfg) {
        if (bw_ && *bw_ == cfg) return;
        emit(isa::CtrlBitwidth{static_cast<uint32_t>(cfg.a_bits), static_cast<uint32_t>(cfg.w_bits)});
        bw_ = cfg;
    }

    void rd_buf(uint64_t word, uint32_t len) {
        emit(isa::RdBuf{static_cast<uint32_t>(word / wpb_), static_cast<uint32_t>(word % wpb_), len});
    }

    void wr_buf(uint64_t word, uint32_t len) {
        emit(isa::WrBuf{static_cast<uint32_t>(word / wpb_), static_cast<uint32_t>(word % wpb_), len});
    }

    void dma(bool load, uint64_t dram, uint64_t word, uint64_t bytes) {
        // Large tiles split at the encodable transfer size.
        constexpr uint64_t kChunk = ((1ull << 20) - 8) & ~7ull;
        while (bytes > 0) {
            uint64_t n = std::min(bytes, kChunk);
            uint32_t bank = static_cast<uint32_t>(word / wpb_);
            uint32_t off = static_cast<uint32_t>(word % wpb_);
            if (load)
                emit(isa::LoadTile{dram, bank, off, n});
            else
                emit(isa::StoreTile{dram, bank, off, n});
            bytes -= n;
            dram += n;
            word += n / 8;
        }
    }

    void conv(uint64_t fmap, uint64_t weight, uint64_t out, uint32_t rows, uint32_t cols,
              uint32_t k, uint32_t stride, uint32_t shift, bool wide, bool transpose) {
        isa::ConvExec c;
        c.fmap_base = static_cast<uint32_t>(fmap);
        c.weight_base = static_cast<uint32_t>(weight);
        c.out_base = static_cast<uint32_t>(out);
        c.out_rows = rows;
        c.out_cols = cols;
        c.k_len = k;
        c.row_stride = stride;
        c.requant_shift = shift;
        c.wide_out = wide;
        c.out_transpose = transpose;
        emit(c);
    }

    void shuffle_exec(uint32_t src, uint32_t dst, uint32_t count) {
        emit(isa::ShuffleExec{src, dst, count});
    }

    void pad_slot(uint32_t pos, uint32_t value) { emit(isa::CtrlPadding{pos, value}); }

    void want_unit(int unit, uint8_t sel, uint8_t split) {
        desired_[static_cast<std::size_t>(unit)] = fabric::ShuffleUnitConfig{sel, split};
    }

    // Emits ctrl-shuffling only for units whose config changes; unconfigured
    // units get a default so the very first set is complete. The final
    // instruction of a non-empty batch carries the finish flag.
    void commit_units() {
        std::vector<std::pair<int, fabric::ShuffleUnitConfig>> changes;
        for (int u = 0; u < 16; ++u) {
            auto want = desired_[static_cast<std::size_t>(u)];
            if (!want && !current_[static_cast<std::size_t>(u)]) want = fabric::ShuffleUnitConfig{0, 0};
            if (want && (!current_[static_cast<std::size_t>(u)] || !(*current_[static_cast<std::size_t>(u)] == *want)))
                changes.emplace_back(u, *want);
            desired_[static_cast<std::size_t>(u)].reset();
        }
        if (changes.empty()) {
            if (!sealed_) {
                auto cfg = *current_[0];
                emit(isa::CtrlShuffling{0, cfg.sel_code, cfg.split_code, true});
                sealed_ = true;
            }
            return;
        }
        for (std::size_t i = 0; i < changes.size(); ++i) {
            auto [u, cfg] = changes[i];
            bool last = i + 1 == changes.size();
            emit(isa::CtrlShuffling{static_cast<uint32_t>(u), cfg.sel_code, cfg.split_code, last});
            current_[static_cast<std::size_t>(u)] = cfg;
        }
        sealed_ = true;
    }

    void halt() { emit(isa::Halt{}); }

    isa::Program take() { return std::move(prog_); }

  private:
    isa::Program prog_;
    uint64_t wpb_;
    std::array<std::optional<fabric::ShuffleUnitConfig>, 16> current_{};
    std::array<std::optional<fabric::ShuffleUnitConfig>, 16> desired_{};
    std::optional<mac::BitwidthConfig> bw_;
    bool sealed_ = false;
};

// ---------------------------------------------------------------------------
// Gather emission: realize scattered element moves as rd-buf / ctrl-shuffling
// / shuffle-exec / wr-buf rounds.

struct NibbleSrc {
    uint64_t word;
    uint8_t nib;
};

struct GatherWord {
    uint64_t dst_word = 0;
    std::array<std::optional<NibbleSrc>, 16> nibs{};
    std::vector<std::pair<uint32_t, uint32_t>> pads;  // element slot -> raw value
};

void emit_gather_batch(ProgramBuilder& b, std::span<const GatherWord> batch) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const GatherWord& gw = batch[i];
        // Unique source words, clustered into runs of consecutive words.
        std::vector<uint64_t> words;
        for (const auto& n : gw.nibs)
            if (n) words.push_back(n->word);
        std::sort(words.begin(), words.end());
        words.erase(std::unique(words.begin(), words.end()), words.end());
        if (words.size() > 16) throw MapError("gather word needs more than 16 source words");

        std::map<uint64_t, uint8_t> slot_of;
        uint8_t fill = 0;
        std::size_t w0 = 0;
        while (w0 < words.size()) {
            std::size_t w1 = w0;
            while (w1 + 1 < words.size() && words[w1 + 1] == words[w1] + 1) ++w1;
            uint32_t len = static_cast<uint32_t>(w1 - w0 + 1);
            b.rd_buf(words[w0], len);
            for (std::size_t k = w0; k <= w1; ++k) slot_of[words[k]] = fill++;
            w0 = w1 + 1;
        }
        if (fill > 16) throw MapError("gather window exceeds 16 staging slots");

        for (int u = 0; u < 16; ++u) {
            const auto& n = gw.nibs[static_cast<std::size_t>(u)];
            if (n) b.want_unit(u, slot_of.at(n->word), n->nib);
        }
        b.commit_units();
        for (auto [slot, value] : gw.pads) b.pad_slot(slot, value);
        b.shuffle_exec(0, fabric::BcifRegisterFile::kRegionB + static_cast<uint32_t>(i), 1);
    }
    b.wr_buf(batch.front().dst_word, static_cast<uint32_t>(batch.size()));
}

void emit_gathers(ProgramBuilder& b, std::span<const GatherWord> words) {
    std::size_t i = 0;
    while (i < words.size()) {
        std::size_t j = i;
        while (j + 1 < words.size() && words[j + 1].dst_word == words[j].dst_word + 1 &&
               j + 1 - i < fabric::BcifRegisterFile::kRegionB)
            ++j;
        emit_gather_batch(b, words.subspan(i, j - i + 1));
        i = j + 1;
    }
}

// Accumulates element-level moves and pads, then renders GatherWords.
class GatherSet {
  public:
    explicit GatherSet(int bits) : bits_(bits), epw_(64 / bits) {}

    // dst/src are global on-chip element indices at this width.
    void move(uint64_t dst_elem, uint64_t src_elem) {
        auto& gw = word(dst_elem / static_cast<uint64_t>(epw_));
        int npe = bits_ / 4;
        int d0 = static_cast<int>(dst_elem % static_cast<uint64_t>(epw_)) * npe;
        for (int j = 0; j < npe; ++j) {
            uint64_t src_nib = src_elem * static_cast<uint64_t>(npe) + static_cast<uint64_t>(j);
            gw.nibs[static_cast<std::size_t>(d0 + j)] =
                NibbleSrc{src_nib / 16, static_cast<uint8_t>(src_nib % 16)};
        }
    }

    void pad(uint64_t dst_elem, uint32_t value) {
        auto& gw = word(dst_elem / static_cast<uint64_t>(epw_));
        gw.pads.emplace_back(static_cast<uint32_t>(dst_elem % static_cast<uint64_t>(epw_)), value);
    }

    void emit(ProgramBuilder& b) {
        std::vector<GatherWord> out;
        out.reserve(words_.size());
        for (auto& [w, gw] : words_) out.push_back(std::move(gw));
        if (!out.empty()) emit_gathers(b, out);
        words_.clear();
    }

  private:
    GatherWord& word(uint64_t w) {
        auto& gw = words_[w];
        gw.dst_word = w;
        return gw;
    }

    int bits_;
    int epw_;
    std::map<uint64_t, GatherWord> words_;  // ordered by destination word
};

// ---------------------------------------------------------------------------

struct LoadReq {
    uint64_t dram = 0;
    uint64_t word = 0;
    uint64_t bytes = 0;
};

struct StagePlan {
    std::vector<LoadReq> loads;
    std::vector<LoadReq> stores;
    std::vector<std::function<void()>> body;  // executed in order
    std::vector<OutputSegment> out_segments;
    std::vector<ConvBlock> out_blocks;

    // On-chip output region for pipeline chaining.
    uint64_t out_word = 0;
    uint64_t out_elems = 0;
    int out_bits = 0;
    uint64_t out_bytes = 0;
};

struct ChainInput {
    uint64_t word = 0;
    uint64_t elems = 0;
    int bits = 0;
};

struct MapCtx {
    explicit MapCtx(const MachineConfig& m) : mc(m), b(m), alloc(m) {}

    const MachineConfig& mc;
    ProgramBuilder b;
    OnChipAllocator alloc;
    TensorPlan plan;
    uint64_t dram_next = 0;

    uint64_t dram_alloc(uint64_t bytes) {
        uint64_t at = dram_next;
        dram_next += (bytes + 63) & ~63ull;
        if (dram_next > (mc.offchip_mib << 20)) throw MapError("workload exceeds off-chip memory");
        return at;
    }

    void add_constant(std::string name, uint64_t addr, std::vector<uint8_t> bytes) {
        plan.constants.push_back({std::move(name), addr, std::move(bytes)});
    }
};

// ---------------------------------------------------------------------------
// FFT

uint32_t bit_reverse(uint32_t v, int bits) {
    uint32_t r = 0;
    for (int i = 0; i < bits; ++i) r |= ((v >> i) & 1u) << (bits - 1 - i);
    return r;
}

// Per (stage, twiddle-group, <=8-butterfly subtile) blocks: kernel matrices
// and GEMM outputs share the same word-aligned block geometry.
struct FftBlock {
    uint64_t word_off = 0;  // within the kern/gemm region
    uint32_t nc = 0;
    uint32_t group = 0;           // index into schedule.stages[t].groups
    uint32_t first_butterfly = 0; // index within the group
};

struct FftStageLayout {
    std::vector<FftBlock> blocks;
    uint64_t words = 0;
};

FftStageLayout fft_stage_layout(const FftStage& st, int bits) {
    FftStageLayout lay;
    uint64_t off = 0;
    for (uint32_t g = 0; g < st.groups.size(); ++g) {
        uint32_t total = static_cast<uint32_t>(st.groups[g].butterflies.size());
        for (uint32_t b0 = 0; b0 < total; b0 += 8) {
            uint32_t nc = std::min(8u, total - b0);
            FftBlock blk;
            blk.word_off = off;
            blk.nc = nc;
            blk.group = g;
            blk.first_butterfly = b0;
            off += ceil_div(static_cast<uint64_t>(nc) * 4 * static_cast<uint64_t>(bits), 64);
            lay.blocks.push_back(blk);
        }
    }
    lay.words = off;
    return lay;
}

StagePlan plan_fft(MapCtx& ctx, uint32_t n, mac::BitwidthConfig cfg,
                   const ChainInput* chained) {
    if (cfg.a_bits != cfg.w_bits) throw MapError("fft requires matching activation/weight widths");
    int bits = cfg.a_bits;
    if (n < 2 || n > 4096 || !std::has_single_bit(n))
        throw MapError("fft size must be a power of two in [2, 4096]");
    int stages = std::countr_zero(n);
    int epw = 64 / bits;
    int npe = bits / 4;

    FftSchedule sched = FftSchedule::build(n);

    uint64_t tw_words = n / 2;
    uint64_t io_words = ceil_div(2ull * n * static_cast<uint64_t>(bits), 64);
    uint64_t region_words = 0;
    std::vector<FftStageLayout> layouts;
    for (const auto& st : sched.stages) {
        layouts.push_back(fft_stage_layout(st, bits));
        region_words = std::max(region_words, layouts.back().words);
    }
    uint64_t coeff_words = ceil_div(16ull * static_cast<uint64_t>(bits), 64);

    StagePlan sp;
    uint64_t tw_word, io_word;
    if (chained) {
        tw_word = ctx.alloc.alloc(tw_words, true);
        io_word = ctx.alloc.alloc(io_words, true);
    } else {
        tw_word = ctx.alloc.alloc(tw_words + io_words, true);
        io_word = tw_word + tw_words;
    }
    uint64_t kern_word = ctx.alloc.alloc(region_words, true);
    uint64_t gemm_word = ctx.alloc.alloc(region_words, true);
    uint64_t coeff_word = ctx.alloc.alloc(coeff_words, true);

    // Twiddle table: one word per entry m -> [wr, wi, -wr, -wi] at Q(bits-2).
    std::vector<int64_t> tw_vals;
    tw_vals.reserve(tw_words * static_cast<uint64_t>(epw));
    for (uint32_t m = 0; m < n / 2; ++m) {
        double ang = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
        int64_t wr = quantize_one(std::cos(ang), bits, bits - 2);
        int64_t wi = quantize_one(-std::sin(ang), bits, bits - 2);
        tw_vals.push_back(wr);
        tw_vals.push_back(wi);
        tw_vals.push_back(-wr);
        tw_vals.push_back(-wi);
        for (int f = 4; f < epw; ++f) tw_vals.push_back(0);
    }
    auto tw_bytes = pack_elements(tw_vals, bits);

    uint64_t input_region_bytes = io_words * 8;
    if (chained) {
        if (chained->elems != 2ull * n || chained->bits != bits)
            throw MapError("fft stage input shape mismatch");
        uint64_t tw_dram = ctx.dram_alloc(tw_bytes.size());
        ctx.add_constant("twiddle_table", tw_dram, tw_bytes);
        sp.loads.push_back({tw_dram, tw_word, tw_bytes.size()});
    } else {
        uint64_t dram = ctx.dram_alloc(tw_bytes.size() + input_region_bytes);
        ctx.add_constant("twiddle_table", dram, tw_bytes);
        ctx.plan.input.dram_addr = dram + tw_bytes.size();
        ctx.plan.input.region_bytes = input_region_bytes;
        ctx.plan.input.elem_offset = 0;
        ctx.plan.input.elem_bits = static_cast<uint32_t>(bits);
        ctx.plan.input.count = 2ull * n;
        ctx.plan.input.frac_bits = bits - 2;
        ctx.plan.input.complex_pairs = true;
        sp.loads.push_back({dram, tw_word, tw_bytes.size() + input_region_bytes});
    }

    uint64_t input_word = chained ? chained->word : io_word;

    // Component positions of working-array samples, as global element indices.
    // Initialized with the bit-reversal permutation folded in.
    auto pos_re = std::make_shared<std::vector<uint64_t>>(n);
    auto pos_im = std::make_shared<std::vector<uint64_t>>(n);
    for (uint32_t i = 0; i < n; ++i) {
        uint64_t src = input_word * static_cast<uint64_t>(epw) +
                       2ull * bit_reverse(i, stages);
        (*pos_re)[i] = src;
        (*pos_im)[i] = src + 1;
    }

    uint32_t one = uint32_t{1} << (bits - 2);
    uint32_t shift = static_cast<uint32_t>(bits - 1);

    // Coefficient matrix element sources within a twiddle-table word
    // ([wr, wi, -wr, -wi]) and the padded +-1/0 slots.
    static constexpr int kCoeffSrc[16] = {-1, -1, 0, 3, -1, -1, 1, 0,
                                          -1, -1, 2, 1, -1, -1, 3, 2};
    static constexpr int kCoeffOne[16] = {1, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0};

    for (int t = 0; t < stages; ++t) {
        const FftStage& st = sched.stages[static_cast<std::size_t>(t)];
        const FftStageLayout& lay = layouts[static_cast<std::size_t>(t)];

        sp.body.push_back([&ctx, &sched, st, lay, pos_re, pos_im, bits, epw, npe, kern_word,
                           gemm_word, coeff_word, tw_word, one, shift, n]() {
            // Phase 1: gather this stage's kernel matrices from the previous
            // stage's outputs (or the loaded input).
            GatherSet gather(bits);
            for (const FftBlock& blk : lay.blocks) {
                const FftGroup& grp = st.groups[blk.group];
                uint64_t base = (kern_word + blk.word_off) * static_cast<uint64_t>(epw);
                for (uint32_t c = 0; c < blk.nc; ++c) {
                    const FftButterfly& bf = grp.butterflies[blk.first_butterfly + c];
                    gather.move(base + c * 4 + 0, (*pos_re)[bf.p]);
                    gather.move(base + c * 4 + 1, (*pos_im)[bf.p]);
                    gather.move(base + c * 4 + 2, (*pos_re)[bf.q]);
                    gather.move(base + c * 4 + 3, (*pos_im)[bf.q]);
                }
            }
            gather.emit(ctx.b);

            // Phase 2: per twiddle group, build the coefficient matrix and run
            // the GEMM blocks that share it.
            for (uint32_t g = 0; g < st.groups.size(); ++g) {
                const FftGroup& grp = st.groups[g];
                GatherSet coeff(bits);
                uint64_t cbase = coeff_word * static_cast<uint64_t>(epw);
                uint64_t twbase = (tw_word + grp.twiddle_index) * static_cast<uint64_t>(epw);
                for (int e = 0; e < 16; ++e) {
                    if (kCoeffSrc[e] >= 0)
                        coeff.move(cbase + static_cast<uint64_t>(e),
                                   twbase + static_cast<uint64_t>(kCoeffSrc[e]));
                    else
                        coeff.pad(cbase + static_cast<uint64_t>(e), kCoeffOne[e] ? one : 0);
                }
                coeff.emit(ctx.b);

                for (const FftBlock& blk : lay.blocks) {
                    if (blk.group != g) continue;
                    ctx.b.conv(coeff_word, kern_word + blk.word_off, gemm_word + blk.word_off, 4,
                               blk.nc, 4, 4, shift, false, false);
                }
            }

            // Update component positions to the GEMM output layout.
            for (const FftBlock& blk : lay.blocks) {
                const FftGroup& grp = st.groups[blk.group];
                uint64_t base = (gemm_word + blk.word_off) * static_cast<uint64_t>(epw);
                for (uint32_t c = 0; c < blk.nc; ++c) {
                    const FftButterfly& bf = grp.butterflies[blk.first_butterfly + c];
                    (*pos_re)[bf.p] = base + 0 * blk.nc + c;
                    (*pos_im)[bf.p] = base + 1 * blk.nc + c;
                    (*pos_re)[bf.q] = base + 2 * blk.nc + c;
                    (*pos_im)[bf.q] = base + 3 * blk.nc + c;
                }
            }
            (void)npe;
            (void)n;
        });
    }

    // Final pass: scatter into natural sample order.
    sp.body.push_back([&ctx, pos_re, pos_im, bits, epw, io_word, n]() {
        GatherSet gather(bits);
        uint64_t base = io_word * static_cast<uint64_t>(epw);
        for (uint32_t i = 0; i < n; ++i) {
            gather.move(base + 2ull * i, (*pos_re)[i]);
            gather.move(base + 2ull * i + 1, (*pos_im)[i]);
        }
        gather.emit(ctx.b);
    });

    uint64_t out_dram = ctx.dram_alloc(io_words * 8);
    sp.stores.push_back({out_dram, io_word, io_words * 8});
    sp.out_segments.push_back({false, out_dram, static_cast<uint32_t>(bits), 2ull * n});
    sp.out_word = io_word;
    sp.out_elems = 2ull * n;
    sp.out_bits = bits;
    sp.out_bytes = io_words * 8;
    ctx.plan.output_scale = std::ldexp(1.0, -(bits - 2));
    return sp;
}

// ---------------------------------------------------------------------------
// FIR

StagePlan plan_fir(MapCtx& ctx, std::span<const int64_t> taps, uint32_t length,
                   mac::BitwidthConfig cfg, bool wide, int ivb) {
    if (taps.empty() || length < taps.size()) throw MapError("fir needs taps >= 1, length >= taps");
    uint32_t k = static_cast<uint32_t>(taps.size());
    if (k > kMaxK) throw MapError("fir tap count exceeds the reduction range");
    int a = cfg.a_bits, w = cfg.w_bits;
    int epw = 64 / a;

    std::vector<int64_t> h_rev(taps.rbegin(), taps.rend());
    auto wbytes = pack_elements(h_rev, w);
    uint64_t w_words = wbytes.size() / 8;

    uint64_t fmap_elems = static_cast<uint64_t>(k - 1) + length;
    uint64_t fmap_words = ceil_div(fmap_elems * static_cast<uint64_t>(a), 64);
    int out_bits = wide ? 32 : a;
    uint64_t out_words = ceil_div(static_cast<uint64_t>(length) * static_cast<uint64_t>(out_bits), 64);

    uint64_t weight_word = ctx.alloc.alloc(w_words + fmap_words, true);
    uint64_t fmap_word = weight_word + w_words;
    uint64_t out_word = ctx.alloc.alloc(out_words, true);

    uint64_t dram = ctx.dram_alloc(wbytes.size() + fmap_words * 8);
    ctx.add_constant("fir_taps", dram, wbytes);
    ctx.plan.input.dram_addr = dram + wbytes.size();
    ctx.plan.input.region_bytes = fmap_words * 8;
    ctx.plan.input.elem_offset = k - 1;
    ctx.plan.input.elem_bits = static_cast<uint32_t>(a);
    ctx.plan.input.count = length;
    ctx.plan.input.frac_bits = 0;

    StagePlan sp;
    sp.loads.push_back({dram, weight_word, wbytes.size() + fmap_words * 8});

    int64_t abs_sum = 0;
    for (int64_t t : taps) abs_sum += std::abs(t);
    uint32_t shift = wide ? 0u : static_cast<uint32_t>(
                                     safe_shift_impl(abs_sum * (int64_t{1} << (ivb - 1)), a));
    ctx.plan.stage_requant_shifts.push_back(static_cast<int>(shift));

    // Row tiling keeps out_rows encodable; tile starts stay word-aligned.
    uint32_t tile_rows = static_cast<uint32_t>((kMaxConvRows / epw) * epw);
    sp.body.push_back([&ctx, fmap_word, weight_word, out_word, length, k, shift, wide, tile_rows,
                       a, out_bits, epw]() {
        for (uint32_t r0 = 0; r0 < length; r0 += tile_rows) {
            uint32_t rows = std::min(tile_rows, length - r0);
            uint64_t fbase = fmap_word + static_cast<uint64_t>(r0) * static_cast<uint64_t>(a) / 64;
            uint64_t obase = out_word + static_cast<uint64_t>(r0) * static_cast<uint64_t>(out_bits) / 64;
            ctx.b.conv(fbase, weight_word, obase, rows, 1, k, 1, shift, wide, false);
        }
        (void)epw;
    });

    uint64_t out_dram = ctx.dram_alloc(out_words * 8);
    sp.stores.push_back({out_dram, out_word, out_words * 8});
    sp.out_segments.push_back({false, out_dram, static_cast<uint32_t>(out_bits), length});
    sp.out_word = out_word;
    sp.out_elems = length;
    sp.out_bits = out_bits;
    sp.out_bytes = out_words * 8;
    return sp;
}

// ---------------------------------------------------------------------------
// 2-D DCT: two GEMM passes against the constant DCT-II matrix, the first
// written transposed so the second needs no data reshuffle.

StagePlan plan_dct(MapCtx& ctx, mac::BitwidthConfig cfg, uint32_t blocks, int ivb) {
    int a = cfg.a_bits, w = cfg.w_bits;
    if (blocks < 1) throw MapError("dct needs at least one block");

    // Every DCT-II entry has magnitude below 0.5, so a pure-fractional Q(w)
    // format maximizes coefficient precision at the given weight width.
    std::vector<int64_t> c_vals(64);
    int64_t max_row_abs = 0;
    for (int u = 0; u < 8; ++u) {
        double s = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
        int64_t row_abs = 0;
        for (int kx = 0; kx < 8; ++kx) {
            double val = s * std::cos((2.0 * kx + 1.0) * u * std::numbers::pi / 16.0);
            c_vals[static_cast<std::size_t>(u) * 8 + kx] = quantize_one(val, w, w);
            row_abs += std::abs(c_vals[static_cast<std::size_t>(u) * 8 + kx]);
        }
        max_row_abs = std::max(max_row_abs, row_abs);
    }
    auto cbytes = pack_elements(c_vals, w);
    uint64_t c_words = cbytes.size() / 8;

    uint64_t x_words = ceil_div(static_cast<uint64_t>(blocks) * 64 * static_cast<uint64_t>(a), 64);
    uint64_t wt_words = ceil_div(64ull * static_cast<uint64_t>(a), 64);
    uint64_t z_words = x_words;

    uint64_t c_word = ctx.alloc.alloc(c_words + x_words, true);
    uint64_t x_word = c_word + c_words;
    uint64_t wt_word = ctx.alloc.alloc(wt_words, true);
    uint64_t z_word = ctx.alloc.alloc(z_words, true);

    uint64_t dram = ctx.dram_alloc(cbytes.size() + x_words * 8);
    ctx.add_constant("dct_matrix", dram, cbytes);
    ctx.plan.input.dram_addr = dram + cbytes.size();
    ctx.plan.input.region_bytes = x_words * 8;
    ctx.plan.input.elem_offset = 0;
    ctx.plan.input.elem_bits = static_cast<uint32_t>(a);
    ctx.plan.input.count = static_cast<uint64_t>(blocks) * 64;
    ctx.plan.input.frac_bits = 0;

    int64_t in_max = int64_t{1} << (ivb - 1);
    int s1 = safe_shift_impl(max_row_abs * in_max, a);
    int64_t w_max = (max_row_abs * in_max >> s1) + 1;
    int s2 = safe_shift_impl(max_row_abs * w_max, a);
    ctx.plan.stage_requant_shifts.push_back(s1);
    ctx.plan.stage_requant_shifts.push_back(s2);

    StagePlan sp;
    sp.loads.push_back({dram, c_word, cbytes.size() + x_words * 8});
    uint32_t block_words = static_cast<uint32_t>(64 * a / 64);
    sp.body.push_back([&ctx, blocks, c_word, x_word, wt_word, z_word, block_words, s1, s2]() {
        for (uint32_t bk = 0; bk < blocks; ++bk) {
            uint64_t xb = x_word + static_cast<uint64_t>(bk) * block_words;
            uint64_t zb = z_word + static_cast<uint64_t>(bk) * block_words;
            // W^T = (X * C^T)^T, then Z = (C W)^T^T via a second transposed pass.
            ctx.b.conv(xb, c_word, wt_word, 8, 8, 8, 8, static_cast<uint32_t>(s1), false, true);
            ctx.b.conv(wt_word, c_word, zb, 8, 8, 8, 8, static_cast<uint32_t>(s2), false, true);
        }
    });

    uint64_t out_dram = ctx.dram_alloc(z_words * 8);
    sp.stores.push_back({out_dram, z_word, z_words * 8});
    sp.out_segments.push_back(
        {false, out_dram, static_cast<uint32_t>(a), static_cast<uint64_t>(blocks) * 64});
    sp.out_word = z_word;
    sp.out_elems = static_cast<uint64_t>(blocks) * 64;
    sp.out_bits = a;
    sp.out_bytes = z_words * 8;
    ctx.plan.output_scale = std::ldexp(1.0, s1 + s2 - 2 * w);
    return sp;
}

// ---------------------------------------------------------------------------
// DWT analysis filter bank: stride-2 convolutions, approximation band chained
// through the levels. Transposed writes keep each band contiguous.

StagePlan plan_dwt(MapCtx& ctx, std::span<const int64_t> lo, std::span<const int64_t> hi,
                   uint32_t n, uint32_t levels, mac::BitwidthConfig cfg, int ivb) {
    if (lo.size() < 2 || hi.size() < 2) throw MapError("dwt analysis filters need at least 2 taps");
    if (levels < 1 || n % (1u << levels) != 0)
        throw MapError("dwt input length must be divisible by 2^levels");
    int a = cfg.a_bits, w = cfg.w_bits;
    int epw = 64 / a;
    uint32_t k = static_cast<uint32_t>(std::max(lo.size(), hi.size()));

    int64_t abs_lo = 0, abs_hi = 0;
    for (int64_t t : lo) abs_lo += std::abs(t);
    for (int64_t t : hi) abs_hi += std::abs(t);
    int shift = safe_shift_impl(std::max(abs_lo, abs_hi) * (int64_t{1} << (std::max(ivb, a) - 1)), a);
    ctx.plan.dwt_level_shift = shift;
    ctx.plan.stage_requant_shifts.push_back(shift);

    // Reversed taps, shorter filter zero-padded at the front so both kernels
    // share one window length.
    auto revpad = [&](std::span<const int64_t> taps, uint32_t klen) {
        std::vector<int64_t> r(klen, 0);
        for (std::size_t i = 0; i < taps.size(); ++i)
            r[klen - taps.size() + i] = taps[taps.size() - 1 - i];
        return r;
    };

    StagePlan sp;

    // Per level: a [zeros | band] region; zero history comes from the never
    // written prefix words, with kernels front-padded to absorb the slack
    // between the word-aligned prefix and taps-1 elements.
    struct Level {
        uint64_t fmap_word;   // start of the zero prefix
        uint64_t band_word;   // lo/hi blocks
        uint32_t rows;
        uint32_t k_eff;
        uint64_t weight_word;
    };
    std::vector<Level> lv(levels);

    // Odd-phase decimation y[m] = sum_k h[k] x[2m+1-k] needs taps-2 zero
    // history elements ahead of the data.
    uint64_t in_prefix_elems = k - 2;
    uint64_t in_elems = in_prefix_elems + n;
    uint64_t in_words = ceil_div(in_elems * static_cast<uint64_t>(a), 64);

    // Zero-prefix words that let level l+1 window into level l's lo band;
    // the slack beyond taps-2 is absorbed by front-padding the kernels.
    uint32_t zw = static_cast<uint32_t>(ceil_div(k - 2, static_cast<uint64_t>(epw)));
    uint32_t slack = static_cast<uint32_t>(zw * static_cast<uint64_t>(epw) - (k - 2));

    std::vector<int64_t> weights_all;
    std::vector<uint64_t> weight_offsets;
    uint32_t cur_n = n;
    for (uint32_t l = 0; l < levels; ++l) {
        uint32_t k_eff = l == 0 ? k : k + slack;
        if (k_eff > kMaxK) throw MapError("dwt taps exceed the reduction range");
        uint32_t rows = cur_n / 2;
        if (rows > kMaxConvRows) throw MapError("dwt level output exceeds the row range");
        if ((static_cast<uint64_t>(rows) * a) % 64 != 0)
            throw MapError("dwt band length must fill whole 64-bit words");

        uint64_t band_words = ceil_div(2ull * rows * static_cast<uint64_t>(a), 64);
        uint64_t region = ctx.alloc.alloc(zw + band_words, true);
        lv[l].band_word = region + zw;
        lv[l].rows = rows;
        lv[l].k_eff = k_eff;
        if (l + 1 < levels) lv[l + 1].fmap_word = region;  // zeros then the lo band

        weight_offsets.push_back(weights_all.size());
        uint32_t pad_front = l == 0 ? 0 : slack;
        auto lo_k = revpad(lo, k);
        auto hi_k = revpad(hi, k);
        std::vector<int64_t> lo_eff(pad_front, 0), hi_eff(pad_front, 0);
        lo_eff.insert(lo_eff.end(), lo_k.begin(), lo_k.end());
        hi_eff.insert(hi_eff.end(), hi_k.begin(), hi_k.end());
        // Pad the 2-kernel block to a word boundary.
        uint64_t block_elems = 2ull * k_eff;
        uint64_t aligned = ceil_div(block_elems * static_cast<uint64_t>(w), 64) * 64 /
                           static_cast<uint64_t>(w);
        weights_all.insert(weights_all.end(), lo_eff.begin(), lo_eff.end());
        weights_all.insert(weights_all.end(), hi_eff.begin(), hi_eff.end());
        weights_all.resize(weight_offsets.back() + aligned, 0);
        cur_n = rows;
    }

    auto wbytes = pack_elements(weights_all, w);
    uint64_t w_words = wbytes.size() / 8;
    uint64_t weight_word = ctx.alloc.alloc(w_words + in_words, true);
    uint64_t in_word = weight_word + w_words;
    lv[0].fmap_word = in_word;
    for (uint32_t l = 0; l < levels; ++l)
        lv[l].weight_word = weight_word + weight_offsets[l] * static_cast<uint64_t>(w) / 64;

    uint64_t dram = ctx.dram_alloc(wbytes.size() + in_words * 8);
    ctx.add_constant("dwt_taps", dram, wbytes);
    ctx.plan.input.dram_addr = dram + wbytes.size();
    ctx.plan.input.region_bytes = in_words * 8;
    ctx.plan.input.elem_offset = in_prefix_elems;
    ctx.plan.input.elem_bits = static_cast<uint32_t>(a);
    ctx.plan.input.count = n;
    ctx.plan.input.frac_bits = 0;
    sp.loads.push_back({dram, weight_word, wbytes.size() + in_words * 8});

    sp.body.push_back([&ctx, lv, shift]() {
        for (std::size_t l = 0; l < lv.size(); ++l) {
            const Level& L = lv[l];
            ctx.b.conv(L.fmap_word, L.weight_word, L.band_word, L.rows, 2, L.k_eff, 2,
                       static_cast<uint32_t>(shift), false, true);
        }
    });

    // Outputs: hi bands per level then the final lo band.
    uint64_t total_out_elems = 0;
    for (uint32_t l = 0; l < levels; ++l) total_out_elems += lv[l].rows;
    total_out_elems += lv[levels - 1].rows;

    for (uint32_t l = 0; l < levels; ++l) {
        uint64_t hi_elem = static_cast<uint64_t>(lv[l].rows);
        uint64_t hi_word = lv[l].band_word + hi_elem * static_cast<uint64_t>(a) / 64;
        uint64_t bytes = static_cast<uint64_t>(lv[l].rows) * static_cast<uint64_t>(a) / 8;
        uint64_t out_dram = ctx.dram_alloc(bytes);
        sp.stores.push_back({out_dram, hi_word, bytes});
        sp.out_segments.push_back({false, out_dram, static_cast<uint32_t>(a), lv[l].rows});
    }
    uint64_t lo_bytes = static_cast<uint64_t>(lv[levels - 1].rows) * static_cast<uint64_t>(a) / 8;
    uint64_t lo_dram = ctx.dram_alloc(lo_bytes);
    sp.stores.push_back({lo_dram, lv[levels - 1].band_word, lo_bytes});
    sp.out_segments.push_back(
        {false, lo_dram, static_cast<uint32_t>(a), lv[levels - 1].rows});

    sp.out_word = lv[levels - 1].band_word;
    sp.out_elems = total_out_elems;
    sp.out_bits = a;
    sp.out_bytes = lo_bytes;
    return sp;
}


// ---------------------------------------------------------------------------
// Convolution layers: the host lays the input out as an im2col matrix, the
// array runs it as a tiled GEMM over groups of up to 8 kernels.

StagePlan plan_conv(MapCtx& ctx, const ConvLayerDesc& d, mac::BitwidthConfig cfg, bool wide,
                    int ivb, const ChainInput* chained) {
    int a = cfg.a_bits, w = cfg.w_bits;
    if (d.k == 0 || d.in_c == 0 || d.out_c == 0 || d.stride == 0)
        throw MapError("conv layer dims must be positive");
    if (!d.same_pad && (d.k > d.in_h || d.k > d.in_w))
        throw MapError("kernel larger than input");
    uint64_t k_len = static_cast<uint64_t>(d.k) * d.k * d.in_c;
    if (k_len > kMaxK) throw MapError("conv reduction k*k*c exceeds the supported range");
    uint32_t oh = d.out_h(), ow = d.out_w();
    uint64_t rows_total = static_cast<uint64_t>(oh) * ow;

    std::vector<int64_t> weights = seeded_weights(d, w);
    if (weights.size() != static_cast<std::size_t>(d.out_c) * d.k * d.k * d.in_c)
        throw MapError("conv weight count does not match layer dims");

    // Weight groups of up to 8 kernels, each group block word-aligned.
    uint32_t groups = (d.out_c + 7) / 8;
    std::vector<int64_t> wpacked;
    std::vector<uint64_t> group_off_words;
    std::vector<int64_t> group_abs_max;
    for (uint32_t g = 0; g < groups; ++g) {
        uint32_t nc = std::min<uint32_t>(8, d.out_c - g * 8);
        group_off_words.push_back(ceil_div(wpacked.size() * static_cast<uint64_t>(w), 64));
        int64_t gmax = 0;
        for (uint32_t c = 0; c < nc; ++c) {
            int64_t abs_sum = 0;
            for (uint64_t i = 0; i < k_len; ++i) {
                int64_t v = weights[(static_cast<uint64_t>(g) * 8 + c) * k_len + i];
                wpacked.push_back(v);
                abs_sum += std::abs(v);
            }
            gmax = std::max(gmax, abs_sum);
        }
        group_abs_max.push_back(gmax);
        uint64_t aligned_elems = ceil_div(wpacked.size() * static_cast<uint64_t>(w), 64) * 64 /
                                 static_cast<uint64_t>(w);
        wpacked.resize(aligned_elems, 0);
    }
    auto wbytes = pack_elements(wpacked, w);
    uint64_t w_words = wbytes.size() / 8;

    bool identity = d.k == 1 && d.stride == 1;
    uint64_t fmap_elems = rows_total * k_len;
    uint64_t fmap_words = ceil_div(fmap_elems * static_cast<uint64_t>(a), 64);
    int out_bits = wide ? 32 : a;

    int64_t abs_acc = 0;
    for (int64_t gmax : group_abs_max) abs_acc = std::max(abs_acc, gmax);
    uint32_t shift =
        wide ? 0u : static_cast<uint32_t>(safe_shift_impl(abs_acc * (int64_t{1} << (ivb - 1)), a));
    ctx.plan.stage_requant_shifts.push_back(static_cast<int>(shift));

    StagePlan sp;

    if (chained) {
        if (!identity)
            throw MapError("pipeline conv stages must be pointwise (1x1, stride 1)");
        if (chained->elems != fmap_elems || chained->bits != a)
            throw MapError("conv stage input shape mismatch");
        if (d.out_c > 8)
            throw MapError("pipeline conv stages support at most 8 kernels");
        if (rows_total > kMaxConvRows)
            throw MapError("pipeline conv stage output exceeds the row range");
    } else {
        if (!identity) {
            ctx.plan.expand_map.assign(fmap_elems, -1);
            int pad = d.same_pad ? (static_cast<int>(d.k) - 1) / 2 : 0;
            uint64_t e = 0;
            for (uint32_t oy = 0; oy < oh; ++oy)
                for (uint32_t ox = 0; ox < ow; ++ox)
                    for (uint32_t ky = 0; ky < d.k; ++ky)
                        for (uint32_t kx = 0; kx < d.k; ++kx)
                            for (uint32_t c = 0; c < d.in_c; ++c, ++e) {
                                int iy = static_cast<int>(oy * d.stride + ky) - pad;
                                int ix = static_cast<int>(ox * d.stride + kx) - pad;
                                if (iy < 0 || iy >= static_cast<int>(d.in_h) || ix < 0 ||
                                    ix >= static_cast<int>(d.in_w))
                                    continue;
                                ctx.plan.expand_map[e] = static_cast<int32_t>(
                                    (static_cast<uint32_t>(iy) * d.in_w + ix) * d.in_c + c);
                            }
        }
    }

    // Row-tile alignment: tile starts must land on word boundaries for both
    // the im2col matrix and the output blocks.
    uint64_t la = 64 / std::gcd(k_len * static_cast<uint64_t>(a), uint64_t{64});
    auto out_block_words = [&](uint32_t rows, uint32_t nc) {
        return ceil_div(static_cast<uint64_t>(rows) * nc * static_cast<uint64_t>(out_bits), 64);
    };
    auto out_words_for = [&](uint32_t rows) {
        uint64_t t = 0;
        for (uint32_t g = 0; g < groups; ++g)
            t += out_block_words(rows, std::min<uint32_t>(8, d.out_c - g * 8));
        return t;
    };

    uint64_t weight_word = ctx.alloc.alloc(w_words, false);
    uint64_t wdram = 0;

    bool tiled = false;
    uint32_t tile_rows = 0;
    if (!chained &&
        (rows_total > kMaxConvRows ||
         fmap_words + out_words_for(static_cast<uint32_t>(rows_total)) > ctx.alloc.free_words())) {
        tiled = true;
        // Largest aligned tile that fits its im2col slice plus outputs.
        tile_rows = static_cast<uint32_t>(std::min<uint64_t>(rows_total, kMaxConvRows) / la * la);
        while (tile_rows > 0) {
            uint64_t fw = ceil_div(static_cast<uint64_t>(tile_rows) * k_len * a, 64);
            if (fw + out_words_for(tile_rows) <= ctx.alloc.free_words()) break;
            tile_rows -= static_cast<uint32_t>(la);
        }
        if (tile_rows == 0) throw MapError("conv layer does not fit on chip even tiled");
    }

    uint64_t fmap_word;
    uint64_t fmap_dram = 0;
    if (chained) {
        fmap_word = chained->word;
    } else {
        uint64_t dram = ctx.dram_alloc(wbytes.size() + fmap_words * 8);
        wdram = dram;
        fmap_dram = dram + wbytes.size();
        ctx.add_constant("conv_weights", dram, wbytes);
        ctx.plan.input.dram_addr = fmap_dram;
        ctx.plan.input.region_bytes = fmap_words * 8;
        ctx.plan.input.elem_offset = 0;
        ctx.plan.input.elem_bits = static_cast<uint32_t>(a);
        ctx.plan.input.count =
            static_cast<uint64_t>(d.in_h) * d.in_w * d.in_c;
        ctx.plan.input.frac_bits = 0;
        if (!tiled) {
            fmap_word = ctx.alloc.alloc(fmap_words, false);
            sp.loads.push_back({wdram, weight_word, wbytes.size()});
            sp.loads.push_back({fmap_dram, fmap_word, fmap_words * 8});
        } else {
            uint64_t fw = ceil_div(static_cast<uint64_t>(tile_rows) * k_len * a, 64);
            fmap_word = ctx.alloc.alloc(fw, false);
            sp.loads.push_back({wdram, weight_word, wbytes.size()});
        }
    }
    if (chained) {
        uint64_t cw_dram = ctx.dram_alloc(wbytes.size());
        ctx.add_constant("conv_weights_" + std::to_string(ctx.plan.constants.size()), cw_dram,
                         wbytes);
        sp.loads.push_back({cw_dram, weight_word, wbytes.size()});
    }

    // Output blocks: per (tile, group), word-aligned, row-major rows x nc.
    struct OutBlock {
        uint64_t word;
        uint32_t row0, rows, g, nc;
        uint64_t dram;
        uint64_t bytes;
    };
    std::vector<OutBlock> blocks;
    uint32_t n_tiles = tiled ? static_cast<uint32_t>(ceil_div(rows_total, tile_rows)) : 1;
    uint32_t tr = tiled ? tile_rows : static_cast<uint32_t>(rows_total);
    uint64_t out_region_words = out_words_for(tr);
    uint64_t out_word = ctx.alloc.alloc(out_region_words, false);
    for (uint32_t t = 0; t < n_tiles; ++t) {
        uint32_t row0 = t * tr;
        uint32_t rows = static_cast<uint32_t>(std::min<uint64_t>(tr, rows_total - row0));
        uint64_t off = 0;
        for (uint32_t g = 0; g < groups; ++g) {
            uint32_t nc = std::min<uint32_t>(8, d.out_c - g * 8);
            OutBlock b;
            b.word = out_word + off;
            b.row0 = row0;
            b.rows = rows;
            b.g = g;
            b.nc = nc;
            b.bytes = out_block_words(rows, nc) * 8;
            b.dram = ctx.dram_alloc(b.bytes);
            blocks.push_back(b);
            off += out_block_words(rows, nc);
        }
    }

    sp.body.push_back([&ctx, blocks, fmap_word, fmap_dram, weight_word, group_off_words, k_len, a,
                       shift, wide, tiled, tr, rows_total]() {
        uint32_t cur_tile = UINT32_MAX;
        for (const auto& b : blocks) {
            uint32_t t = b.row0 / tr;
            if (tiled && t != cur_tile) {
                uint64_t fw = ceil_div(static_cast<uint64_t>(b.rows) * k_len * a, 64);
                uint64_t slice = static_cast<uint64_t>(b.row0) * k_len * a / 8;
                ctx.b.dma(true, fmap_dram + slice, fmap_word, fw * 8);
                cur_tile = t;
            }
            uint64_t fbase = tiled ? fmap_word
                                   : fmap_word + static_cast<uint64_t>(b.row0) * k_len * a / 64;
            ctx.b.conv(fbase, weight_word + group_off_words[b.g], b.word, b.rows, b.nc,
                       static_cast<uint32_t>(k_len), static_cast<uint32_t>(k_len), shift, wide,
                       false);
            if (tiled) ctx.b.dma(false, b.dram, b.word, b.bytes);
        }
        (void)rows_total;
    });

    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        if (!tiled) sp.stores.push_back({b.dram, b.word, b.bytes});
        OutputSegment seg{false, b.dram, static_cast<uint32_t>(out_bits),
                          static_cast<uint64_t>(b.rows) * b.nc};
        sp.out_segments.push_back(seg);
        sp.out_blocks.push_back({static_cast<uint32_t>(i), b.row0, b.rows, b.g * 8, b.nc});
    }

    // Chaining metadata (single tile, single group layouts only).
    sp.out_word = blocks.front().word;
    sp.out_elems = rows_total * d.out_c;
    sp.out_bits = out_bits;
    sp.out_bytes = blocks.front().bytes;
    return sp;
}

// ---------------------------------------------------------------------------
// Harness: stage plans -> one program with a load prologue and store epilogue.

StagePlan plan_stage(MapCtx& ctx, const Workload& w, const ChainInput* chained) {
    int ivb = w.input_value_bits > 0 ? w.input_value_bits : w.cfg.a_bits;
    switch (w.kind) {
        case Workload::Kind::Fft:
            return plan_fft(ctx, w.fft_n, w.cfg, chained);
        case Workload::Kind::Fir:
            return plan_fir(ctx, w.fir_taps, w.fir_length, w.cfg, w.wide_output, ivb);
        case Workload::Kind::Dct2d:
            return plan_dct(ctx, w.cfg, w.dct_blocks, ivb);
        case Workload::Kind::Dwt:
            return plan_dwt(ctx, w.dwt_lo, w.dwt_hi, w.dwt_n, w.dwt_levels, w.cfg, ivb);
        case Workload::Kind::ConvLayer:
            return plan_conv(ctx, w.conv, w.cfg, w.wide_output, ivb, chained);
        case Workload::Kind::Pipeline:
            throw MapError("pipelines cannot nest");
    }
    throw MapError("unreachable workload kind");
}

void apply_overrides(TensorPlan& plan, const std::map<std::string, std::string>& overrides) {
    for (const auto& [name, path] : overrides) {
        auto it = std::find_if(plan.constants.begin(), plan.constants.end(),
                               [&](const ConstTensor& t) { return t.name == name; });
        if (it == plan.constants.end()) throw MapError("no plan constant named '" + name + "'");
        std::ifstream f(path, std::ios::binary);
        if (!f) throw MapError("cannot open override file " + path);
        std::vector<uint8_t> data((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
        if (data.size() != it->bytes.size())
            throw MapError("override for '" + name + "' has wrong size");
        it->bytes = std::move(data);
    }
}

Lowered map_pipeline_impl(std::span<const Workload> stages, const MachineConfig& mc, bool fused,
                          const std::map<std::string, std::string>& overrides) {
    if (stages.empty()) throw MapError("pipeline needs at least one stage");
    MapCtx ctx(mc);

    std::vector<StagePlan> plans;
    plans.reserve(stages.size());
    ChainInput chain{};
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const ChainInput* in = i == 0 ? nullptr : &chain;
        plans.push_back(plan_stage(ctx, stages[i], in));
        chain = {plans.back().out_word, plans.back().out_elems, plans.back().out_bits};
        ctx.plan.stage_pc_spans.emplace_back(0, 0);  // filled below
    }

    for (const auto& sp : plans)
        for (const auto& ld : sp.loads) ctx.b.dma(true, ld.dram, ld.word, ld.bytes);
    ctx.plan.prologue_end_pc = ctx.b.pc();

    for (std::size_t i = 0; i < stages.size(); ++i) {
        uint32_t begin = ctx.b.pc();
        ctx.b.set_bitwidth(stages[i].cfg);
        for (auto& fn : plans[i].body) fn();
        if (!fused && i + 1 < stages.size()) {
            // DRAM round-trip between stages, the independent-accelerator way.
            uint64_t scratch = ctx.dram_alloc(plans[i].out_bytes);
            ctx.b.dma(false, scratch, plans[i].out_word, plans[i].out_bytes);
            ctx.b.dma(true, scratch, plans[i].out_word, plans[i].out_bytes);
        }
        ctx.plan.stage_pc_spans[i] = {begin, ctx.b.pc()};
    }

    ctx.plan.epilogue_start_pc = ctx.b.pc();
    const StagePlan& last = plans.back();
    for (const auto& st : last.stores) ctx.b.dma(false, st.dram, st.word, st.bytes);
    ctx.b.halt();

    ctx.plan.outputs = last.out_segments;
    ctx.plan.conv_blocks = last.out_blocks;
    ctx.plan.dram_bytes = ctx.dram_next;

    uint64_t analytic = 0;
    for (const auto& s : stages) analytic += count_mult_adds(s);
    ctx.plan.analytic_mult_adds = analytic;

    apply_overrides(ctx.plan, overrides);

    Lowered low;
    low.plan = std::move(ctx.plan);
    low.program = ctx.b.take();
    return low;
}

}  // namespace

int safe_requant_shift(int64_t max_abs, int out_bits) { return safe_shift_impl(max_abs, out_bits); }

FftSchedule FftSchedule::build(uint32_t n) {
    if (n < 2 || !std::has_single_bit(n)) throw MapError("fft size must be a power of two");
    FftSchedule s;
    s.n = n;
    int stages = std::countr_zero(n);
    for (int t = 0; t < stages; ++t) {
        uint32_t half = 1u << t;
        uint32_t block = half * 2;
        FftStage st;
        for (uint32_t j = 0; j < half; ++j) {
            FftGroup g;
            g.twiddle_index = j * (n / block);
            for (uint32_t base = 0; base < n; base += block)
                g.butterflies.push_back({base + j, base + j + half});
            st.groups.push_back(std::move(g));
        }
        s.stages.push_back(std::move(st));
    }
    return s;
}

std::vector<std::complex<double>> fft_schedule_float(std::span<const std::complex<double>> x) {
    uint32_t n = static_cast<uint32_t>(x.size());
    FftSchedule sched = FftSchedule::build(n);
    int stages = std::countr_zero(n);
    std::vector<std::complex<double>> w(n);
    for (uint32_t i = 0; i < n; ++i) w[bit_reverse(i, stages)] = x[i];
    for (const auto& st : sched.stages) {
        for (const auto& g : st.groups) {
            double ang = -2.0 * std::numbers::pi * static_cast<double>(g.twiddle_index) /
                         static_cast<double>(n);
            double wr = std::cos(ang), wi = std::sin(ang);
            for (const auto& bf : g.butterflies) {
                double pr = w[bf.p].real(), pi = w[bf.p].imag();
                double qr = w[bf.q].real(), qi = w[bf.q].imag();
                // The canonical coefficient rows, halved per stage.
                double opr = (pr + wr * qr - wi * qi) / 2.0;
                double opi = (pi + wi * qr + wr * qi) / 2.0;
                double oqr = (pr - wr * qr + wi * qi) / 2.0;
                double oqi = (pi - wi * qr - wr * qi) / 2.0;
                w[bf.p] = {opr, opi};
                w[bf.q] = {oqr, oqi};
            }
        }
    }
    return w;
}

std::vector<int64_t> reassemble_conv_output(const TensorPlan& plan,
                                            std::span<const int64_t> flat) {
    uint32_t rows_total = 0, m_total = 0;
    for (const auto& b : plan.conv_blocks) {
        rows_total = std::max(rows_total, b.row0 + b.rows);
        m_total = std::max(m_total, b.m0 + b.cols);
    }
    std::vector<uint64_t> seg_start(plan.outputs.size(), 0);
    uint64_t at = 0;
    for (std::size_t i = 0; i < plan.outputs.size(); ++i) {
        seg_start[i] = at;
        at += plan.outputs[i].count;
    }
    std::vector<int64_t> out(static_cast<std::size_t>(rows_total) * m_total, 0);
    for (const auto& b : plan.conv_blocks) {
        uint64_t base = seg_start[b.segment];
        for (uint32_t r = 0; r < b.rows; ++r)
            for (uint32_t c = 0; c < b.cols; ++c)
                out[static_cast<std::size_t>(b.m0 + c) * rows_total + (b.row0 + r)] =
                    flat[base + static_cast<uint64_t>(r) * b.cols + c];
    }
    return out;
}

Lowered map_workload(const Workload& w, const MachineConfig& mc) {
    if (w.kind == Workload::Kind::Pipeline)
        return map_pipeline_impl(w.stages, mc, w.fused, w.constant_overrides);
    std::vector<Workload> single{w};
    return map_pipeline_impl(single, mc, true, w.constant_overrides);
}

Lowered map_fft(uint32_t n, mac::BitwidthConfig cfg, const MachineConfig& mc) {
    Workload w;
    w.kind = Workload::Kind::Fft;
    w.fft_n = n;
    w.cfg = cfg;
    return map_workload(w, mc);
}

Lowered map_fir(std::span<const int64_t> taps, uint32_t length, mac::BitwidthConfig cfg,
                const MachineConfig& mc, bool wide_output) {
    Workload w;
    w.kind = Workload::Kind::Fir;
    w.fir_taps.assign(taps.begin(), taps.end());
    w.fir_length = length;
    w.cfg = cfg;
    w.wide_output = wide_output;
    return map_workload(w, mc);
}

Lowered map_dct(mac::BitwidthConfig cfg, const MachineConfig& mc, uint32_t blocks,
                int input_value_bits) {
    Workload w;
    w.kind = Workload::Kind::Dct2d;
    w.dct_blocks = blocks;
    w.cfg = cfg;
    w.input_value_bits = input_value_bits;
    return map_workload(w, mc);
}

Lowered map_dwt(std::span<const int64_t> lo, std::span<const int64_t> hi, uint32_t n,
                uint32_t levels, mac::BitwidthConfig cfg, const MachineConfig& mc) {
    Workload w;
    w.kind = Workload::Kind::Dwt;
    w.dwt_lo.assign(lo.begin(), lo.end());
    w.dwt_hi.assign(hi.begin(), hi.end());
    w.dwt_n = n;
    w.dwt_levels = levels;
    w.cfg = cfg;
    return map_workload(w, mc);
}

Lowered map_conv_layer(const ConvLayerDesc& d, mac::BitwidthConfig cfg, const MachineConfig& mc,
                       bool wide_output, int input_value_bits) {
    Workload w;
    w.kind = Workload::Kind::ConvLayer;
    w.conv = d;
    w.cfg = cfg;
    w.wide_output = wide_output;
    w.input_value_bits = input_value_bits;
    return map_workload(w, mc);
}

Lowered map_pipeline(std::span<const Workload> stages, const MachineConfig& mc, bool fused) {
    return map_pipeline_impl(stages, mc, fused, {});
}

}  // namespace sigdla

#pragma once

// LT encoder and the enhanced peeling decoder.
//
// The decoder keeps every received equation as (active source rows,
// inactive-variable mask, payload). Peeling removes a processed source row
// from all columns containing it and XORs the source's value expression
// into them. When the ripple empties the stall is broken either by doping
// (the caller supplies the symbol) or by dynamic inactivation (the symbol
// becomes a free variable carried in the masks). Permanently inactivated
// rows, in conditional mode, start out as free variables. Equations that
// end with no active rows form the residual system D over the free
// variables, solved at the end by Gaussian elimination.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fountain/bitlinalg.hpp"
#include "fountain/degree.hpp"
#include "fountain/errors.hpp"
#include "fountain/rng.hpp"

namespace fountain {

enum class DecodeMode { Conditional, Unconditional };
enum class StallPolicy { Sequential, Postponed };

inline std::string_view to_string(DecodeMode m) { return m == DecodeMode::Conditional ? "conditional" : "unconditional"; }
inline std::string_view to_string(StallPolicy p) { return p == StallPolicy::Sequential ? "sequential" : "postponed"; }

inline DecodeMode parse_mode(std::string_view s) {
    if (s == "conditional") return DecodeMode::Conditional;
    if (s == "unconditional") return DecodeMode::Unconditional;
    throw UsageError("unknown decode mode '" + std::string(s) + "' (expected conditional|unconditional)");
}

inline StallPolicy parse_policy(std::string_view s) {
    if (s == "sequential") return StallPolicy::Sequential;
    if (s == "postponed") return StallPolicy::Postponed;
    throw UsageError("unknown stall policy '" + std::string(s) + "' (expected sequential|postponed)");
}

struct CodeParams {
    std::size_t k = 0;            // source symbols per block
    std::size_t symbol_bits = 0;  // s; the field is GF(2)
    std::size_t p = 0;            // permanently inactivated rows (the last p)
    DistributionKind distribution = DistributionKind::IdealSoliton;
    DecodeMode mode = DecodeMode::Conditional;
    double ge_exponent = 2.5;     // g in the complexity model, within [2.5, 3]

    void validate() const {
        if (k < 2) throw UsageError("CodeParams: k must be >= 2");
        if (p >= k) throw UsageError("CodeParams: p must be < k");
        if (ge_exponent < 2.5 || ge_exponent > 3.0) throw UsageError("CodeParams: g must lie in [2.5, 3]");
    }
};

// sqrt(k) rounded, the usual permanent-inactivation count.
inline std::size_t default_permanent_inactivations(std::size_t k) {
    return static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(k))));
}

struct EncodedSymbol {
    std::uint64_t column_id = 0;
    std::vector<std::uint32_t> indices;  // sorted source rows
    BitVector payload;
};

class Encoder {
public:
    Encoder(std::span<const BitVector> block, const CodeParams& params, std::uint64_t session_seed)
        : block_(block.begin(), block.end()),
          sampler_(make_distribution(params.distribution, params.k), params.k, params.p),
          seed_(session_seed) {
        params.validate();
        if (block_.size() != params.k) throw UsageError("Encoder: block must hold exactly k symbols");
        for (const auto& s : block_)
            if (s.size() != params.symbol_bits) throw UsageError("Encoder: symbol size mismatch");
        bits_ = params.symbol_bits;
    }

    [[nodiscard]] const ColumnSampler& sampler() const noexcept { return sampler_; }
    [[nodiscard]] std::uint64_t session_seed() const noexcept { return seed_; }

    [[nodiscard]] EncodedSymbol symbol(std::uint64_t column_id) const {
        EncodedSymbol out;
        out.column_id = column_id;
        out.indices = sampler_.column(seed_, column_id).all();
        out.payload = BitVector(bits_);
        for (auto i : out.indices) out.payload ^= block_[i];
        return out;
    }

    [[nodiscard]] std::vector<EncodedSymbol> encode(std::size_t count, std::uint64_t first_column = 0) const {
        if (count == 0) throw UsageError("encode: count must be >= 1");
        std::vector<EncodedSymbol> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) out.push_back(symbol(first_column + i));
        return out;
    }

private:
    std::vector<BitVector> block_;
    ColumnSampler sampler_;
    std::uint64_t seed_;
    std::size_t bits_ = 0;
};

inline std::vector<EncodedSymbol> encode(std::span<const BitVector> block, const CodeParams& params, std::size_t count,
                                         std::uint64_t session_seed) {
    return Encoder(block, params, session_seed).encode(count);
}

// Optional instrumentation filled in during peeling.
struct DecodeTrace {
    // Equations brought to active degree one by each processed symbol that
    // was decoded from an equation (stall-breaking steps are not included).
    std::vector<std::uint32_t> ripple_increments;
    // Processed-symbol counts between consecutive stalls.
    std::vector<std::uint32_t> yields;
    // Processed-symbol count at which each stall happened.
    std::vector<std::uint32_t> stall_points;
    // Cloud degree histograms captured when the processed count reaches each
    // entry of snapshot_at; histogram[d] = equations with active degree d.
    std::vector<std::size_t> snapshot_at;
    std::vector<std::vector<std::uint32_t>> snapshots;
};

using RepairFn = std::function<BitVector(std::uint32_t)>;

struct DecodeOptions {
    StallPolicy policy = StallPolicy::Postponed;
    // Under the sequential policy, supplies the exact value of a doped
    // source symbol. Without it, sequential requests are deferred and
    // reported in the outcome.
    RepairFn repair;
    std::uint64_t seed = 0;  // tie-breaking stream for stall selection
    DecodeTrace* trace = nullptr;
};

enum class SymbolState : std::uint8_t { Undecoded, InRipple, Decoded, Doped, Inactive, Uncovered };

enum class VariableKind : std::uint8_t { Permanent, Dynamic, Requested };

struct LedgerVariable {
    std::uint32_t source;
    VariableKind kind;
};

struct ResidualEquation {
    BitVector mask;     // over ledger variables
    BitVector payload;  // equation value after substituting decoded symbols
};

struct Counters {
    std::size_t processed = 0;      // l: decoded + doped + inactivated
    std::size_t symbol_xors = 0;    // payload XORs during peeling
    std::size_t releases = 0;       // equations that reached active degree one
    std::size_t ge_row_ops = 0;
    std::size_t substitution_xors = 0;
};

struct RankReport {
    std::size_t variables = 0;  // p + i unknowns in D
    std::size_t equations = 0;  // w
    std::size_t rank = 0;
    std::size_t rank_permanent = 0;  // D_p: columns of permanent variables
    std::size_t rank_dynamic = 0;    // D_i: columns of dynamic variables
    std::vector<std::size_t> free_variables;  // ledger positions, elimination order

    [[nodiscard]] bool full_rank() const noexcept { return rank == variables; }
};

struct ComplexityReport {
    double linear = 0.0;     // C_l = k - p + d
    double quadratic = 0.0;  // C_g = (p + i + u - d)^g
    double per_symbol = 0.0; // C = (C_l + C_g) / (k - d)
};

// C = (k - p + d + (p + i + u - d)^g) / (k - d).
inline ComplexityReport complexity_report(std::size_t k, std::size_t p, std::size_t i, std::size_t u, std::size_t d,
                                          double g) {
    if (d < u || d > u + i + p) throw UsageError("complexity_report: dopings must lie in [u, u + i + p]");
    if (d >= k) throw UsageError("complexity_report: dopings must be < k");
    ComplexityReport r;
    r.linear = static_cast<double>(k - p + d);
    r.quadratic = std::pow(static_cast<double>(p + i + u - d), g);
    r.per_symbol = (r.linear + r.quadratic) / static_cast<double>(k - d);
    return r;
}

struct DecodeOutcome {
    CodeParams params;
    StallPolicy policy = StallPolicy::Postponed;

    std::vector<SymbolState> state;
    std::vector<BitVector> expr_payload;  // for Decoded / Doped sources
    std::vector<BitVector> expr_mask;     // for Decoded sources
    std::vector<std::int32_t> ledger_slot;  // source -> ledger position, -1 if none
    std::vector<LedgerVariable> ledger;
    std::vector<ResidualEquation> residual;

    std::vector<std::uint32_t> uncovered;
    std::vector<std::uint32_t> sequential_doped;  // fetched during peeling, in order
    std::size_t dynamic_inactivations = 0;
    std::size_t deferred_requests = 0;
    std::size_t stalls = 0;
    Counters counters;

    [[nodiscard]] std::size_t k() const noexcept { return params.k; }
    [[nodiscard]] std::size_t u() const noexcept { return uncovered.size(); }
    // Stall-breaking picks; under the postponed policy these are the
    // dynamic inactivations.
    [[nodiscard]] std::size_t i() const noexcept { return stalls; }
    [[nodiscard]] std::size_t permanent() const noexcept {
        return static_cast<std::size_t>(std::count_if(ledger.begin(), ledger.end(), [](const LedgerVariable& v) {
            return v.kind == VariableKind::Permanent;
        }));
    }
};

class PeelingDecoder {
public:
    PeelingDecoder(std::span<const EncodedSymbol> symbols, const CodeParams& params, DecodeOptions options = {})
        : params_(params), opts_(std::move(options)), rng_(options_seed()), matrix_(params.k) {
        params_.validate();
        const std::size_t k = params_.k;
        conditional_pi_ = params_.mode == DecodeMode::Conditional ? params_.p : 0;
        const std::size_t active_rows = k - conditional_pi_;

        out_.params = params_;
        out_.policy = opts_.policy;
        out_.state.assign(k, SymbolState::Undecoded);
        out_.expr_payload.resize(k);
        out_.expr_mask.resize(k);
        out_.ledger_slot.assign(k, -1);
        def_eq_.assign(k, npos);

        for (std::size_t r = active_rows; r < k; ++r) add_variable(static_cast<std::uint32_t>(r), VariableKind::Permanent);

        const std::size_t n = symbols.size();
        payload_.reserve(n);
        mask_.reserve(n);
        pos2_.assign(n, npos);
        consumed_.assign(n, 0);
        for (const auto& sym : symbols) {
            if (sym.payload.size() != params_.symbol_bits) throw UsageError("decode: payload size mismatch");
            auto idx = normalized(sym.indices);
            std::vector<std::uint32_t> active;
            BitVector mask(out_.ledger.size());
            for (auto r : idx) {
                if (r >= k) throw UsageError("decode: source index out of range");
                if (r < active_rows) active.push_back(r);
                else mask.set(r - active_rows);
            }
            payload_.push_back(sym.payload);
            mask_.push_back(std::move(mask));
            matrix_.add_column(std::move(active));
        }

        for (std::size_t r = 0; r < active_rows; ++r) {
            if (matrix_.row(r).empty()) {
                out_.state[r] = SymbolState::Uncovered;
                out_.uncovered.push_back(static_cast<std::uint32_t>(r));
            }
        }
        for (std::size_t c = 0; c < n; ++c) {
            const auto d = matrix_.degree(c);
            if (d == 0) residual_.push_back(c);
            else if (d == 1) release(c);
            else {
                ++cloud_;
                if (d == 2) deg2_add(c);
            }
        }
        if (opts_.trace) {
            opts_.trace->snapshots.assign(opts_.trace->snapshot_at.size(), {});
            maybe_snapshot();
        }
    }

    [[nodiscard]] const CodeParams& params() const noexcept { return params_; }
    [[nodiscard]] std::size_t processed() const noexcept { return out_.counters.processed; }
    [[nodiscard]] std::size_t ripple_size() const noexcept { return ripple_.size() - ripple_head_; }
    [[nodiscard]] std::size_t cloud_size() const noexcept { return cloud_; }
    [[nodiscard]] bool finished() const noexcept { return ripple_size() == 0 && cloud_ == 0; }
    [[nodiscard]] SymbolState state(std::size_t source) const { return out_.state[source]; }
    [[nodiscard]] const SparseColumnMatrix& matrix() const noexcept { return matrix_; }
    [[nodiscard]] const BitVector& equation_payload(std::size_t c) const { return payload_[c]; }
    [[nodiscard]] const BitVector& equation_mask(std::size_t c) const { return mask_[c]; }
    [[nodiscard]] bool equation_consumed(std::size_t c) const { return consumed_[c] != 0; }
    [[nodiscard]] const std::vector<LedgerVariable>& ledger() const noexcept { return out_.ledger; }
    [[nodiscard]] const BitVector& expression_payload(std::size_t source) const { return out_.expr_payload[source]; }
    [[nodiscard]] const BitVector& expression_mask(std::size_t source) const { return out_.expr_mask[source]; }

    // Processes one ripple symbol. Returns false, doing nothing, when the
    // ripple is empty (stall).
    bool peel() {
        if (ripple_size() == 0) return false;
        const auto j = ripple_[ripple_head_++];
        const auto e = def_eq_[j];
        consumed_[e] = 1;
        out_.state[j] = SymbolState::Decoded;
        out_.expr_payload[j] = payload_[e];
        out_.expr_mask[j] = mask_[e];
        const auto released = process_row(j, out_.expr_payload[j], &out_.expr_mask[j], e);
        if (opts_.trace) opts_.trace->ripple_increments.push_back(static_cast<std::uint32_t>(released));
        advance();
        return true;
    }

    // Picks the symbol to dope or inactivate: a uniformly random remaining
    // degree-two equation and one of its two rows uniformly; without
    // degree-two equations, a random minimum-degree equation. Returns
    // nullopt when the cloud is empty (remaining symbols are uncovered).
    std::optional<std::uint32_t> dope_degree_two() {
        if (cloud_ == 0) return std::nullopt;
        std::size_t c;
        if (!deg2_.empty()) {
            c = deg2_[rng_.below(deg2_.size())];
        } else {
            std::size_t best = std::numeric_limits<std::size_t>::max();
            std::vector<std::size_t> candidates;
            for (std::size_t e = 0; e < payload_.size(); ++e) {
                const auto d = matrix_.degree(e);
                if (d < 2 || consumed_[e]) continue;
                if (d < best) {
                    best = d;
                    candidates.clear();
                }
                if (d == best) candidates.push_back(e);
            }
            c = candidates[rng_.below(candidates.size())];
        }
        const auto rows = matrix_.live_rows(c);
        return rows[rng_.below(rows.size())];
    }

    // Injects the known value of a source symbol (a doping singleton).
    void apply_doping(std::uint32_t source, const BitVector& value) {
        check_unresolved(source);
        if (value.size() != params_.symbol_bits) throw UsageError("apply_doping: payload size mismatch");
        note_stall();
        out_.state[source] = SymbolState::Doped;
        out_.expr_payload[source] = value;
        out_.sequential_doped.push_back(source);
        process_row(source, value, nullptr, npos);
        advance();
    }

    // Marks `source` as decoded with an unknown value: a new free variable
    // replaces its row in every equation that contains it.
    void inactivate(std::uint32_t source, VariableKind kind = VariableKind::Dynamic) {
        check_unresolved(source);
        note_stall();
        const auto v = add_variable(source, kind);
        if (kind == VariableKind::Dynamic) ++out_.dynamic_inactivations;
        else ++out_.deferred_requests;
        matrix_.remove_row(source, [&](std::size_t c, std::size_t nd) {
            if (mask_[c].size() <= v) mask_[c].resize(out_.ledger.size());
            mask_[c].flip(v);
            on_degree_drop(c, nd);
        });
        advance();
    }

    // Stall handler for the postponed policy. Returns the inactivated
    // index, or nullopt when nothing is left to peel.
    std::optional<std::uint32_t> dynamic_inactivate() {
        auto q = dope_degree_two();
        if (q) inactivate(*q, VariableKind::Dynamic);
        return q;
    }

    // Peels to exhaustion, applying the stall policy each time the ripple
    // empties.
    void run() {
        while (true) {
            while (peel()) {
            }
            auto q = dope_degree_two();
            if (!q) break;
            if (opts_.policy == StallPolicy::Postponed) inactivate(*q, VariableKind::Dynamic);
            else if (opts_.repair) apply_doping(*q, opts_.repair(*q));
            else inactivate(*q, VariableKind::Requested);
        }
    }

    // Moves the final state into a DecodeOutcome. The decoder is left empty.
    DecodeOutcome finish() {
        run();
        for (auto c : residual_) {
            if (consumed_[c]) continue;
            ResidualEquation eq;
            eq.mask = std::move(mask_[c]);
            eq.mask.resize(out_.ledger.size());
            eq.payload = std::move(payload_[c]);
            out_.residual.push_back(std::move(eq));
        }
        for (auto& m : out_.expr_mask) m.resize(out_.ledger.size());
        return std::move(out_);
    }

    // Text rendering of the current decoding matrix: one line per source row
    // followed by one line per free variable; columns are equations.
    [[nodiscard]] std::string render() const {
        std::ostringstream os;
        const std::size_t n = payload_.size();
        for (std::size_t r = 0; r < params_.k; ++r) {
            if (!matrix_.row_live(r)) continue;
            os << 'x' << r << '\t';
            std::vector<char> line(n, '.');
            for (auto c : matrix_.row(r))
                if (!consumed_[c]) line[c] = '1';
            os << std::string(line.begin(), line.end()) << '\n';
        }
        for (std::size_t v = 0; v < out_.ledger.size(); ++v) {
            os << 'z' << v << '\t';
            for (std::size_t c = 0; c < n; ++c)
                os << ((!consumed_[c] && v < mask_[c].size() && mask_[c].test(v)) ? '1' : '.');
            os << '\n';
        }
        return os.str();
    }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    std::uint64_t options_seed() const noexcept { return derive_seed(opts_.seed, 0x5eed); }

    static std::vector<std::uint32_t> normalized(std::vector<std::uint32_t> idx) {
        // Repeated terms cancel in GF(2).
        std::sort(idx.begin(), idx.end());
        std::vector<std::uint32_t> out;
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j < idx.size() && idx[j] == idx[i]) ++j;
            if ((j - i) % 2 == 1) out.push_back(idx[i]);
            i = j;
        }
        return out;
    }

    std::size_t add_variable(std::uint32_t source, VariableKind kind) {
        const auto v = out_.ledger.size();
        out_.ledger.push_back({source, kind});
        out_.ledger_slot[source] = static_cast<std::int32_t>(v);
        out_.state[source] = SymbolState::Inactive;
        return v;
    }

    void check_unresolved(std::uint32_t source) const {
        if (source >= params_.k) throw UsageError("source index out of range");
        const auto s = out_.state[source];
        if (s != SymbolState::Undecoded && s != SymbolState::Uncovered)
            throw UsageError("source symbol already resolved");
    }

    void note_stall() {
        ++out_.stalls;
        const auto l = static_cast<std::uint32_t>(out_.counters.processed);
        if (opts_.trace) {
            if (last_stall_) opts_.trace->yields.push_back(l - *last_stall_);
            opts_.trace->stall_points.push_back(l);
        }
        last_stall_ = l;
    }

    // Removes source row j from every equation except `skip`, XORing the
    // value expression in. Returns how many equations were released.
    std::size_t process_row(std::uint32_t j, const BitVector& value, const BitVector* mask, std::size_t skip) {
        std::size_t released = 0;
        const bool has_mask = mask && mask->any();
        matrix_.remove_row(j, [&](std::size_t c, std::size_t nd) {
            if (c == skip) return;
            payload_[c] ^= value;
            ++out_.counters.symbol_xors;
            if (has_mask) xor_extend(mask_[c], *mask);
            if (nd == 1) ++released;
            on_degree_drop(c, nd);
        });
        return released;
    }

    void on_degree_drop(std::size_t c, std::size_t nd) {
        const std::size_t old = nd + 1;
        if (old == 2) deg2_remove(c);
        if (nd == 2) deg2_add(c);
        if (old >= 2 && nd < 2) --cloud_;
        if (nd == 1) release(c);
        else if (nd == 0) residual_.push_back(c);
    }

    void release(std::size_t c) {
        ++out_.counters.releases;
        const auto j = matrix_.sole_row(c);
        if (out_.state[j] == SymbolState::Undecoded) {
            out_.state[j] = SymbolState::InRipple;
            def_eq_[j] = c;
            ripple_.push_back(j);
        }
    }

    void advance() {
        ++out_.counters.processed;
        if (opts_.trace) maybe_snapshot();
        if (ripple_head_ > 4096 && ripple_head_ * 2 > ripple_.size()) {
            ripple_.erase(ripple_.begin(), ripple_.begin() + static_cast<std::ptrdiff_t>(ripple_head_));
            ripple_head_ = 0;
        }
    }

    void maybe_snapshot() {
        auto& t = *opts_.trace;
        for (std::size_t s = 0; s < t.snapshot_at.size(); ++s) {
            if (t.snapshot_at[s] != out_.counters.processed || !t.snapshots[s].empty()) continue;
            std::vector<std::uint32_t> hist(params_.k + 1, 0);
            for (std::size_t c = 0; c < payload_.size(); ++c)
                if (!consumed_[c] && matrix_.degree(c) >= 2) ++hist[matrix_.degree(c)];
            t.snapshots[s] = std::move(hist);
        }
    }

    void deg2_add(std::size_t c) {
        pos2_[c] = deg2_.size();
        deg2_.push_back(c);
    }
    void deg2_remove(std::size_t c) {
        const auto pos = pos2_[c];
        const auto last = deg2_.back();
        deg2_[pos] = last;
        pos2_[last] = pos;
        deg2_.pop_back();
        pos2_[c] = npos;
    }

    CodeParams params_;
    DecodeOptions opts_;
    Rng rng_;
    std::size_t conditional_pi_ = 0;

    SparseColumnMatrix matrix_;
    std::vector<BitVector> payload_;
    std::vector<BitVector> mask_;
    std::vector<std::uint8_t> consumed_;
    std::vector<std::size_t> def_eq_;

    std::vector<std::uint32_t> ripple_;
    std::size_t ripple_head_ = 0;
    std::size_t cloud_ = 0;
    std::vector<std::size_t> deg2_;
    std::vector<std::size_t> pos2_;
    std::vector<std::size_t> residual_;
    std::optional<std::uint32_t> last_stall_;

    DecodeOutcome out_;
};

// Outcome of a block for which nothing was received: every row is
// uncovered except conditional-mode permanent rows, which stay free
// variables.
inline DecodeOutcome empty_outcome(const CodeParams& params) {
    params.validate();
    const std::size_t k = params.k;
    const std::size_t first_pi = params.mode == DecodeMode::Conditional ? k - params.p : k;
    DecodeOutcome out;
    out.params = params;
    out.state.assign(k, SymbolState::Uncovered);
    out.expr_payload.resize(k);
    out.expr_mask.resize(k);
    out.ledger_slot.assign(k, -1);
    for (std::uint32_t j = 0; j < k; ++j) {
        if (j < first_pi) {
            out.uncovered.push_back(j);
            continue;
        }
        out.state[j] = SymbolState::Inactive;
        out.ledger_slot[j] = static_cast<std::int32_t>(out.ledger.size());
        out.ledger.push_back({j, VariableKind::Permanent});
    }
    return out;
}

inline DecodeOutcome decode(std::span<const EncodedSymbol> symbols, const CodeParams& params, DecodeOptions options = {}) {
    if (symbols.empty()) throw UsageError("decode: no symbols");
    PeelingDecoder dec(symbols, params, std::move(options));
    return dec.finish();
}

namespace detail {

// Residual system restricted to the ledger positions in `unknown`, with
// the known variables moved to the right-hand side.
struct ReducedSystem {
    DenseBitMatrix matrix;
    std::vector<BitVector> rhs;
};

inline ReducedSystem reduce(const DecodeOutcome& out, const std::vector<std::size_t>& unknown,
                            const std::vector<std::optional<BitVector>>& known, std::size_t* xors = nullptr) {
    ReducedSystem sys{DenseBitMatrix(0, unknown.size()), {}};
    std::vector<std::int64_t> col_of(out.ledger.size(), -1);
    for (std::size_t c = 0; c < unknown.size(); ++c) col_of[unknown[c]] = static_cast<std::int64_t>(c);
    for (const auto& eq : out.residual) {
        BitVector row(unknown.size());
        BitVector rhs = eq.payload;
        eq.mask.for_each_set([&](std::size_t v) {
            if (col_of[v] >= 0) row.set(static_cast<std::size_t>(col_of[v]));
            else if (known[v]) {
                rhs ^= *known[v];
                if (xors) ++*xors;
            }
        });
        sys.matrix.append_row(std::move(row));
        sys.rhs.push_back(std::move(rhs));
    }
    return sys;
}

inline std::size_t rank_of_columns(const DecodeOutcome& out, const std::vector<std::size_t>& vars) {
    DenseBitMatrix m(0, vars.size());
    for (const auto& eq : out.residual) {
        BitVector row(vars.size());
        for (std::size_t c = 0; c < vars.size(); ++c)
            if (eq.mask.test(vars[c])) row.set(c);
        m.append_row(std::move(row));
    }
    return m.rank();
}

} // namespace detail

// Rank analysis of D and the minimal doping set it implies.
struct GeReport {
    RankReport rank;
    std::size_t d_min = 0;
    // Sources to fetch: uncovered ones, then the free variables of D.
    std::vector<std::uint32_t> minimal_dopings;
    // Values of every ledger variable when D has full column rank.
    std::optional<std::vector<BitVector>> solution;
};

inline GeReport finalize_ge(DecodeOutcome& out) {
    GeReport rep;
    const std::size_t nvars = out.ledger.size();
    std::vector<std::size_t> all(nvars);
    for (std::size_t v = 0; v < nvars; ++v) all[v] = v;
    std::vector<std::optional<BitVector>> none(nvars);
    auto sys = detail::reduce(out, all, none);

    rep.rank.variables = nvars;
    rep.rank.equations = out.residual.size();
    SolveResult res;
    try {
        res = sys.matrix.solve(sys.rhs, &out.counters.ge_row_ops);
    } catch (const InconsistentSystem&) {
        throw IntegrityError("received equations are inconsistent");
    }
    if (auto* sol = std::get_if<Solution>(&res)) {
        rep.rank.rank = nvars;
        rep.solution = std::move(sol->values);
    } else {
        auto& def = std::get<RankDeficiency>(res);
        rep.rank.rank = def.rank;
        rep.rank.free_variables = def.free_columns;
    }

    std::vector<std::size_t> perm, dyn;
    for (std::size_t v = 0; v < nvars; ++v)
        (out.ledger[v].kind == VariableKind::Permanent ? perm : dyn).push_back(v);
    rep.rank.rank_permanent = detail::rank_of_columns(out, perm);
    rep.rank.rank_dynamic = detail::rank_of_columns(out, dyn);

    rep.minimal_dopings = out.uncovered;
    for (auto v : rep.rank.free_variables) rep.minimal_dopings.push_back(out.ledger[v].source);
    rep.d_min = rep.minimal_dopings.size();
    return rep;
}

// Doping set that fetches every uncovered and every dynamically
// inactivated (or deferred) symbol; permanent variables are solved by GE,
// topped up with dopings if their subsystem is rank deficient.
inline std::vector<std::uint32_t> dope_all_set(const DecodeOutcome& out) {
    std::vector<std::uint32_t> set = out.uncovered;
    std::vector<std::size_t> perm;
    for (std::size_t v = 0; v < out.ledger.size(); ++v) {
        if (out.ledger[v].kind == VariableKind::Permanent) perm.push_back(v);
        else set.push_back(out.ledger[v].source);
    }
    if (!perm.empty()) {
        DenseBitMatrix m(0, perm.size());
        for (const auto& eq : out.residual) {
            BitVector row(perm.size());
            for (std::size_t c = 0; c < perm.size(); ++c)
                if (eq.mask.test(perm[c])) row.set(c);
            m.append_row(std::move(row));
        }
        std::vector<BitVector> zero(m.rows(), BitVector(0));
        auto res = m.solve(zero);
        if (auto* def = std::get_if<RankDeficiency>(&res))
            for (auto c : def->free_columns) set.push_back(out.ledger[perm[c]].source);
    }
    return set;
}

// Resolves every free variable from the doped values plus GE on the
// residual system, then substitutes into all stored expressions.
inline std::vector<BitVector> back_substitute(DecodeOutcome& out, const std::map<std::uint32_t, BitVector>& doped) {
    const std::size_t k = out.params.k;
    const std::size_t bits = out.params.symbol_bits;
    for (const auto& [idx, val] : doped) {
        if (idx >= k) throw UsageError("back_substitute: doped index out of range");
        if (val.size() != bits) throw UsageError("back_substitute: doped payload size mismatch");
    }

    const std::size_t nvars = out.ledger.size();
    std::vector<std::optional<BitVector>> z(nvars);
    std::vector<std::size_t> unknown;
    for (std::size_t v = 0; v < nvars; ++v) {
        auto it = doped.find(out.ledger[v].source);
        if (it != doped.end()) z[v] = it->second;
        else unknown.push_back(v);
    }
    if (!unknown.empty() || !out.residual.empty()) {
        auto sys = detail::reduce(out, unknown, z, &out.counters.substitution_xors);
        SolveResult res;
        try {
            res = sys.matrix.solve(sys.rhs, &out.counters.ge_row_ops);
        } catch (const InconsistentSystem&) {
            throw IntegrityError("doped values contradict the received equations");
        }
        if (std::holds_alternative<RankDeficiency>(res))
            throw UsageError("back_substitute: missing doped value for an undetermined variable");
        auto& vals = std::get<Solution>(res).values;
        for (std::size_t c = 0; c < unknown.size(); ++c) z[unknown[c]] = std::move(vals[c]);
    }

    std::vector<BitVector> block(k);
    for (std::size_t j = 0; j < k; ++j) {
        switch (out.state[j]) {
        case SymbolState::Decoded: {
            BitVector v = out.expr_payload[j];
            out.expr_mask[j].for_each_set([&](std::size_t var) {
                v ^= *z[var];
                ++out.counters.substitution_xors;
            });
            block[j] = std::move(v);
            break;
        }
        case SymbolState::Doped:
            block[j] = out.expr_payload[j];
            break;
        case SymbolState::Inactive:
            block[j] = *z[static_cast<std::size_t>(out.ledger_slot[j])];
            break;
        case SymbolState::Uncovered: {
            auto it = doped.find(static_cast<std::uint32_t>(j));
            if (it == doped.end()) throw UsageError("back_substitute: missing doped value for uncovered symbol");
            block[j] = it->second;
            break;
        }
        default:
            throw UsageError("back_substitute: decoding did not complete");
        }
    }
    return block;
}

} // namespace fountain

#pragma once

// Monte Carlo harness: erasure channel, in-process repair server, single
// trials, trial batches and the experiment presets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fountain/codec.hpp"
#include "fountain/errors.hpp"
#include "fountain/model.hpp"
#include "fountain/rng.hpp"
#include "fountain/wire.hpp"

namespace fountain::sim {

// Drops each element independently with probability `erasure`.
template <typename T>
std::vector<T> erasure_channel(std::vector<T> packets, double erasure, Rng& rng) {
    if (erasure < 0.0 || erasure >= 1.0) throw UsageError("erasure_channel: need 0 <= erasure < 1");
    if (erasure == 0.0) return packets;
    std::vector<T> out;
    out.reserve(packets.size());
    for (auto& p : packets)
        if (!rng.bernoulli(erasure)) out.push_back(std::move(p));
    return out;
}

// Serves doping requests from the original block and accounts their cost
// in bit-equivalents: every request carries log2(k) + s bits per symbol
// plus one feedback round trip. Messages pass through the wire format.
class RepairOracle {
public:
    RepairOracle(std::span<const BitVector> block, double feedback_delay, std::uint32_t block_id = 0)
        : block_(block.begin(), block.end()), feedback_delay_(feedback_delay), block_id_(block_id) {
        if (block_.empty()) throw UsageError("RepairOracle: empty block");
        bits_ = block_.front().size();
    }

    std::vector<BitVector> request(const std::vector<std::uint32_t>& indices) {
        if (indices.empty()) return {};
        const auto req = wire::parse_request(wire::serialize(wire::DopingRequest{block_id_, indices}));
        wire::DopingResponse resp{req.block_id, {}};
        for (auto i : req.indices) {
            if (i >= block_.size()) throw ProtocolError("doping request index out of range");
            resp.payloads.push_back(block_[i].to_bytes());
        }
        const auto parsed = wire::parse_response(wire::serialize(resp), (bits_ + 7) / 8);
        std::vector<BitVector> out;
        for (const auto& p : parsed.payloads) {
            auto v = BitVector::from_bytes(p);
            v.resize(bits_);
            out.push_back(std::move(v));
        }
        ++requests_;
        symbols_ += indices.size();
        bits_spent_ += static_cast<double>(indices.size()) * per_symbol_bits() + feedback_delay_;
        return out;
    }

    BitVector fetch(std::uint32_t index) { return request({index}).front(); }

    [[nodiscard]] double per_symbol_bits() const {
        return std::log2(static_cast<double>(block_.size())) + static_cast<double>(bits_);
    }
    [[nodiscard]] double total_bits() const noexcept { return bits_spent_; }
    [[nodiscard]] std::size_t requests() const noexcept { return requests_; }
    [[nodiscard]] std::size_t symbols() const noexcept { return symbols_; }

private:
    std::vector<BitVector> block_;
    double feedback_delay_;
    std::uint32_t block_id_;
    std::size_t bits_ = 0;
    std::size_t requests_ = 0;
    std::size_t symbols_ = 0;
    double bits_spent_ = 0.0;
};

enum class DopingMode { DopeAll, Minimal };

inline std::string_view to_string(DopingMode m) { return m == DopingMode::DopeAll ? "dope-all" : "minimal"; }

struct TrialConfig {
    CodeParams code{.k = 1000, .symbol_bits = 64};
    // Fixed number of delivered symbols k_s. When zero, `broadcast` symbols
    // go through the erasure channel instead.
    std::size_t collected = 0;
    std::size_t broadcast = 0;
    double erasure = 0.0;
    StallPolicy policy = StallPolicy::Postponed;
    DopingMode doping = DopingMode::Minimal;
    double feedback_delay = 0.0;
    std::uint64_t seed = 0;
    DecodeTrace* trace = nullptr;
};

struct TrialReport {
    std::size_t k = 0;
    std::size_t received = 0;  // k_s
    std::size_t p = 0;         // permanent variables solved by GE
    std::size_t i = 0;         // stall-breaking picks
    std::size_t u = 0;
    std::size_t d = 0;         // dopings actually fetched
    std::size_t d_min = 0;
    std::size_t d_all = 0;     // dope-all count
    RankReport rank;
    double complexity = 0.0;       // C at d
    double complexity_min = 0.0;   // C at d_min
    double complexity_all = 0.0;   // C at d_all
    double repair_bits = 0.0;
    std::size_t requests = 0;
    std::size_t symbol_xors = 0;
    bool recovered = false;
};

inline std::vector<BitVector> random_block(std::size_t k, std::size_t bits, Rng& rng) {
    std::vector<BitVector> block(k, BitVector(bits));
    for (auto& s : block) {
        for (auto& w : s.words()) w = rng();
        s.resize(bits);
    }
    return block;
}

// Generates a block, encodes, delivers, decodes, repairs and checks the
// result bit-exactly. Throws IntegrityError if the repaired block differs.
inline TrialReport run_trial(const TrialConfig& cfg) {
    cfg.code.validate();
    const std::size_t k = cfg.code.k;
    Rng rng(cfg.seed);
    const auto block = random_block(k, cfg.code.symbol_bits, rng);
    Encoder enc(block, cfg.code, derive_seed(cfg.seed, 1));

    std::vector<EncodedSymbol> received;
    if (cfg.collected > 0) {
        received = enc.encode(cfg.collected);
    } else {
        if (cfg.broadcast == 0) throw UsageError("run_trial: set collected or broadcast");
        received = erasure_channel(enc.encode(cfg.broadcast), cfg.erasure, rng);
    }

    RepairOracle oracle(block, cfg.feedback_delay);
    std::map<std::uint32_t, BitVector> doped;
    TrialReport rep;
    rep.k = k;
    rep.received = received.size();

    DecodeOutcome out;
    if (received.empty()) {
        out = empty_outcome(cfg.code);
    } else {
        DecodeOptions opts;
        opts.policy = cfg.policy;
        opts.seed = derive_seed(cfg.seed, 2);
        opts.trace = cfg.trace;
        if (cfg.policy == StallPolicy::Sequential) {
            opts.repair = [&](std::uint32_t q) {
                auto v = oracle.fetch(q);
                doped.emplace(q, v);
                return v;
            };
        }
        out = decode(received, cfg.code, std::move(opts));
    }

    const auto ge = finalize_ge(out);
    rep.p = out.permanent();
    rep.i = out.i();
    rep.u = out.u();
    rep.rank = ge.rank;
    rep.symbol_xors = out.counters.symbol_xors;
    const std::size_t seq = out.sequential_doped.size();
    rep.d_min = seq + ge.d_min;
    const auto all_set = dope_all_set(out);
    rep.d_all = seq + all_set.size();

    const auto& final_set = cfg.doping == DopingMode::DopeAll ? all_set : ge.minimal_dopings;
    if (!final_set.empty()) {
        auto vals = oracle.request(final_set);
        for (std::size_t n = 0; n < final_set.size(); ++n) doped.emplace(final_set[n], std::move(vals[n]));
    }
    rep.d = doped.size();

    const auto g = cfg.code.ge_exponent;
    if (rep.d < k) rep.complexity = complexity_report(k, rep.p, rep.i, rep.u, rep.d, g).per_symbol;
    if (rep.d_min < k) rep.complexity_min = complexity_report(k, rep.p, rep.i, rep.u, rep.d_min, g).per_symbol;
    if (rep.d_all < k) rep.complexity_all = complexity_report(k, rep.p, rep.i, rep.u, rep.d_all, g).per_symbol;

    const auto decoded = back_substitute(out, doped);
    if (decoded != block) throw IntegrityError("run_trial: repaired block differs from the source");
    rep.recovered = true;
    rep.repair_bits = oracle.total_bits();
    rep.requests = oracle.requests();
    return rep;
}

// Runs `trials` independent trials; trial t uses seed derive_seed(base, t).
// Results are indexed by trial, so the output does not depend on `jobs`.
inline std::vector<TrialReport> run_trials(TrialConfig cfg, std::size_t trials, std::uint64_t base_seed,
                                           std::size_t jobs = 1) {
    std::vector<TrialReport> out(trials);
    cfg.trace = nullptr;
    jobs = std::max<std::size_t>(1, std::min(jobs, trials));
    auto work = [&](std::size_t first) {
        for (std::size_t t = first; t < trials; t += jobs) {
            auto c = cfg;
            c.seed = derive_seed(base_seed, t);
            out[t] = run_trial(c);
        }
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work, j);
    }
    return out;
}

struct Summary {
    double mean = 0.0;
    double median = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
};

// Quantiles by linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline Summary summarize(const std::vector<double>& v) {
    Summary s;
    if (v.empty()) return s;
    double total = 0.0;
    for (double x : v) total += x;
    s.mean = total / static_cast<double>(v.size());
    s.median = quantile(v, 0.5);
    s.q05 = quantile(v, 0.05);
    s.q95 = quantile(v, 0.95);
    return s;
}

struct ResultRow {
    std::string experiment;
    std::string variant;
    std::size_t k = 0;
    std::size_t k_s = 0;
    std::size_t p = 0;
    std::string mode;
    std::string policy;
    std::size_t trials = 0;
    Summary d;
    double mean_i = 0.0;
    double mean_u = 0.0;
    double mean_C = 0.0;
    double mean_repair_bits = 0.0;
};

struct ExperimentResult {
    std::string preset;
    std::vector<ResultRow> rows;
    nlohmann::json overlay = nlohmann::json::array();  // model curves keyed by the same axes
};

inline constexpr const char* csv_header =
    "experiment,variant,k,k_s,p,mode,policy,trials,mean_d,median_d,q05_d,q95_d,mean_i,mean_u,mean_C,mean_repair_bits";

inline void write_csv(std::ostream& os, const ExperimentResult& r) {
    os << csv_header << '\n';
    os.precision(10);
    for (const auto& row : r.rows) {
        os << row.experiment << ',' << row.variant << ',' << row.k << ',' << row.k_s << ',' << row.p << ','
           << row.mode << ',' << row.policy << ',' << row.trials << ',' << row.d.mean << ',' << row.d.median << ','
           << row.d.q05 << ',' << row.d.q95 << ',' << row.mean_i << ',' << row.mean_u << ',' << row.mean_C << ','
           << row.mean_repair_bits << '\n';
    }
}

struct ExperimentOptions {
    std::size_t trials = 300;
    std::size_t jobs = 1;
    std::uint64_t seed = 1;
    std::size_t symbol_bits = 64;
    double feedback_delay = 1e6;
};

namespace detail {

inline double mean_of(const std::vector<TrialReport>& reps, auto field) {
    double s = 0.0;
    for (const auto& r : reps) s += static_cast<double>(field(r));
    return reps.empty() ? 0.0 : s / static_cast<double>(reps.size());
}

// Row for one doping choice; `dopings` and `complexity` select the per-trial
// quantities (dope-all, minimal or a derived balance).
template <typename D, typename C>
ResultRow make_row(const std::string& experiment, const std::string& variant, const TrialConfig& cfg,
                   const std::vector<TrialReport>& reps, D dopings, C complexity) {
    ResultRow row;
    row.experiment = experiment;
    row.variant = variant;
    row.k = cfg.code.k;
    row.k_s = cfg.collected;
    row.p = cfg.code.p;
    row.mode = std::string(to_string(cfg.code.mode));
    row.policy = std::string(to_string(cfg.policy));
    row.trials = reps.size();
    std::vector<double> ds;
    for (const auto& r : reps) ds.push_back(static_cast<double>(dopings(r)));
    row.d = summarize(ds);
    row.mean_i = mean_of(reps, [](const TrialReport& r) { return r.i; });
    row.mean_u = mean_of(reps, [](const TrialReport& r) { return r.u; });
    row.mean_C = mean_of(reps, complexity);
    row.mean_repair_bits = mean_of(reps, [](const TrialReport& r) { return r.repair_bits; });
    return row;
}

inline std::string variant_name(DistributionKind dist, std::size_t p, std::string_view suffix) {
    return std::string(to_string(dist)) + "/p=" + std::to_string(p) + "/" + std::string(suffix);
}

inline std::size_t two_thirds_sqrt(std::size_t k) {
    return static_cast<std::size_t>(std::lround(2.0 / 3.0 * std::sqrt(static_cast<double>(k))));
}

// Smallest d in [d_min, u + i + p] whose complexity does not exceed target.
inline std::size_t balanced_dopings(const TrialReport& r, double target, double g) {
    const std::size_t hi = std::min(r.u + r.i + r.p, r.k - 1);
    for (std::size_t d = r.d_min; d <= hi; ++d)
        if (complexity_report(r.k, r.p, r.i, r.u, d, g).per_symbol <= target) return d;
    return hi;
}

} // namespace detail

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"fig-syman", "fig-dopPer", "fig-compersym", "fig-dopPer1",
                                                "fig-compersym1", "usecase"};
    return names;
}

inline ExperimentResult run_experiment(const std::string& preset, const ExperimentOptions& opt) {
    ExperimentResult res;
    res.preset = preset;
    const double g = 2.5;
    auto base = [&](std::size_t k, std::size_t p, DistributionKind dist) {
        TrialConfig c;
        c.code = CodeParams{.k = k, .symbol_bits = opt.symbol_bits, .p = p, .distribution = dist,
                            .mode = DecodeMode::Conditional, .ge_exponent = g};
        c.policy = StallPolicy::Postponed;
        c.doping = DopingMode::Minimal;
        c.feedback_delay = opt.feedback_delay;
        return c;
    };
    std::uint64_t point = 0;
    auto batch = [&](const TrialConfig& c) { return run_trials(c, opt.trials, derive_seed(opt.seed, point++), opt.jobs); };
    const auto d_all = [](const TrialReport& r) { return r.d_all; };
    const auto d_min = [](const TrialReport& r) { return r.d_min; };
    const auto c_all = [](const TrialReport& r) { return r.complexity_all; };
    const auto c_min = [](const TrialReport& r) { return r.complexity_min; };
    const std::vector<std::size_t> overheads{0, 25, 50, 75, 100, 125, 150};

    if (preset == "fig-syman") {
        for (std::size_t k : {1000UL, 2000UL, 5000UL}) {
            auto cfg = base(k, 0, DistributionKind::IdealSoliton);
            cfg.collected = k;
            const auto reps = batch(cfg);
            res.rows.push_back(detail::make_row(preset, "is/p=0/dope-all", cfg, reps, d_all, c_all));
            res.rows.push_back(detail::make_row(preset, "is/p=0/minimal", cfg, reps, d_min, c_min));
            res.overlay.push_back({{"k", k}, {"k_s", k}, {"formula", "edop"}, {"expected_dopings", model::expected_dopings(k, 0.0)}});
        }
    } else if (preset == "fig-dopPer" || preset == "fig-compersym") {
        const std::size_t k = 1000;
        for (auto dist : {DistributionKind::IdealSoliton, DistributionKind::RaptorLT}) {
            for (std::size_t p : {std::size_t{0}, default_permanent_inactivations(k), detail::two_thirds_sqrt(k)}) {
                for (auto extra : overheads) {
                    auto cfg = base(k, p, dist);
                    cfg.collected = k + extra;
                    const auto reps = batch(cfg);
                    res.rows.push_back(detail::make_row(preset, detail::variant_name(dist, p, "dope-all"), cfg, reps, d_all, c_all));
                    res.rows.push_back(detail::make_row(preset, detail::variant_name(dist, p, "minimal"), cfg, reps, d_min, c_min));
                }
            }
        }
        for (auto extra : overheads) {
            const double delta = static_cast<double>(extra) / static_cast<double>(k);
            for (auto dist : {DistributionKind::IdealSoliton, DistributionKind::RaptorLT})
                res.overlay.push_back({{"k", k}, {"k_s", k + extra}, {"formula", "uncIS"}, {"distribution", to_string(dist)},
                                       {"u", model::uncovered_estimate(k, delta, model::nominal_mean_degree(dist, k))}});
            res.overlay.push_back({{"k", k}, {"k_s", k + extra}, {"formula", "edop"},
                                   {"expected_dopings", model::expected_dopings(k, delta)}});
        }
    } else if (preset == "fig-dopPer1" || preset == "fig-compersym1") {
        const std::size_t k = 1000;
        const std::size_t p = default_permanent_inactivations(k);
        for (auto extra : overheads) {
            auto is_cfg = base(k, p, DistributionKind::IdealSoliton);
            auto r10_cfg = base(k, p, DistributionKind::RaptorLT);
            is_cfg.collected = r10_cfg.collected = k + extra;
            const auto is = batch(is_cfg);
            const auto r10 = batch(r10_cfg);
            res.rows.push_back(detail::make_row(preset, detail::variant_name(DistributionKind::IdealSoliton, p, "minimal"), is_cfg, is, d_min, c_min));
            res.rows.push_back(detail::make_row(preset, detail::variant_name(DistributionKind::RaptorLT, p, "minimal"), r10_cfg, r10, d_min, c_min));
            res.rows.push_back(detail::make_row(preset, detail::variant_name(DistributionKind::RaptorLT, p, "dope-all"), r10_cfg, r10, d_all, c_all));
            // IS with complexity matched to Raptor-LT minimal doping
            const double target = detail::mean_of(r10, c_min);
            auto bal_d = [&](const TrialReport& r) { return detail::balanced_dopings(r, target, g); };
            auto bal_c = [&](const TrialReport& r) { return complexity_report(r.k, r.p, r.i, r.u, bal_d(r), g).per_symbol; };
            res.rows.push_back(detail::make_row(preset, detail::variant_name(DistributionKind::IdealSoliton, p, "cost-balanced"), is_cfg, is, bal_d, bal_c));
            // IS with dopings matched to the Raptor-LT minimal count
            const auto r10_dmin = static_cast<std::size_t>(std::lround(detail::mean_of(r10, d_min)));
            auto dop_d = [&](const TrialReport& r) { return std::clamp(r10_dmin, r.d_min, std::min(r.u + r.i + r.p, r.k - 1)); };
            auto dop_c = [&](const TrialReport& r) { return complexity_report(r.k, r.p, r.i, r.u, dop_d(r), g).per_symbol; };
            res.rows.push_back(detail::make_row(preset, detail::variant_name(DistributionKind::IdealSoliton, p, "doping-balanced"), is_cfg, is, dop_d, dop_c));
        }
    } else if (preset == "usecase") {
        const std::size_t k = 1000;
        const std::size_t n = 1150;
        const auto uc = model::use_case(50, 0.05, k, n, 0.005);
        res.overlay.push_back({{"formula", "usecase"}, {"clients", 50}, {"erasure", 0.05}, {"k", k}, {"n", n},
                               {"no_fec_repair", uc.no_fec_repair}, {"fec_broadcast", uc.fec_broadcast},
                               {"fec_repair", uc.fec_repair}, {"fec_total", uc.fec_total()}});
        for (double eps : {0.05, 0.10}) {
            auto cfg = base(k, 0, DistributionKind::IdealSoliton);
            cfg.broadcast = n;
            cfg.erasure = eps;
            const auto reps = batch(cfg);
            auto row = detail::make_row(preset, "is/p=0/minimal/eps=" + std::to_string(eps).substr(0, 4), cfg, reps, d_min, c_min);
            row.k_s = static_cast<std::size_t>(std::lround(detail::mean_of(reps, [](const TrialReport& r) { return r.received; })));
            res.rows.push_back(std::move(row));
        }
    } else {
        throw UsageError("unknown preset '" + preset + "'");
    }
    return res;
}

} // namespace fountain::sim

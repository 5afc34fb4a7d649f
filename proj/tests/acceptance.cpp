// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "fountain/model.hpp"
#include "fountain/sim.hpp"

using namespace fountain;
using sim::TrialConfig;
using sim::TrialReport;

namespace {

const std::size_t jobs = std::max(1U, std::thread::hardware_concurrency());

struct Result {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

TrialConfig config(std::size_t k, std::size_t ks, std::size_t p = 0,
                   DistributionKind dist = DistributionKind::IdealSoliton) {
    TrialConfig c;
    c.code = CodeParams{.k = k, .symbol_bits = 64, .p = p, .distribution = dist};
    c.collected = ks;
    return c;
}

double mean(const std::vector<TrialReport>& reps, auto field) {
    double s = 0.0;
    for (const auto& r : reps) s += static_cast<double>(field(r));
    return s / static_cast<double>(reps.size());
}

double tv(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i)
        s += std::abs((i < a.size() ? a[i] : 0.0) - (i < b.size() ? b[i] : 0.0));
    return s / 2.0;
}

std::vector<double> normalized(std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    for (auto& x : v) x /= s;
    return v;
}

// Decodes k_s fresh symbols of a random block with a trace attached.
DecodeOutcome traced_decode(std::size_t k, std::size_t ks, std::uint64_t seed, DecodeTrace& trace,
                            StallPolicy policy = StallPolicy::Postponed) {
    CodeParams cp{.k = k, .symbol_bits = 8};
    Rng rng(seed);
    const auto block = sim::random_block(k, 8, rng);
    const auto syms = encode(block, cp, ks, derive_seed(seed, 1));
    DecodeOptions o;
    o.policy = policy;
    o.seed = derive_seed(seed, 2);
    o.trace = &trace;
    if (policy == StallPolicy::Sequential) o.repair = [&](std::uint32_t q) { return block[q]; };
    return decode(syms, cp, std::move(o));
}

Result roundtrip() {
    Result r;
    Rng pick(1);
    std::size_t ok = 0, n = 1000;
    const std::size_t ks[] = {64, 256, 1000};
    std::vector<TrialConfig> cfgs;
    for (std::size_t t = 0; t < n; ++t) {
        const auto k = ks[pick.below(3)];
        const auto dist = pick.below(2) ? DistributionKind::RaptorLT : DistributionKind::IdealSoliton;
        const std::size_t p = pick.below(2) ? default_permanent_inactivations(k) : 0;
        auto c = config(k, k + pick.below(k / 5 + 1), p, dist);
        c.code.mode = pick.below(2) ? DecodeMode::Unconditional : DecodeMode::Conditional;
        c.policy = pick.below(2) ? StallPolicy::Sequential : StallPolicy::Postponed;
        c.doping = pick.below(2) ? sim::DopingMode::DopeAll : sim::DopingMode::Minimal;
        c.seed = derive_seed(1234, t);
        cfgs.push_back(c);
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& c : cfgs) {
        try {
            ok += sim::run_trial(c).recovered;
        } catch (const std::exception&) {
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.check(ok == n, fmt("%zu/%zu recovered", ok, n));
    r.check(secs < 120.0, fmt("%.1f s", secs));
    return r;
}

Result stationarity() {
    Result r;
    const std::size_t k = 1000;
    const std::vector<std::size_t> at{250, 500, 750};
    std::vector<std::vector<double>> pooled(at.size(), std::vector<double>(k + 1, 0.0));
    for (std::uint64_t t = 0; t < 200; ++t) {
        DecodeTrace tr;
        tr.snapshot_at = at;
        traced_decode(k, k, derive_seed(20, t), tr);
        for (std::size_t s = 0; s < at.size(); ++s)
            for (std::size_t d = 0; d < tr.snapshots[s].size(); ++d) pooled[s][d] += tr.snapshots[s][d];
    }
    const auto rho = ideal_soliton(k);
    double avg = 0.0;
    for (std::size_t s = 0; s < at.size(); ++s) {
        std::vector<double> target(k + 1, 0.0);
        for (std::size_t d = 2; d <= k - at[s]; ++d) target[d] = rho.pmf(d);
        const double x = tv(normalized(pooled[s]), normalized(target));
        avg += x / static_cast<double>(at.size());
        r.check(true, fmt("l=%zu TV %.4f", at[s], x));
    }
    r.check(avg < 0.03, fmt("mean TV %.4f < 0.03", avg));
    return r;
}

Result ripple_increment() {
    Result r;
    std::vector<double> hist(64, 0.0);
    for (std::uint64_t t = 0; t < 200; ++t) {
        DecodeTrace tr;
        traced_decode(1000, 1000, derive_seed(30, t), tr);
        for (auto x : tr.ripple_increments) hist[std::min<std::size_t>(x, 63)] += 1;
    }
    std::vector<double> pois(64);
    for (std::size_t x = 0; x < 64; ++x) pois[x] = model::poisson_pmf(x, 1.0);
    const double x = tv(normalized(hist), pois);
    r.check(x < 0.02, fmt("TV %.4f < 0.02", x));
    return r;
}

Result doping_bound() {
    Result r;
    const double e = model::expected_dopings(1000, 0.0);
    r.check(e >= 8 && e <= 13, fmt("E[D] %.2f in [8,13]", e));
    const auto at_k = sim::run_trials(config(1000, 1000), 500, 40, jobs);
    const double iu = mean(at_k, [](const TrialReport& t) { return t.i + t.u; }) / 1000.0;
    r.check(iu >= 0.02 && iu <= 0.04, fmt("k_s=k (i+u)/k %.2f%% in [2,4]%%", 100 * iu));
    const auto over = sim::run_trials(config(1000, 1050), 500, 41, jobs);
    const double i = mean(over, [](const TrialReport& t) { return t.i; }) / 1000.0;
    r.check(i >= 0.007 && i <= 0.015, fmt("k_s=1050 i/k %.2f%% in [0.7,1.5]%%", 100 * i));
    return r;
}

Result minimal_vanishes() {
    Result r;
    const auto reps = sim::run_trials(config(1000, 1100), 500, 50, jobs);
    std::vector<double> d;
    for (const auto& t : reps) d.push_back(static_cast<double>(t.d_min));
    const auto s = sim::summarize(d);
    r.check(s.median == 0.0, fmt("median %.1f", s.median));
    r.check(s.mean < 0.5, fmt("mean %.3f < 0.5", s.mean));
    return r;
}

Result uncovered() {
    Result r;
    const auto u_of = [](DistributionKind dist, std::size_t ks, std::uint64_t seed) {
        return mean(sim::run_trials(config(1000, ks, 0, dist), 500, seed, jobs),
                    [](const TrialReport& t) { return t.u; });
    };
    const double is0 = u_of(DistributionKind::IdealSoliton, 1000, 60);
    const double r0 = u_of(DistributionKind::RaptorLT, 1000, 61);
    r.check(is0 >= 0.3 && is0 <= 3, fmt("IS u %.2f in [0.3,3]", is0));
    r.check(r0 >= 5 && r0 <= 20, fmt("R10 u %.2f in [5,20]", r0));
    r.check(is0 < r0, "IS < R10 at 0%");
    for (std::size_t extra : {50u, 100u}) {
        const double a = u_of(DistributionKind::IdealSoliton, 1000 + extra, 62 + extra);
        const double b = u_of(DistributionKind::RaptorLT, 1000 + extra, 63 + extra);
        r.check(a < b, fmt("IS %.2f < R10 %.2f at %zu%%", a, b, extra / 10));
    }
    return r;
}

Result rank_formula() {
    Result r;
    bool exact = true;
    for (std::size_t p = 1; p <= 3; ++p) {
        for (std::size_t m = 0; m <= 2; ++m) {
            const std::size_t cols = p + m, bits = p * cols;
            std::uint64_t full = 0;
            for (std::uint64_t code = 0; code < (std::uint64_t{1} << bits); ++code) {
                DenseBitMatrix a(p, cols);
                for (std::size_t b = 0; b < bits; ++b)
                    if ((code >> b) & 1U) a.set(b / cols, b % cols);
                full += a.rank() == p;
            }
            exact = exact && model::full_rank_prob(p, m) == static_cast<double>(full) / std::ldexp(1.0, static_cast<int>(bits));
        }
    }
    r.check(exact, "enumeration p<=3, m<=2 exact");
    Rng rng(70);
    const int n = 100'000;
    for (std::size_t m : {0u, 1u, 2u}) {
        const std::size_t p = 20;
        int full = 0;
        for (int t = 0; t < n; ++t) {
            DenseBitMatrix a(p, p + m);
            for (std::size_t row = 0; row < p; ++row) {
                BitVector v(p + m);
                v.words()[0] = rng();
                v.resize(p + m);
                a.row(row) = v;
            }
            full += a.rank() == p;
        }
        const double q = model::full_rank_prob(p, m), emp = static_cast<double>(full) / n;
        const double sigma = std::sqrt(q * (1 - q) / n);
        r.check(std::abs(emp - q) <= 2 * sigma, fmt("m=%zu MC %.4f vs %.4f", m, emp, q));
    }
    return r;
}

Result d_solvability() {
    Result r;
    for (std::size_t p : {default_permanent_inactivations(1000), sim::detail::two_thirds_sqrt(1000)}) {
        const auto reps = sim::run_trials(config(1000, 1100, p), 10'000, 80 + p, jobs);
        const double singular = mean(reps, [](const TrialReport& t) { return !t.rank.full_rank(); });
        r.check(singular < 0.005, fmt("p=%zu singular %.2f%% < 0.5%%", p, 100 * singular));
    }
    return r;
}

Result yield_recursion() {
    Result r;
    const std::size_t k = 1000;
    const auto y = model::interdoping_yield_pmf(k, 0.0);
    r.check(std::abs(y.prob[2] - std::exp(-2.0)) <= 1e-12, "P(Y=2)=e^-2");
    // bucket k+1 collects the final round of each run, which ends without
    // another doping
    std::vector<double> hist(k + 2, 0.0);
    std::size_t intervals = 0;
    for (std::uint64_t t = 0; intervals < 10'000; ++t) {
        DecodeTrace tr;
        traced_decode(k, k, derive_seed(90, t), tr, StallPolicy::Sequential);
        for (auto v : tr.yields) hist[std::min<std::size_t>(v, k)] += 1;
        if (!tr.stall_points.empty()) hist[k + 1] += 1;
        intervals += tr.yields.size();
    }
    auto model_pmf = y.prob;
    model_pmf.resize(k + 2, 0.0);
    model_pmf[k + 1] = y.tail_mass;
    const double x = tv(normalized(hist), model_pmf);
    r.check(x < 0.05, fmt("TV %.4f < 0.05 over %zu intervals", x, intervals));
    return r;
}

Result complexity() {
    Result r;
    Rng rng(100);
    bool ok = true;
    for (int t = 0; t < 20; ++t) {
        const std::size_t k = 100 + rng.below(5000), p = rng.below(80), i = rng.below(100), u = rng.below(30);
        const std::size_t d = u + rng.below(i + p + 1);
        const double g = 2.0 + rng.uniform();
        const double hand = (double(k) - double(p) + double(d) + std::pow(double(p + i + u - d), g)) / double(k - d);
        ok = ok && std::abs(complexity_report(k, p, i, u, d, g).per_symbol - hand) <= 1e-9 * std::max(1.0, hand);
    }
    r.check(ok, "20 random tuples");
    for (std::size_t ks : {1050u, 1100u, 1150u}) {
        auto c = config(1000, ks);
        c.doping = sim::DopingMode::DopeAll;
        const double m = mean(sim::run_trials(c, 300, 100 + ks, jobs), [](const TrialReport& t) { return t.complexity_all; });
        r.check(m >= 1.0 && m <= 1.5, fmt("k_s=%zu C %.3f", ks, m));
    }
    return r;
}

Result use_case() {
    Result r;
    const auto uc = model::use_case(50, 0.05, 1000, 1150, 0.005);
    r.check(std::abs(uc.no_fec_repair * 100 - 250.0) < 1e-9, fmt("no FEC %.1f%%", uc.no_fec_repair * 100));
    r.check(std::abs(uc.fec_total() * 100 - 40.0) < 1e-9, fmt("FEC %.1f%%", uc.fec_total() * 100));
    return r;
}

Result comparative() {
    Result r;
    for (std::size_t ks : {1000u, 1050u, 1100u, 1150u}) {
        const auto dmin = [](const TrialReport& t) { return t.d_min; };
        const double is = mean(sim::run_trials(config(1000, ks), 500, 120 + ks, jobs), dmin);
        const double r10 = mean(sim::run_trials(config(1000, ks, 0, DistributionKind::RaptorLT), 500, 121 + ks, jobs), dmin);
        r.check(is < r10, fmt("k_s=%zu IS %.2f < R10 %.2f", ks, is, r10));
    }
    return r;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Result()>>> criteria{
        {"round-trip correctness", roundtrip},
        {"ideal soliton stationarity", stationarity},
        {"poisson ripple increment", ripple_increment},
        {"analytical doping bound", doping_bound},
        {"minimal doping vanishes", minimal_vanishes},
        {"uncovered symbols", uncovered},
        {"full-rank probability", rank_formula},
        {"D-matrix solvability", d_solvability},
        {"interdoping yield", yield_recursion},
        {"complexity formula", complexity},
        {"broadcast use case", use_case},
        {"IS vs Raptor-LT minimal doping", comparative},
    };
    int failed = 0;
    for (std::size_t n = 0; n < criteria.size(); ++n) {
        const auto t0 = std::chrono::steady_clock::now();
        Result res;
        try {
            res = criteria[n].second();
        } catch (const std::exception& e) {
            res.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2zu %-32s %s (%.1f s)\n", res.pass ? "PASS" : "FAIL", n + 1, criteria[n].first,
                    res.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !res.pass;
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed ? 1 : 0;
}

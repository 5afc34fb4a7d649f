#pragma once

// Closed-form and recursive models of the doped / inactivating peeling
// decoder: column-degree evolution, ripple increments, interdoping yield,
// expected dopings, rank probabilities, uncovered symbols, the density
// threshold, repair cost and the broadcast use-case arithmetic.
//
// Logarithms: natural log for degree arithmetic, base 2 for bit costs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "fountain/degree.hpp"
#include "fountain/errors.hpp"

namespace fountain::model {

// Poisson(lambda) mass at r, evaluated in log space.
inline double poisson_pmf(std::size_t r, double lambda) {
    if (lambda <= 0.0) return r == 0 ? 1.0 : 0.0;
    const double x = static_cast<double>(r);
    return std::exp(x * std::log(lambda) - lambda - std::lgamma(x + 1.0));
}

// Distribution of the column degree A_{k-l} after l processed rows,
// starting from omega0 (indexed by degree). Entry d of the result is
// P(A_{k-l} = d); degrees below 1 are not tracked.
inline std::vector<double> column_degree_evolution(const std::vector<double>& omega0, std::size_t k, std::size_t l) {
    if (k < 3 || l > k - 3) throw UsageError("column_degree_evolution: need 0 <= l <= k - 3");
    std::vector<double> cur(k + 1, 0.0);
    for (std::size_t d = 1; d < omega0.size() && d <= k; ++d) cur[d] = omega0[d];
    std::vector<double> next(k + 1, 0.0);
    for (std::size_t step = 0; step < l; ++step) {
        const double rows = static_cast<double>(k - step);
        const std::size_t top = k - step;
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t d = 1; d < top; ++d) {
            const double dd = static_cast<double>(d);
            next[d] = cur[d] * (1.0 - dd / rows) + cur[d + 1] * (dd + 1.0) / rows;
        }
        std::swap(cur, next);
    }
    return cur;
}

// lambda_l = 1 + delta * k / (k - l).
inline double ripple_intensity(std::size_t k, double delta, std::size_t l) {
    return 1.0 + delta * static_cast<double>(k) / static_cast<double>(k - l);
}

// Ripple increment at step l: Poisson(lambda_l) truncated to 0..n/2 with
// n = lambda_l (k - l) output symbols, renormalized.
inline std::vector<double> ripple_increment_pmf(std::size_t k, double delta, std::size_t l) {
    if (l >= k) throw UsageError("ripple_increment_pmf: need l < k");
    const double lambda = ripple_intensity(k, delta, l);
    const double n = lambda * static_cast<double>(k - l);
    const auto top = static_cast<std::size_t>(std::floor(n / 2.0));
    std::vector<double> pmf(top + 1);
    double total = 0.0;
    for (std::size_t r = 0; r <= top; ++r) total += (pmf[r] = poisson_pmf(r, lambda));
    for (auto& p : pmf) p /= total;
    return pmf;
}

struct YieldPmf {
    std::size_t k = 0;
    double delta = 0.0;
    double lambda = 1.0;
    std::vector<double> prob;  // prob[t] = P(Y = t), t = 0..k
    double tail_mass = 0.0;    // 1 - sum(prob)

    [[nodiscard]] double total() const {
        double s = 0.0;
        for (double p : prob) s += p;
        return s;
    }
};

// Interdoping yield Y: symbols processed between consecutive dopings,
// counting the doped one. P(Y = 0) = P(Y = 1) = 0 and, for 1 <= t < k,
//   P(Y = t + 1) = eta(0) [ A_t(t - 1) - sum_{i=1}^{t-1} P(Y = t - i) A_i(1 + i) ]
// where A_s is Poisson of intensity s * lambda. lambda = 1 + delta k / (k - decoded)
// is the ripple intensity at the start of the doping round. Round-off
// negatives are clamped to zero.
inline YieldPmf interdoping_yield_pmf(std::size_t k, double delta, std::size_t decoded = 0) {
    if (k < 3) throw UsageError("interdoping_yield_pmf: k must be >= 3");
    if (decoded >= k) throw UsageError("interdoping_yield_pmf: decoded must be < k");
    YieldPmf y;
    y.k = k;
    y.delta = delta;
    y.lambda = ripple_intensity(k, delta, decoded);
    const double eta0 = std::exp(-y.lambda);
    y.prob.assign(k + 1, 0.0);
    std::vector<double> restart(k, 0.0);  // A_i(1 + i)
    for (std::size_t i = 1; i < k; ++i) restart[i] = poisson_pmf(i + 1, static_cast<double>(i) * y.lambda);
    for (std::size_t t = 1; t < k; ++t) {
        double r = poisson_pmf(t - 1, static_cast<double>(t) * y.lambda);
        for (std::size_t i = 1; i < t; ++i) r -= y.prob[t - i] * restart[i];
        y.prob[t + 1] = std::max(0.0, eta0 * r);
    }
    y.tail_mass = 1.0 - y.total();
    return y;
}

// E[Y] ~ sum t P(Y = t) + (1 - sum P(Y = t)) k: the missing mass stands for
// rounds in which decoding finishes without another doping, which yield
// on the order of k symbols.
inline double expected_yield(const YieldPmf& y) {
    double m = 0.0;
    double s = 0.0;
    for (std::size_t t = 1; t < y.prob.size(); ++t) {
        m += static_cast<double>(t) * y.prob[t];
        s += y.prob[t];
    }
    return m + (1.0 - s) * static_cast<double>(y.k);
}

// E[D] = k / E[Y] (Wald). For delta > 0 the intensity is refreshed every
// doping round with the decoded count advanced by the expected yield; the
// last, partial round contributes fractionally.
inline double expected_dopings(std::size_t k, double delta) {
    if (delta == 0.0) {
        const double ey = expected_yield(interdoping_yield_pmf(k, 0.0));
        if (!(ey > 0.0)) throw UsageError("expected_dopings: nonpositive expected yield");
        return static_cast<double>(k) / ey;
    }
    double decoded = 0.0;
    double dopings = 0.0;
    const double kk = static_cast<double>(k);
    while (decoded < kk) {
        const auto at = static_cast<std::size_t>(decoded);
        if (at >= k) break;
        const double ey = expected_yield(interdoping_yield_pmf(k, delta, at));
        if (!(ey > 0.0)) throw UsageError("expected_dopings: nonpositive expected yield");
        if (decoded + ey >= kk) {
            dopings += (kk - decoded) / ey;
            break;
        }
        decoded += ey;
        dopings += 1.0;
    }
    return dopings;
}

// Probability that a uniform binary p x (p + m) matrix has full row rank:
// prod_{i=0}^{p-1} (1 - 2^{-(p + m - i)}).
inline double full_rank_prob(std::size_t p, std::size_t m) {
    if (p < 1) throw UsageError("full_rank_prob: p must be >= 1");
    double q = 1.0;
    for (std::size_t i = 0; i < p; ++i) q *= 1.0 - std::ldexp(1.0, -static_cast<int>(p + m - i));
    return q;
}

// u ~ k exp(-(1 + delta) mean_degree).
inline double uncovered_estimate(std::size_t k, double delta, double mean_degree) {
    if (!(mean_degree > 0.0)) throw UsageError("uncovered_estimate: mean degree must be > 0");
    return static_cast<double>(k) * std::exp(-(1.0 + delta) * mean_degree);
}

// Mean degree used by the uncovered estimate: ln k for the Ideal Soliton,
// 4.5 for the Raptor LT table.
inline double nominal_mean_degree(DistributionKind kind, std::size_t k) {
    return kind == DistributionKind::IdealSoliton ? std::log(static_cast<double>(k)) : 4.5;
}

// p(k) = (ln k + x) / k.
inline double density_threshold(std::size_t k, double x = 0.0) {
    if (k < 2) throw UsageError("density_threshold: k must be >= 2");
    return (std::log(static_cast<double>(k)) + x) / static_cast<double>(k);
}

inline bool meets_density_threshold(double density, std::size_t k, double x = 0.0) {
    return density >= density_threshold(k, x);
}

enum class RepairMode { Sequential, Postponed };

struct CostModelParams {
    std::size_t k = 0;
    double symbol_bits = 0.0;  // s
    std::size_t q = 2;
    double feedback_delay = 0.0;  // Delta_f in bit-equivalents
};

struct RepairCost {
    double fraction_undecoded = 0.0;     // M = D / k
    std::optional<double> per_symbol;    // empty when D = 0
    double total = 0.0;
};

// Sequential: log2 k + s log2 q + Delta_f per symbol. Postponed:
// log2 k + s log2 q + Delta_f / (M k) per symbol. Totals multiply by D.
inline RepairCost repair_cost(const CostModelParams& c, RepairMode mode, std::size_t dopings) {
    if (c.k < 2 || c.q < 2) throw UsageError("repair_cost: need k >= 2 and q >= 2");
    RepairCost r;
    const double d = static_cast<double>(dopings);
    r.fraction_undecoded = d / static_cast<double>(c.k);
    if (dopings == 0) return r;
    const double base = std::log2(static_cast<double>(c.k)) + c.symbol_bits * std::log2(static_cast<double>(c.q));
    const double per = mode == RepairMode::Sequential ? base + c.feedback_delay
                                                      : base + c.feedback_delay / (r.fraction_undecoded * static_cast<double>(c.k));
    r.per_symbol = per;
    r.total = per * d;
    return r;
}

struct UseCaseSummary {
    double no_fec_repair = 0.0;   // clients x erasure rate
    double fec_broadcast = 0.0;   // n / k - 1
    double fec_repair = 0.0;      // clients x per-user repair bound
    [[nodiscard]] double fec_total() const { return fec_broadcast + fec_repair; }
};

// Overheads are fractions of one source block (0.4 = 40%).
inline UseCaseSummary use_case(std::size_t clients, double erasure_rate, std::size_t k, std::size_t broadcast_symbols,
                               double per_user_repair_bound) {
    if (k == 0 || broadcast_symbols < k) throw UsageError("use_case: need broadcast symbols >= k > 0");
    if (erasure_rate < 0.0 || per_user_repair_bound < 0.0) throw UsageError("use_case: rates must be >= 0");
    UseCaseSummary s;
    const double c = static_cast<double>(clients);
    s.no_fec_repair = c * erasure_rate;
    s.fec_broadcast = static_cast<double>(broadcast_symbols) / static_cast<double>(k) - 1.0;
    s.fec_repair = c * per_user_repair_bound;
    return s;
}

// Broadcast length that delivers k_s symbols on average over an erasure
// channel: n = k_s / (1 - eps).
inline double broadcast_for_design(double k_s, double erasure_rate) {
    if (erasure_rate < 0.0 || erasure_rate >= 1.0) throw UsageError("broadcast_for_design: need 0 <= eps < 1");
    return k_s / (1.0 - erasure_rate);
}

} // namespace fountain::model

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fountain/bitlinalg.hpp"
#include "fountain/model.hpp"

using namespace fountain;
using namespace fountain::model;

namespace {

// First-passage law of the ripple after a degree-two doping: the doped
// symbol leaves its partner plus Poisson(lambda) extra releases in the
// ripple, and every further processed symbol removes one and adds
// Poisson(lambda). Exact dynamic program over ripple sizes.
std::vector<double> ripple_walk_first_passage(double lambda, std::size_t tmax) {
    std::vector<double> hit(tmax + 1, 0.0);
    std::map<std::size_t, double> dist;
    for (std::size_t x = 0; x < 80; ++x) dist[1 + x] = poisson_pmf(x, lambda);
    for (std::size_t n = 1; n < tmax; ++n) {
        std::map<std::size_t, double> next;
        for (auto [s, p] : dist) {
            for (std::size_t x = 0; x < 60; ++x) {
                const double q = p * poisson_pmf(x, lambda);
                if (q < 1e-300) continue;
                const std::size_t ns = s - 1 + x;
                if (ns == 0) hit[n + 1] += q;
                else if (ns < 200) next[ns] += q;
            }
        }
        dist = std::move(next);
    }
    return hit;
}

double brute_full_rank(std::size_t p, std::size_t m) {
    const std::size_t cols = p + m, bits = p * cols;
    std::uint64_t full = 0;
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << bits); ++code) {
        DenseBitMatrix a(p, cols);
        for (std::size_t b = 0; b < bits; ++b)
            if ((code >> b) & 1U) a.set(b / cols, b % cols);
        full += a.rank() == p;
    }
    return static_cast<double>(full) / static_cast<double>(std::uint64_t{1} << bits);
}

} // namespace

TEST(Poisson, PmfValues) {
    EXPECT_NEAR(poisson_pmf(0, 1.0), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(poisson_pmf(3, 2.0), 8.0 / 6.0 * std::exp(-2.0), 1e-15);
    EXPECT_EQ(poisson_pmf(0, 0.0), 1.0);
    EXPECT_EQ(poisson_pmf(2, 0.0), 0.0);
    EXPECT_GT(poisson_pmf(900, 1000.0), 0.0);
}

TEST(DegreeEvolution, IdealSolitonStaysIdealSoliton) {
    const std::size_t k = 100;
    const auto rho = ideal_soliton(k);
    double worst = 0.0;
    for (std::size_t l = 0; l <= k - 3; ++l) {
        const auto pmf = column_degree_evolution(rho.pmf_table(), k, l);
        const double scale = static_cast<double>(k - l) / static_cast<double>(k);
        for (std::size_t d = 2; d <= k - l; ++d) worst = std::max(worst, std::abs(pmf[d] - scale * rho.pmf(d)));
        for (std::size_t d = k - l + 1; d <= k; ++d) worst = std::max(worst, std::abs(pmf[d]));
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(DegreeEvolution, ZeroStepsIsIdentity) {
    const auto r = raptor_lt(100);
    const auto pmf = column_degree_evolution(r.pmf_table(), 100, 0);
    for (std::size_t d = 1; d <= r.max_degree(); ++d) EXPECT_EQ(pmf[d], r.pmf(d));
}

TEST(DegreeEvolution, SingleStepFromPointMass) {
    std::vector<double> w(6, 0.0);
    w[3] = 1.0;
    const auto pmf = column_degree_evolution(w, 5, 1);
    EXPECT_NEAR(pmf[3], 1.0 - 3.0 / 5.0, 1e-15);
    EXPECT_NEAR(pmf[2], 3.0 / 5.0, 1e-15);
    EXPECT_EQ(pmf[4], 0.0);
}

TEST(DegreeEvolution, RejectsOutOfRange) {
    const auto rho = ideal_soliton(10);
    EXPECT_THROW(column_degree_evolution(rho.pmf_table(), 10, 8), UsageError);
    EXPECT_NO_THROW(column_degree_evolution(rho.pmf_table(), 10, 7));
}

TEST(RippleIncrement, IntensityAndMass) {
    EXPECT_DOUBLE_EQ(ripple_intensity(1000, 0.0, 700), 1.0);
    EXPECT_NEAR(ripple_intensity(1000, 0.1, 500), 1.2, 1e-12);
    const auto pmf = ripple_increment_pmf(1000, 0.0, 0);
    EXPECT_NEAR(pmf[0], std::exp(-1.0), 1e-12);
    double s = 0.0;
    for (double p : pmf) s += p;
    EXPECT_NEAR(s, 1.0, 1e-12);
    // truncation at n/2 near the end of decoding
    const auto tail = ripple_increment_pmf(1000, 0.0, 996);
    EXPECT_EQ(tail.size(), 3u);
    EXPECT_THROW(ripple_increment_pmf(10, 0.0, 10), UsageError);
}

TEST(YieldPmf, FirstTermsExact) {
    const auto y = interdoping_yield_pmf(1000, 0.0);
    EXPECT_EQ(y.prob[0], 0.0);
    EXPECT_EQ(y.prob[1], 0.0);
    EXPECT_NEAR(y.prob[2], std::exp(-2.0), 1e-12);
    EXPECT_NEAR(y.prob[3], 2.0 * std::exp(-3.0), 1e-12);
}

TEST(YieldPmf, MatchesRippleWalkFirstPassage) {
    for (double delta : {0.0, 0.3}) {
        const auto y = interdoping_yield_pmf(1000, delta);
        const auto walk = ripple_walk_first_passage(y.lambda, 40);
        for (std::size_t t = 2; t < 40; ++t) EXPECT_NEAR(y.prob[t], walk[t], 1e-10) << "t = " << t;
    }
}

TEST(YieldPmf, NonNegativeAndSubNormalized) {
    for (std::size_t k : {3u, 10u, 100u, 1000u, 5000u}) {
        for (double delta : {0.0, 0.1}) {
            const auto y = interdoping_yield_pmf(k, delta);
            double cum = 0.0;
            for (double p : y.prob) {
                EXPECT_GE(p, 0.0);
                cum += p;
                EXPECT_LE(cum, 1.0 + 1e-9);
            }
            EXPECT_NEAR(y.tail_mass, 1.0 - cum, 1e-12);
        }
    }
}

TEST(ExpectedYield, Corrections) {
    YieldPmf point;
    point.k = 100;
    point.prob.assign(101, 0.0);
    point.prob[5] = 1.0;
    EXPECT_DOUBLE_EQ(expected_yield(point), 5.0);
    YieldPmf two = point;
    two.prob[5] = 0.5;
    two.prob[7] = 0.5;
    EXPECT_DOUBLE_EQ(expected_yield(two), 6.0);
    // missing mass counts as a full block
    YieldPmf partial = point;
    partial.prob[5] = 0.75;
    EXPECT_DOUBLE_EQ(expected_yield(partial), 0.75 * 5 + 0.25 * 100);
}

TEST(ExpectedDopings, AboutOnePercentAtK1000) {
    const double e = expected_dopings(1000, 0.0);
    EXPECT_GE(e, 8.0);
    EXPECT_LE(e, 13.0);
    EXPECT_NEAR(e, 1000.0 / expected_yield(interdoping_yield_pmf(1000, 0.0)), 1e-9);
}

TEST(ExpectedDopings, FractionDecreasesWithK) {
    const double a = expected_dopings(1000, 0.0) / 1000.0;
    const double b = expected_dopings(2000, 0.0) / 2000.0;
    const double c = expected_dopings(5000, 0.0) / 5000.0;
    EXPECT_GT(a, b);
    EXPECT_GT(b, c);
    // internal consistency at k = 5000
    EXPECT_NEAR(c * 5000.0, 5000.0 / expected_yield(interdoping_yield_pmf(5000, 0.0)), 1e-9);
}

TEST(ExpectedDopings, OverheadHelps) {
    EXPECT_LT(expected_dopings(1000, 0.05), expected_dopings(1000, 0.0));
    EXPECT_LT(expected_dopings(1000, 0.10), expected_dopings(1000, 0.05));
}

TEST(FullRankProb, MatchesEnumeration) {
    for (std::size_t p = 1; p <= 3; ++p)
        for (std::size_t m = 0; m <= 2; ++m) EXPECT_EQ(full_rank_prob(p, m), brute_full_rank(p, m)) << p << "x" << p + m;
    EXPECT_EQ(full_rank_prob(1, 0), 0.5);
    EXPECT_EQ(full_rank_prob(2, 0), 0.375);
}

TEST(FullRankProb, MonotoneAndConverging) {
    for (std::size_t p : {1u, 5u, 20u, 32u})
        for (std::size_t m = 0; m < 12; ++m) EXPECT_GT(full_rank_prob(p, m + 1), full_rank_prob(p, m));
    EXPECT_GT(full_rank_prob(32, 10), 0.999);
    EXPECT_NEAR(full_rank_prob(30, 0), 0.28879, 1e-5);
    EXPECT_THROW(full_rank_prob(0, 1), UsageError);
}

TEST(FullRankProb, MonteCarloWithinThreeSigma) {
    Rng rng(31);
    const int n = 20000;
    for (std::size_t m : {0u, 1u, 2u}) {
        const std::size_t p = 20;
        int full = 0;
        for (int t = 0; t < n; ++t) {
            DenseBitMatrix a(p, p + m);
            for (std::size_t r = 0; r < p; ++r)
                for (std::size_t c = 0; c < p + m; ++c)
                    if (rng() >> 63) a.set(r, c);
            full += a.rank() == p;
        }
        const double q = full_rank_prob(p, m);
        const double sigma = std::sqrt(q * (1 - q) / n);
        EXPECT_NEAR(static_cast<double>(full) / n, q, 3 * sigma) << "m = " << m;
    }
}

TEST(Uncovered, Estimates) {
    EXPECT_NEAR(uncovered_estimate(1000, 0.0, nominal_mean_degree(DistributionKind::IdealSoliton, 1000)), 1.0, 1e-9);
    EXPECT_NEAR(uncovered_estimate(1000, 0.0, nominal_mean_degree(DistributionKind::RaptorLT, 1000)) / 1000.0, 0.0111,
                0.0001);
    EXPECT_LT(uncovered_estimate(1000, 3.0, 4.5), 1e-4);
    EXPECT_THROW(uncovered_estimate(1000, 0.0, 0.0), UsageError);
}

TEST(DensityThreshold, Values) {
    EXPECT_NEAR(density_threshold(1000), 0.006908, 1e-6);
    EXPECT_TRUE(meets_density_threshold(std::log(1000.0) / 1000.0, 1000));
    EXPECT_FALSE(meets_density_threshold(std::log(1000.0) / 1000.0, 1000, 0.5));
    EXPECT_TRUE(meets_density_threshold(std::log(1000.0) / (1000.0 - 32), 1000));
    EXPECT_FALSE(meets_density_threshold(4.5 / 1000.0, 1000));
    EXPECT_THROW(density_threshold(1), UsageError);
}

TEST(RepairCost, PostponedAndSequential) {
    const CostModelParams c{1024, 8000, 2, 1e6};
    const auto post = repair_cost(c, RepairMode::Postponed, 10);
    ASSERT_TRUE(post.per_symbol);
    EXPECT_DOUBLE_EQ(*post.per_symbol, 108010.0);
    EXPECT_DOUBLE_EQ(post.total, 10 * (10 + 8000) + 1e6);
    EXPECT_DOUBLE_EQ(post.fraction_undecoded, 10.0 / 1024);
    const auto seq = repair_cost(c, RepairMode::Sequential, 10);
    EXPECT_DOUBLE_EQ(seq.total, 10 * (10 + 8000 + 1e6));
    EXPECT_LT(post.total, seq.total);
}

TEST(RepairCost, EdgeCases) {
    const CostModelParams free_feedback{1024, 8000, 2, 0.0};
    EXPECT_DOUBLE_EQ(repair_cost(free_feedback, RepairMode::Postponed, 7).total,
                     repair_cost(free_feedback, RepairMode::Sequential, 7).total);
    const auto none = repair_cost({1024, 8000, 2, 1e6}, RepairMode::Postponed, 0);
    EXPECT_FALSE(none.per_symbol);
    EXPECT_EQ(none.total, 0.0);
    // a single postponed doping pays the full round trip, like sequential
    EXPECT_DOUBLE_EQ(repair_cost({1024, 8000, 2, 1e6}, RepairMode::Postponed, 1).total,
                     repair_cost({1024, 8000, 2, 1e6}, RepairMode::Sequential, 1).total);
    // q = 4 doubles the payload bits
    EXPECT_DOUBLE_EQ(*repair_cost({1024, 8000, 4, 0.0}, RepairMode::Sequential, 1).per_symbol, 10 + 16000);
}

TEST(UseCase, BroadcastTable) {
    const auto uc = use_case(50, 0.05, 1000, 1150, 0.005);
    EXPECT_NEAR(uc.no_fec_repair * 100.0, 250.0, 1e-9);
    EXPECT_NEAR(uc.fec_broadcast * 100.0, 15.0, 1e-9);
    EXPECT_NEAR(uc.fec_repair * 100.0, 25.0, 1e-9);
    EXPECT_NEAR(uc.fec_total() * 100.0, 40.0, 1e-9);
    const auto nobody = use_case(0, 0.05, 1000, 1150, 0.005);
    EXPECT_EQ(nobody.no_fec_repair, 0.0);
    EXPECT_EQ(nobody.fec_repair, 0.0);
    EXPECT_THROW(use_case(50, 0.05, 1000, 999, 0.005), UsageError);
    EXPECT_NEAR(broadcast_for_design(1092.5, 0.05), 1150.0, 1e-9);
}

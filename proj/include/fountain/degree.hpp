#pragma once

// Degree distributions for LT-style equations and the column sampler that
// draws the source indices of one encoded symbol.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "fountain/errors.hpp"
#include "fountain/rng.hpp"

namespace fountain {

enum class DistributionKind { IdealSoliton, RaptorLT };

inline std::string_view to_string(DistributionKind k) {
    return k == DistributionKind::IdealSoliton ? "is" : "r10";
}

inline DistributionKind parse_distribution(std::string_view s) {
    if (s == "is" || s == "IS" || s == "ideal-soliton") return DistributionKind::IdealSoliton;
    if (s == "r10" || s == "R10" || s == "raptor" || s == "raptor-lt") return DistributionKind::RaptorLT;
    throw UsageError("unknown degree distribution '" + std::string(s) + "' (expected is|r10)");
}

// Probability mass over degrees 1..max_degree() with an inverse-CDF sampler.
class DegreeDistribution {
public:
    DegreeDistribution() = default;

    // pmf[d] is the probability of degree d; pmf[0] must be 0. The input is
    // normalized, so weights need not sum to one.
    explicit DegreeDistribution(std::vector<double> pmf) : pmf_(std::move(pmf)) {
        if (pmf_.size() < 2) throw UsageError("DegreeDistribution: empty support");
        if (pmf_[0] != 0.0) throw UsageError("DegreeDistribution: degree 0 must have zero mass");
        double total = 0.0;
        for (double p : pmf_) {
            if (!(p >= 0.0)) throw UsageError("DegreeDistribution: negative or NaN mass");
            total += p;
        }
        if (!(total > 0.0)) throw UsageError("DegreeDistribution: zero total mass");
        for (auto& p : pmf_) p /= total;
        while (pmf_.size() > 2 && pmf_.back() == 0.0) pmf_.pop_back();
        cdf_.resize(pmf_.size());
        double acc = 0.0;
        for (std::size_t d = 0; d < pmf_.size(); ++d) {
            acc += pmf_[d];
            cdf_[d] = acc;
        }
        cdf_.back() = 1.0;
    }

    [[nodiscard]] std::size_t max_degree() const noexcept { return pmf_.size() - 1; }
    [[nodiscard]] double pmf(std::size_t d) const noexcept { return d < pmf_.size() ? pmf_[d] : 0.0; }
    [[nodiscard]] double cdf(std::size_t d) const noexcept { return d < cdf_.size() ? cdf_[d] : 1.0; }
    [[nodiscard]] const std::vector<double>& pmf_table() const noexcept { return pmf_; }
    [[nodiscard]] const std::vector<double>& cdf_table() const noexcept { return cdf_; }

    [[nodiscard]] double mean() const noexcept {
        double m = 0.0;
        for (std::size_t d = 1; d < pmf_.size(); ++d) m += static_cast<double>(d) * pmf_[d];
        return m;
    }

    // Restriction to degrees <= max_degree, renormalized.
    [[nodiscard]] DegreeDistribution truncated(std::size_t max_degree) const {
        if (max_degree < 1) throw UsageError("DegreeDistribution::truncated: max degree must be >= 1");
        if (max_degree >= this->max_degree()) return *this;
        std::vector<double> p(pmf_.begin(), pmf_.begin() + static_cast<std::ptrdiff_t>(max_degree) + 1);
        return DegreeDistribution(std::move(p));
    }

    std::size_t sample(Rng& rng) const noexcept {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        auto d = static_cast<std::size_t>(it - cdf_.begin());
        return std::min(d, max_degree());
    }

private:
    std::vector<double> pmf_;
    std::vector<double> cdf_;
};

// rho(1) = 1/k, rho(d) = 1/(d(d-1)) for d = 2..k.
inline DegreeDistribution ideal_soliton(std::size_t k) {
    if (k < 2) throw UsageError("ideal_soliton: k must be >= 2");
    std::vector<double> p(k + 1, 0.0);
    p[1] = 1.0 / static_cast<double>(k);
    for (std::size_t d = 2; d <= k; ++d) p[d] = 1.0 / (static_cast<double>(d) * static_cast<double>(d - 1));
    return DegreeDistribution(std::move(p));
}

// LT degree table of the standardized Raptor code (RFC 5053, section
// 5.4.4.2). Thresholds are on a 2^20 scale; the table does not depend on k.
struct RaptorDegreeEntry {
    std::uint32_t threshold;
    std::uint32_t degree;
};
inline constexpr RaptorDegreeEntry raptor_lt_table[] = {
    {10241, 1}, {491582, 2}, {712794, 3}, {831695, 4}, {948446, 10}, {1032189, 11}, {1048576, 40},
};

inline DegreeDistribution raptor_lt(std::size_t k) {
    if (k < 64) throw UsageError("raptor_lt: k must be >= 64");
    std::vector<double> p(41, 0.0);
    std::uint32_t prev = 0;
    for (const auto& e : raptor_lt_table) {
        p[e.degree] = static_cast<double>(e.threshold - prev) / 1048576.0;
        prev = e.threshold;
    }
    return DegreeDistribution(std::move(p));
}

inline DegreeDistribution make_distribution(DistributionKind kind, std::size_t k) {
    return kind == DistributionKind::IdealSoliton ? ideal_soliton(k) : raptor_lt(k);
}

// Rows touched by one encoded symbol. Upper indices lie in [0, k-p), lower
// indices in [k-p, k); both sorted.
struct ColumnSpec {
    std::vector<std::uint32_t> upper;
    std::vector<std::uint32_t> lower;

    [[nodiscard]] std::size_t upper_degree() const noexcept { return upper.size(); }
    [[nodiscard]] std::size_t lower_degree() const noexcept { return lower.size(); }

    [[nodiscard]] std::vector<std::uint32_t> all() const {
        std::vector<std::uint32_t> v(upper);
        v.insert(v.end(), lower.begin(), lower.end());
        return v;
    }
};

// Uniform subset of `count` distinct values from [offset, offset + range), sorted.
inline std::vector<std::uint32_t> sample_subset(Rng& rng, std::size_t count, std::size_t range, std::uint32_t offset) {
    std::vector<std::uint32_t> out;
    out.reserve(count);
    if (count * 4 > range) {
        // partial Fisher-Yates
        std::vector<std::uint32_t> pool(range);
        std::iota(pool.begin(), pool.end(), 0U);
        for (std::size_t i = 0; i < count; ++i) {
            auto j = i + rng.below(range - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i] + offset);
        }
    } else {
        // Floyd's algorithm
        for (std::size_t j = range - count; j < range; ++j) {
            auto t = static_cast<std::uint32_t>(rng.below(j + 1)) + offset;
            auto cand = static_cast<std::uint32_t>(j) + offset;
            out.push_back(std::find(out.begin(), out.end(), t) == out.end() ? t : cand);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Draws columns for a block of k rows with the last p rows permanently
// inactivated. The upper degree follows the distribution restricted to
// 1..k-p; when p > 0 every column also gets a lower part whose degree is
// uniform on 1..p.
class ColumnSampler {
public:
    ColumnSampler(const DegreeDistribution& dist, std::size_t k, std::size_t p) : k_(k), p_(p) {
        if (p >= k) throw UsageError("ColumnSampler: p must be < k");
        upper_ = dist.truncated(k - p);
    }

    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] std::size_t p() const noexcept { return p_; }
    [[nodiscard]] const DegreeDistribution& upper_distribution() const noexcept { return upper_; }

    ColumnSpec sample(Rng& rng) const {
        ColumnSpec spec;
        const std::size_t upper_rows = k_ - p_;
        spec.upper = sample_subset(rng, upper_.sample(rng), upper_rows, 0);
        if (p_ > 0) {
            const std::size_t lower_degree = 1 + rng.below(p_);
            spec.lower = sample_subset(rng, lower_degree, p_, static_cast<std::uint32_t>(upper_rows));
        }
        return spec;
    }

    // Column for a given (session, column id); deterministic.
    [[nodiscard]] ColumnSpec column(std::uint64_t session_seed, std::uint64_t column_id) const {
        Rng rng = column_stream(session_seed, column_id);
        return sample(rng);
    }

private:
    std::size_t k_;
    std::size_t p_;
    DegreeDistribution upper_;
};

inline ColumnSpec sample_column(const DegreeDistribution& dist, std::size_t k, std::size_t p, Rng& rng) {
    return ColumnSampler(dist, k, p).sample(rng);
}

} // namespace fountain

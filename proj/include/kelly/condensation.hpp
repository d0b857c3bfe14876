#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kelly/counter_rng.hpp"

namespace kelly {

/// Regions of the two-asset phase diagram in the (m1, m2) plane at fixed
/// variances. A: all cash. B1/B2: partial investment in one asset only.
/// C: partial investment in both. D1/D2: everything in one asset, the other
/// unprofitable. E: fully invested in both. F1/F2: everything in one asset
/// although the other is profitable too.
enum class PhaseRegion { A, B1, B2, C, D1, D2, E, F1, F2 };

inline std::string to_string(PhaseRegion r) {
    switch (r) {
        case PhaseRegion::A: return "A";
        case PhaseRegion::B1: return "B1";
        case PhaseRegion::B2: return "B2";
        case PhaseRegion::C: return "C";
        case PhaseRegion::D1: return "D1";
        case PhaseRegion::D2: return "D2";
        case PhaseRegion::E: return "E";
        case PhaseRegion::F1: return "F1";
        case PhaseRegion::F2: return "F2";
    }
    return "?";
}

/// Mean thresholds bracketing the two-asset condensation: above m1' all
/// capital goes to asset 1, below m1'' all goes to asset 2.
inline std::pair<double, double> condensation_thresholds(double m2, double D1, double D2) {
    if (!(D1 > 0.0 && D2 > 0.0)) throw std::invalid_argument("variances must be > 0");
    const double half_width = 0.5 * (D1 + D2);
    return {m2 - half_width, m2 + half_width};
}

/// Classify the two-asset optimum. Boundary ties resolve toward the
/// less-invested region (and, along m1, toward the lower-m1 side), except
/// that full investment in a single profitable asset starts exactly at
/// m_i = D_i/2.
inline PhaseRegion two_asset_phase(double m1, double m2, double D1, double D2) {
    if (!(D1 > 0.0 && D2 > 0.0)) throw std::invalid_argument("variances must be > 0");
    const bool profitable1 = m1 > -0.5 * D1;
    const bool profitable2 = m2 > -0.5 * D2;
    if (!profitable1 && !profitable2) return PhaseRegion::A;
    if (profitable1 && !profitable2) return m1 >= 0.5 * D1 ? PhaseRegion::D1 : PhaseRegion::B1;
    if (profitable2 && !profitable1) return m2 >= 0.5 * D2 ? PhaseRegion::D2 : PhaseRegion::B2;
    if (m1 / D1 + m2 / D2 <= 0.0) return PhaseRegion::C;
    const auto [low, high] = condensation_thresholds(m2, D1, D2);
    if (m1 > high) return PhaseRegion::F1;
    if (m1 <= low) return PhaseRegion::F2;
    return PhaseRegion::E;
}

/// Optimal portfolio for equal-variance assets with means sorted in
/// non-increasing order. When the budget constraint binds, assets join the
/// portfolio one by one from the top until the next fraction would be
/// nonpositive.
struct EqualVolSolution {
    std::vector<double> fractions;
    std::size_t size = 0;          // number of assets held
    std::optional<double> gamma;   // multiplier when the budget binds
    bool binding = false;
};

inline EqualVolSolution equal_vol_portfolio(const std::vector<double>& ms_sorted, double D) {
    if (!(D > 0.0)) throw std::invalid_argument("variance must be > 0");
    const std::size_t n = ms_sorted.size();
    if (n == 0) throw std::invalid_argument("need at least one asset");
    for (std::size_t i = 1; i < n; ++i)
        if (ms_sorted[i] > ms_sorted[i - 1])
            throw std::invalid_argument("means must be sorted in non-increasing order");

    EqualVolSolution out;
    out.fractions.assign(n, 0.0);
    double clipped_sum = 0.0;
    for (double m : ms_sorted) clipped_sum += std::max(0.5 + m / D, 0.0);
    if (clipped_sum <= 1.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double q = 0.5 + ms_sorted[i] / D;
            if (q > 0.0) {
                out.fractions[i] = q;
                ++out.size;
            }
        }
        return out;
    }

    // budget binds: grow the prefix while the newest fraction stays positive
    std::size_t held = 1;
    double prefix = ms_sorted[0];
    while (held < n) {
        const double next_prefix = prefix + ms_sorted[held];
        const std::size_t k = held + 1;
        if (ms_sorted[held] + D / static_cast<double>(k) >
            next_prefix / static_cast<double>(k)) {
            prefix = next_prefix;
            ++held;
        } else {
            break;
        }
    }
    const double m_count = static_cast<double>(held);
    const double gamma = D * (1.0 / m_count - 0.5) - prefix / m_count;
    for (std::size_t i = 0; i < held; ++i) out.fractions[i] = 0.5 + (ms_sorted[i] + gamma) / D;
    out.size = held;
    out.gamma = gamma;
    out.binding = true;
    return out;
}

/// Universe with a common variance and means drawn uniformly from [a, b].
struct UniformSpec {
    std::size_t n_assets = 0;
    double D = 0.0;
    double a = 0.0;
    double b = 0.0;
};

/// Condensation summary of one realization against its typical values.
/// `ipr` follows the 1/sum q^2 definition; it stays below the realized size
/// whenever the budget binds, while cash-diluted portfolios can exceed it.
struct CondensationReport {
    std::size_t realized_size = 0;  // assets held
    double typical_size = 0.0;
    double ipr = 0.0;               // 0 for an empty portfolio
    std::optional<double> gamma;    // multiplier when the budget binds
};

inline void validate(const UniformSpec& spec) {
    if (spec.n_assets < 1 || !(spec.D > 0.0) || !(spec.b > spec.a))
        throw std::invalid_argument("invalid uniform universe spec");
}

/// Typical number of held assets after replacing the random means by their
/// order-statistic averages m_bar_i = b - (b-a) i/(N+1). Three regimes: no
/// profitable assets, all profitable assets held, or the saturated value
/// sqrt(2ND/(b-a)). Real-valued; round only for reporting.
inline double typical_size_uniform(const UniformSpec& spec) {
    validate(spec);
    const double n = static_cast<double>(spec.n_assets);
    const double width = spec.b - spec.a;
    if (spec.b + 0.5 * spec.D < 0.0) return 0.0;
    const double saturated = std::sqrt(2.0 * n * spec.D / width);
    const double mean_at = spec.b - width * saturated / (n + 1.0);
    if (mean_at + 0.5 * spec.D > 0.0) return saturated;
    return n * (spec.b + 0.5 * spec.D) / width;
}

/// Nearest whole number of assets, for reports that count rather than plot.
inline std::size_t typical_size_uniform_rounded(const UniformSpec& spec) {
    return static_cast<std::size_t>(std::llround(typical_size_uniform(spec)));
}

/// Inverse participation ratio R = 1 / sum q_i^2, the effective number of
/// assets carrying the portfolio.
inline double ipr(const std::vector<double>& fractions) {
    double sum = 0.0, sum_sq = 0.0;
    for (double q : fractions) {
        sum += q;
        sum_sq += q * q;
    }
    if (!(sum > 0.0)) throw std::invalid_argument("inverse participation ratio of a zero portfolio");
    return 1.0 / sum_sq;
}

/// Typical inverse participation ratio for the uniform universe, from the
/// linearly decaying typical fractions q_bar_i = A - B i.
inline double typical_ipr(const UniformSpec& spec, double typical_size) {
    validate(spec);
    const double b_coeff = (spec.b - spec.a) / (spec.D * (static_cast<double>(spec.n_assets) + 1.0));
    const double m = typical_size;
    const double sum_sq = b_coeff * b_coeff * m * (m + 1.0) * (2.0 * m + 1.0) / 6.0;
    if (!(sum_sq > 0.0)) return 0.0;
    return 1.0 / sum_sq;
}

/// Large-portfolio simplification of the same ratio, (3/4) of the typical size.
inline double typical_ipr_large(double typical_size) { return 0.75 * typical_size; }

inline CondensationReport condensation_report(const EqualVolSolution& solution,
                                              const UniformSpec& spec) {
    CondensationReport report;
    report.realized_size = solution.size;
    report.typical_size = typical_size_uniform(spec);
    report.ipr = solution.size > 0 ? ipr(solution.fractions) : 0.0;
    report.gamma = solution.gamma;
    return report;
}

/// Monte Carlo over uniform universes: average realized portfolio size and
/// inverse participation ratio (zero portfolios contribute zero).
struct UniformMcStats {
    double mean_size = 0.0;
    double mean_ipr = 0.0;
};

inline UniformMcStats mc_uniform_condensation(const UniformSpec& spec, std::size_t repetitions,
                                              std::uint64_t seed) {
    validate(spec);
    if (repetitions == 0) throw std::invalid_argument("need at least one repetition");
    const CounterRng rng = CounterRng(seed).derive(0x554e4946ULL);
    std::vector<double> ms(spec.n_assets);
    double size_total = 0.0, ipr_total = 0.0;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        for (std::size_t i = 0; i < spec.n_assets; ++i)
            ms[i] = spec.a + (spec.b - spec.a) * rng.uniform(rep, i);
        std::sort(ms.begin(), ms.end(), std::greater<>());
        const EqualVolSolution sol = equal_vol_portfolio(ms, spec.D);
        size_total += static_cast<double>(sol.size);
        if (sol.size > 0) ipr_total += ipr(sol.fractions);
    }
    const double reps = static_cast<double>(repetitions);
    return {size_total / reps, ipr_total / reps};
}

/// Universe whose means have a Pareto tail f(m) ~ m^{-alpha-1} above m_min;
/// a fraction r of the N assets falls in the tail.
struct PowerLawSpec {
    std::size_t n_assets = 0;
    double r = 0.0;
    double m_min = 0.0;
    double alpha = 0.0;
};

/// Median of the largest of n Pareto(alpha, m_min) draws.
inline double pareto_max_median(double n, double m_min, double alpha) {
    return m_min * std::pow(n / std::numbers::ln2, 1.0 / alpha);
}

/// Median of the second largest; the constant 1.68 follows the asymptotic
/// order-statistic expansion.
inline double pareto_second_median(double n, double m_min, double alpha) {
    return m_min * std::pow(n / 1.68, 1.0 / alpha);
}

/// Numerically exact median of the second largest of n draws, for comparison
/// with the asymptotic constant.
inline double pareto_second_median_exact(double n, double m_min, double alpha) {
    auto cdf_second_largest = [&](double x) {
        const double f = 1.0 - std::pow(m_min / x, alpha);  // Pareto CDF
        return std::pow(f, n) + n * std::pow(f, n - 1.0) * (1.0 - f);
    };
    double lo = m_min * (1.0 + 1e-12), hi = m_min * 2.0;
    while (cdf_second_largest(hi) < 0.5) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf_second_largest(mid) < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Tail exponent below which the optimal portfolio typically holds a single
/// asset: the root of median_1(alpha) - median_2(alpha) = D. Returns nullopt
/// when no root exists in (0.01, 100).
inline std::optional<double> powerlaw_alpha1(std::size_t n_assets, double r, double m_min,
                                             double D, bool exact_median = false) {
    if (!(r > 0.0 && r <= 1.0) || !(m_min > 0.0) || !(D > 0.0))
        throw std::invalid_argument("invalid power-law spec");
    const double tail_count = static_cast<double>(n_assets) * r;
    if (tail_count < 2.0) throw std::invalid_argument("need at least two tail assets");
    auto gap = [&](double alpha) {
        const double second = exact_median ? pareto_second_median_exact(tail_count, m_min, alpha)
                                           : pareto_second_median(tail_count, m_min, alpha);
        return pareto_max_median(tail_count, m_min, alpha) - second - D;
    };
    double lo = 0.01, hi = 100.0;
    if (gap(lo) < 0.0 || gap(hi) > 0.0) return std::nullopt;  // gap decreases in alpha
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Empirical frequency of the single-asset condensation condition
/// m_(1) - m_(2) > D over seeded draws from the tail, with its binomial
/// standard error.
struct TrialProbability {
    double probability = 0.0;
    double std_error = 0.0;
};

inline TrialProbability mc_condensation_prob(const PowerLawSpec& spec, double D,
                                             std::size_t n_trials, std::uint64_t seed) {
    if (n_trials < 1000) throw std::invalid_argument("need >= 10^3 trials");
    if (!(spec.alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
    const auto tail_count =
        static_cast<std::size_t>(std::llround(static_cast<double>(spec.n_assets) * spec.r));
    if (tail_count < 2) throw std::invalid_argument("need at least two tail assets");
    const CounterRng rng = CounterRng(seed).derive(0x504f574cULL);
    const double inv_alpha = 1.0 / spec.alpha;
    std::size_t hits = 0;
    for (std::size_t trial = 0; trial < n_trials; ++trial) {
        double top1 = 0.0, top2 = 0.0;
        for (std::size_t k = 0; k < tail_count; ++k) {
            const double m = spec.m_min * std::pow(rng.uniform(trial, k), -inv_alpha);
            if (m > top1) {
                top2 = top1;
                top1 = m;
            } else if (m > top2) {
                top2 = m;
            }
        }
        if (top1 - top2 > D) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(n_trials);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n_trials))};
}

}  // namespace kelly

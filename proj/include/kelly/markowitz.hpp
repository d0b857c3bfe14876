#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "kelly/kelly_solver.hpp"
#include "kelly/model.hpp"

namespace kelly {

/// Return/variance ratio sums C_k = sum_j mu_j^k / sigma_j^2 that drive the
/// closed-form mean-variance results, plus the small-parameter variants
/// C~_k = sum_j (m_j + D_j/2)^k / D_j used by the growth-rate link.
struct MomentSums {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
};

namespace detail {

template <typename MuOf, typename Var>
MomentSums accumulate_sums(const AssetUniverse& universe, const std::vector<std::size_t>& subset,
                           MuOf mu_of, Var var_of) {
    MomentSums sums;
    for (std::size_t i : subset) {
        const double mu = mu_of(universe.asset(i));
        const double s2 = var_of(universe.asset(i));
        if (!(s2 > 0.0)) throw std::invalid_argument("zero-variance asset in moment sums");
        sums.c0 += 1.0 / s2;
        sums.c1 += mu / s2;
        sums.c2 += mu * mu / s2;
    }
    return sums;
}

inline std::vector<std::size_t> all_indices(const AssetUniverse& universe) {
    std::vector<std::size_t> idx(universe.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

}  // namespace detail

inline MomentSums moment_sums(const AssetUniverse& universe,
                              const std::vector<std::size_t>& subset) {
    return detail::accumulate_sums(
        universe, subset, [](const Asset& a) { return asset_moments(a).mu; },
        [](const Asset& a) { return asset_moments(a).sigma2; });
}

inline MomentSums moment_sums(const AssetUniverse& universe) {
    return moment_sums(universe, detail::all_indices(universe));
}

/// Small-parameter sums with mu ~ m + D/2 and sigma^2 ~ D.
inline MomentSums approx_moment_sums(const AssetUniverse& universe,
                                     const std::vector<std::size_t>& subset) {
    return detail::accumulate_sums(
        universe, subset, [](const Asset& a) { return a.m + 0.5 * a.D; },
        [](const Asset& a) { return a.D; });
}

inline MomentSums approx_moment_sums(const AssetUniverse& universe) {
    return approx_moment_sums(universe, detail::all_indices(universe));
}

/// Optimal fractions with a risk-free asset present: q_i = mu_P mu_i / (C2 sigma_i^2).
/// They scale linearly with the target return.
inline std::vector<double> mv_fractions(const AssetUniverse& universe, double mu_target) {
    if (!(mu_target >= 0.0)) throw std::invalid_argument("target return must be >= 0");
    const MomentSums sums = moment_sums(universe);
    if (!(sums.c2 > 0.0)) throw std::invalid_argument("C2 must be positive");
    std::vector<double> q(universe.size());
    for (std::size_t i = 0; i < universe.size(); ++i) {
        const AssetMoments mom = asset_moments(universe.asset(i));
        q[i] = mu_target * mom.mu / (sums.c2 * mom.sigma2);
    }
    return q;
}

/// Capital Market Line: sigma_P = mu_P / sqrt(C2).
inline double cml_sigma(const AssetUniverse& universe, double mu_target) {
    const MomentSums sums = moment_sums(universe);
    if (!(sums.c2 > 0.0)) throw std::invalid_argument("C2 must be positive");
    return mu_target / std::sqrt(sums.c2);
}

namespace detail {

inline double frontier_variance(const MomentSums& sums, double mu_target) {
    const double det = sums.c0 * sums.c2 - sums.c1 * sums.c1;
    if (!(det > 0.0))
        throw std::invalid_argument(
            "degenerate universe: the frontier needs two assets with distinct return/risk ratios");
    return (sums.c0 * mu_target * mu_target - 2.0 * sums.c1 * mu_target + sums.c2) / det;
}

}  // namespace detail

/// Fully-invested frontier (no risk-free asset), allowing short positions.
inline double efficient_frontier(const AssetUniverse& universe, double mu_target) {
    return std::sqrt(detail::frontier_variance(moment_sums(universe), mu_target));
}

/// Same frontier evaluated with the small-parameter sums.
inline double approx_frontier(const AssetUniverse& universe, double mu_target) {
    return std::sqrt(detail::frontier_variance(approx_moment_sums(universe), mu_target));
}

struct FrontierPoint {
    double mu_p = 0.0;
    double sigma_p = 0.0;
    std::vector<double> fractions;
};

namespace detail {

/// Minimum-variance fully-invested portfolio at a fixed target return with
/// q >= 0, by active-set iteration on the sign constraints. The equality
/// subproblem is diagonal, so the multipliers come from a 2x2 system.
inline FrontierPoint constrained_frontier_point(const AssetUniverse& universe, double mu_target) {
    const std::size_t n = universe.size();
    std::vector<double> mu(n), var(n);
    double mu_min = std::numeric_limits<double>::infinity(), mu_max = -mu_min;
    for (std::size_t i = 0; i < n; ++i) {
        const AssetMoments mom = asset_moments(universe.asset(i));
        mu[i] = mom.mu;
        var[i] = mom.sigma2;
        if (!(var[i] > 0.0)) throw std::invalid_argument("zero-variance asset");
        mu_min = std::min(mu_min, mu[i]);
        mu_max = std::max(mu_max, mu[i]);
    }
    const double slack = 1e-9 * std::max(1.0, std::abs(mu_target));
    if (mu_target < mu_min - slack || mu_target > mu_max + slack)
        throw std::invalid_argument("target return outside the attainable range");

    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), std::size_t{0});
    FrontierPoint point;
    point.mu_p = mu_target;
    point.fractions.assign(n, 0.0);
    while (true) {
        if (active.size() == 1) {
            const std::size_t i = active.front();
            if (std::abs(mu[i] - mu_target) > 1e-7 * std::max(1.0, std::abs(mu_target)))
                throw std::runtime_error("active set collapsed away from the target return");
            point.fractions[i] = 1.0;
            point.sigma_p = std::sqrt(var[i]);
            return point;
        }
        double c0 = 0.0, c1 = 0.0, c2 = 0.0;
        for (std::size_t i : active) {
            c0 += 1.0 / var[i];
            c1 += mu[i] / var[i];
            c2 += mu[i] * mu[i] / var[i];
        }
        const double det = c0 * c2 - c1 * c1;
        if (!(std::abs(det) > 1e-14 * c0 * c2))
            throw std::invalid_argument("degenerate universe: proportional assets on the frontier");
        // stationarity 2 q_i var_i + l1 + l2 mu_i = 0 plus the two constraints
        const double l1 = (-2.0 * c2 + 2.0 * mu_target * c1) / det;
        const double l2 = (-2.0 * mu_target * c0 + 2.0 * c1) / det;
        double worst_value = 0.0;
        std::size_t worst_index = n;
        for (std::size_t i : active) {
            const double qi = -(l1 + l2 * mu[i]) / (2.0 * var[i]);
            point.fractions[i] = qi;
            if (qi < worst_value) {
                worst_value = qi;
                worst_index = i;
            }
        }
        if (worst_index == n) {
            double variance = 0.0;
            for (std::size_t i : active)
                variance += point.fractions[i] * point.fractions[i] * var[i];
            point.sigma_p = std::sqrt(variance);
            return point;
        }
        point.fractions[worst_index] = 0.0;
        active.erase(std::find(active.begin(), active.end(), worst_index));
    }
}

}  // namespace detail

/// Frontier without short selling; starts at the least and ends at the most
/// profitable asset and coincides with the unconstrained frontier wherever
/// that one is already nonnegative.
inline std::vector<FrontierPoint> constrained_frontier(const AssetUniverse& universe,
                                                       const std::vector<double>& mu_grid) {
    std::vector<FrontierPoint> points;
    points.reserve(mu_grid.size());
    for (double target : mu_grid)
        points.push_back(detail::constrained_frontier_point(universe, target));
    return points;
}

struct KellyPoint {
    double mu_k = 0.0;
    double sigma_k = 0.0;
    std::vector<std::size_t> active_set;
};

/// Coordinates of the growth-optimal portfolio in the (sigma, mu) plane in
/// the small-parameter picture, restricted to its positively-held assets.
inline KellyPoint kelly_point(const AssetUniverse& universe) {
    const ConstrainedSolution solution = kelly_constrained(universe);
    if (solution.active_set.empty())
        throw std::invalid_argument("no profitable assets: the growth-optimal portfolio is empty");
    const MomentSums s = approx_moment_sums(universe, solution.active_set);
    const double det = s.c0 * s.c2 - s.c1 * s.c1;
    KellyPoint point;
    point.active_set = solution.active_set;
    point.mu_k = (det + s.c1) / s.c0;
    point.sigma_k = std::sqrt((det + 1.0) / s.c0);
    return point;
}

/// Algebraic residual of the frontier membership identity: substituting the
/// growth-optimal coordinates into the small-parameter frontier returns the
/// same variance, for any active set. A single active asset collapses the
/// frontier onto the asset itself, so the residual is zero by construction.
inline double on_frontier_residual(const AssetUniverse& universe) {
    const KellyPoint point = kelly_point(universe);
    if (point.active_set.size() < 2) return 0.0;
    const MomentSums s = approx_moment_sums(universe, point.active_set);
    const double frontier_var = detail::frontier_variance(s, point.mu_k);
    return std::abs(point.sigma_k * point.sigma_k - frontier_var);
}

}  // namespace kelly

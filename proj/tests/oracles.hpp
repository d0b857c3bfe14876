// Test-only reference implementations: exhaustive subset enumeration for the
// constrained optimizers, finite differences, and closed-form lognormal
// moments. Deliberately brute-force and independent of the library solvers.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kelly/counter_rng.hpp"
#include "kelly/model.hpp"

namespace oracles {

inline kelly::AssetUniverse make_universe(const std::vector<std::pair<double, double>>& params) {
    std::vector<kelly::Asset> assets;
    for (std::size_t i = 0; i < params.size(); ++i)
        assets.push_back({"a" + std::to_string(i + 1), params[i].first, params[i].second});
    return kelly::AssetUniverse(std::move(assets));
}

inline kelly::AssetUniverse demo_three_assets() {
    return make_universe({{0.1, 0.04}, {0.15, 0.09}, {0.2, 0.25}});
}

// E[e^{k eta}] for eta ~ N(m, D)
inline double lognormal_moment(double k, double m, double D) {
    return std::exp(k * m + 0.5 * k * k * D);
}

struct SubsetSolution {
    std::vector<double> fractions;
    std::vector<std::size_t> active_set;
    bool binding = false;
    double gamma = 0.0;
};

// Exhaustive KKT search over all active subsets for the quadratic growth
// model v~(q) = sum[(m_i + D_i/2) q_i - D_i q_i^2 / 2] on {q >= 0, sum <= 1}.
// The model is strictly concave, so exactly one candidate satisfies the
// optimality conditions.
inline SubsetSolution enumerate_constrained(const kelly::AssetUniverse& universe) {
    const std::size_t n = universe.size();
    if (n > 20) throw std::invalid_argument("enumeration oracle limited to 20 assets");

    auto outside_ok = [&](std::uint32_t mask, double gamma) {
        for (std::size_t j = 0; j < n; ++j) {
            if (mask & (1u << j)) continue;
            const kelly::Asset& a = universe.asset(j);
            if (a.m + 0.5 * a.D + gamma > 0.0) return false;
        }
        return true;
    };

    // all-cash candidate
    if (outside_ok(0, 0.0)) return {std::vector<double>(n, 0.0), {}, false, 0.0};

    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<std::size_t> subset;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) subset.push_back(i);

        // budget-slack candidate (gamma = 0)
        {
            std::vector<double> q(n, 0.0);
            bool positive = true;
            double sum = 0.0;
            for (std::size_t i : subset) {
                q[i] = 0.5 + universe.asset(i).m / universe.asset(i).D;
                positive = positive && q[i] > 0.0;
                sum += q[i];
            }
            if (positive && sum <= 1.0 && outside_ok(mask, 0.0))
                return {q, subset, false, 0.0};
        }

        // binding candidate
        {
            double half_m = 0.0, inv_d = 0.0;
            for (std::size_t i : subset) {
                half_m += 0.5 + universe.asset(i).m / universe.asset(i).D;
                inv_d += 1.0 / universe.asset(i).D;
            }
            const double gamma = (1.0 - half_m) / inv_d;
            std::vector<double> q(n, 0.0);
            bool positive = true;
            for (std::size_t i : subset) {
                q[i] = 0.5 + (universe.asset(i).m + gamma) / universe.asset(i).D;
                positive = positive && q[i] > 0.0;
            }
            if (positive && gamma <= 0.0 && outside_ok(mask, gamma))
                return {q, subset, true, gamma};
        }
    }
    throw std::logic_error("enumeration found no KKT point");
}

// Minimum-variance fully-invested nonnegative portfolio at a target return,
// by trying every support set and keeping the feasible minimum.
inline std::optional<std::vector<double>> enumerate_frontier(const kelly::AssetUniverse& universe,
                                                             double target) {
    const std::size_t n = universe.size();
    if (n > 20) throw std::invalid_argument("enumeration oracle limited to 20 assets");
    std::vector<double> mu(n), var(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto mom = kelly::asset_moments(universe.asset(i));
        mu[i] = mom.mu;
        var[i] = mom.sigma2;
    }
    std::optional<std::vector<double>> best;
    double best_variance = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<std::size_t> subset;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) subset.push_back(i);
        std::vector<double> q(n, 0.0);
        if (subset.size() == 1) {
            if (std::abs(mu[subset[0]] - target) > 1e-9) continue;
            q[subset[0]] = 1.0;
        } else {
            double c0 = 0.0, c1 = 0.0, c2 = 0.0;
            for (std::size_t i : subset) {
                c0 += 1.0 / var[i];
                c1 += mu[i] / var[i];
                c2 += mu[i] * mu[i] / var[i];
            }
            const double det = c0 * c2 - c1 * c1;
            if (!(std::abs(det) > 1e-14 * c0 * c2)) continue;
            const double l1 = (-2.0 * c2 + 2.0 * target * c1) / det;
            const double l2 = (-2.0 * target * c0 + 2.0 * c1) / det;
            bool ok = true;
            for (std::size_t i : subset) {
                q[i] = -(l1 + l2 * mu[i]) / (2.0 * var[i]);
                ok = ok && q[i] >= -1e-12;
            }
            if (!ok) continue;
        }
        double variance = 0.0;
        for (std::size_t i = 0; i < n; ++i) variance += q[i] * q[i] * var[i];
        if (variance < best_variance) {
            best_variance = variance;
            best = q;
        }
    }
    return best;
}

// central difference in one coordinate
template <typename Fn>
double fd_partial(Fn f, std::vector<double> point, std::size_t axis, double h) {
    point[axis] += h;
    const double hi = f(point);
    point[axis] -= 2.0 * h;
    const double lo = f(point);
    return (hi - lo) / (2.0 * h);
}

// random universes with moderate spreads, deterministic per seed
inline kelly::AssetUniverse random_universe(std::uint64_t seed, std::size_t n, double m_lo,
                                            double m_hi, double d_lo, double d_hi) {
    const kelly::CounterRng rng(seed);
    std::vector<std::pair<double, double>> params;
    for (std::size_t i = 0; i < n; ++i)
        params.emplace_back(m_lo + (m_hi - m_lo) * rng.uniform(i, 0),
                            d_lo + (d_hi - d_lo) * rng.uniform(i, 1));
    return make_universe(params);
}

}  // namespace oracles

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kelly/condensation.hpp"
#include "kelly/io.hpp"
#include "kelly/kelly_solver.hpp"
#include "kelly/lef.hpp"
#include "kelly/markowitz.hpp"
#include "kelly/model.hpp"

namespace kelly {

/// Three-asset demo universe used by the bundled studies.
inline AssetUniverse demo_universe() {
    return AssetUniverse({{"a1", 0.1, 0.04}, {"a2", 0.15, 0.09}, {"a3", 0.2, 0.25}});
}

namespace detail {

inline std::optional<double> interpolate(const std::vector<std::pair<double, double>>& samples,
                                         double x) {
    if (samples.size() < 2 || x < samples.front().first || x > samples.back().first)
        return std::nullopt;
    auto hi = std::lower_bound(samples.begin(), samples.end(), x,
                               [](const auto& s, double v) { return s.first < v; });
    if (hi == samples.begin()) return hi->second;
    const auto lo = hi - 1;
    if (hi == samples.end()) return lo->second;
    const double span = hi->first - lo->first;
    if (!(span > 0.0)) return lo->second;
    const double t = (x - lo->first) / span;
    return lo->second + t * (hi->second - lo->second);
}

inline std::vector<double> linspace(double lo, double hi, int points) {
    if (points < 2) return {lo};
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid[static_cast<std::size_t>(i)] =
            lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return grid;
}

}  // namespace detail

struct FrontierCsvOptions {
    double mu_min = 0.0;
    double mu_max = 0.45;
    int points = 181;
    bool with_constrained = false;
    bool with_lef = false;
    bool with_kelly_point = false;
    int lef_points = 33;
    ExpectationMethod method = ExpectationMethod::quadrature();
};

/// Frontier table: mu_P, sigma on the frontier and on the market line, and
/// optionally the no-short frontier, the interpolated log-wealth frontier
/// and the growth-optimal point (constant per row).
inline void write_frontier_csv(const AssetUniverse& universe, std::ostream& out,
                               const FrontierCsvOptions& opts = {}) {
    double asset_mu_min = std::numeric_limits<double>::infinity(), asset_mu_max = -asset_mu_min;
    for (const Asset& a : universe.assets()) {
        const double mu = asset_moments(a).mu;
        asset_mu_min = std::min(asset_mu_min, mu);
        asset_mu_max = std::max(asset_mu_max, mu);
    }

    std::vector<std::pair<double, double>> lef_sigma_by_mu;
    if (opts.with_lef) {
        double v_min = universe.asset(0).m;
        for (const Asset& a : universe.assets()) v_min = std::min(v_min, a.m);
        const double v_max = detail::max_growth_fully_invested(universe, opts.method).growth;
        const double pad = 0.01 * (v_max - v_min);
        for (double v : detail::linspace(v_min + pad, v_max - pad, opts.lef_points)) {
            const LefSolution sol =
                detail::lef_point_in_range(universe, v, opts.method, false, v_min, v_max);
            if (!sol.converged) continue;
            double mu = 0.0, var = 0.0;
            for (std::size_t i = 0; i < universe.size(); ++i) {
                const AssetMoments mom = asset_moments(universe.asset(i));
                mu += sol.fractions[i] * mom.mu;
                var += sol.fractions[i] * sol.fractions[i] * mom.sigma2;
            }
            lef_sigma_by_mu.emplace_back(mu, std::sqrt(var));
        }
        std::sort(lef_sigma_by_mu.begin(), lef_sigma_by_mu.end());
    }

    std::optional<KellyPoint> kp;
    if (opts.with_kelly_point) kp = kelly_point(universe);

    CsvWriter csv(out);
    std::vector<std::string> columns{"mu_P", "sigma_EF", "sigma_CML"};
    if (opts.with_constrained) columns.push_back("sigma_constrained");
    if (opts.with_lef) columns.push_back("sigma_LEF");
    if (kp) {
        columns.push_back("mu_K");
        columns.push_back("sigma_K");
    }
    csv.header(columns);

    for (double mu : detail::linspace(opts.mu_min, opts.mu_max, opts.points)) {
        std::vector<std::string> cells;
        cells.push_back(format_number(mu));
        cells.push_back(format_number(efficient_frontier(universe, mu)));
        cells.push_back(format_number(cml_sigma(universe, mu)));
        if (opts.with_constrained) {
            if (mu >= asset_mu_min && mu <= asset_mu_max)
                cells.push_back(
                    format_number(detail::constrained_frontier_point(universe, mu).sigma_p));
            else
                cells.emplace_back();
        }
        if (opts.with_lef) {
            if (auto sigma = detail::interpolate(lef_sigma_by_mu, mu))
                cells.push_back(format_number(*sigma));
            else
                cells.emplace_back();
        }
        if (kp) {
            cells.push_back(format_number(kp->mu_k));
            cells.push_back(format_number(kp->sigma_k));
        }
        csv.write_row(cells);
    }
}

/// Single risky asset: closed-form fraction against the numerical optimum
/// over a mean sweep, one block per variance.
inline void write_single_asset_sweep_csv(std::ostream& out,
                                         const std::vector<double>& variances = {0.01, 0.04, 0.25,
                                                                                 1.0},
                                         int points = 81) {
    CsvWriter csv(out);
    csv.header({"D", "m", "q_closed", "q_numerical"});
    for (double d : variances) {
        for (double m : detail::linspace(-d, d, points)) {
            const AssetUniverse universe({{"asset", m, d}});
            SolverOptions opts;
            const NumericalSolution numeric = kelly_numerical(universe, opts);
            csv.row(d, m, kelly_fraction_single(m, d), numeric.fractions[0]);
        }
    }
}

/// Two-asset phase labels on a cell-centered grid (grid nodes avoid the
/// analytic boundaries, keeping the labels stable under rounding).
inline void write_phase_grid_csv(std::ostream& out, double d1 = 0.1, double d2 = 0.2,
                                 double lo = -0.3, double hi = 0.4, int cells = 50) {
    CsvWriter csv(out);
    csv.header({"m1", "m2", "region"});
    const double step = (hi - lo) / static_cast<double>(cells);
    for (int i = 0; i < cells; ++i) {
        const double m1 = lo + (static_cast<double>(i) + 0.5) * step;
        for (int j = 0; j < cells; ++j) {
            const double m2 = lo + (static_cast<double>(j) + 0.5) * step;
            csv.row(m1, m2, to_string(two_asset_phase(m1, m2, d1, d2)));
        }
    }
}

/// Uniform-mean condensation study: typical portfolio size and inverse
/// participation ratio, analytic against seeded Monte Carlo, as the support
/// half-width L grows. The portfolio return column uses the typical means.
inline void write_uniform_study_csv(std::ostream& out, std::uint64_t seed,
                                    std::size_t n_assets = 1000, double d = 0.01,
                                    double center = -0.05,
                                    const std::vector<double>& l_grid = {},
                                    std::size_t repetitions = 10000) {
    std::vector<double> grid = l_grid;
    if (grid.empty()) grid = detail::linspace(0.01, 0.25, 25);
    CsvWriter csv(out);
    csv.header({"L", "M_T_analytic", "M_T_mc", "ipr_analytic", "ipr_mc", "mu_P_pct"});
    for (double l : grid) {
        const UniformSpec spec{n_assets, d, center - l, center + l};
        const double m_t = typical_size_uniform(spec);
        const UniformMcStats mc = mc_uniform_condensation(spec, repetitions, seed);
        // portfolio return of the typical realization, in percent
        std::vector<double> means(n_assets);
        for (std::size_t i = 0; i < n_assets; ++i)
            means[i] = spec.b - (spec.b - spec.a) * static_cast<double>(i + 1) /
                                   (static_cast<double>(n_assets) + 1.0);
        const EqualVolSolution typical = equal_vol_portfolio(means, d);
        double mu_p = 0.0;
        for (std::size_t i = 0; i < typical.size; ++i)
            mu_p += typical.fractions[i] * std::expm1(means[i] + 0.5 * d);
        csv.row(l, m_t, mc.mean_size, typical_ipr_large(m_t), mc.mean_ipr, 100.0 * mu_p);
    }
}

/// Monte Carlo root of P(m_(1) - m_(2) > D) = 1/2 in the tail exponent.
/// Every probability shares the seed, so the bisection sees a monotone
/// empirical curve.
inline std::optional<double> powerlaw_alpha1_mc(std::size_t n_assets, double r, double m_min,
                                                double D, std::size_t n_trials,
                                                std::uint64_t seed) {
    auto probability = [&](double alpha) {
        const PowerLawSpec spec{n_assets, r, m_min, alpha};
        return mc_condensation_prob(spec, D, n_trials, seed).probability;
    };
    double lo = 0.05, hi = 20.0;  // probability decreases in alpha
    if (probability(lo) < 0.5 || probability(hi) > 0.5) return std::nullopt;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (probability(mid) > 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Power-law condensation study: the single-asset threshold exponent from
/// the order-statistic medians against the Monte Carlo root.
inline void write_powerlaw_study_csv(std::ostream& out, std::uint64_t seed,
                                     std::size_t n_assets = 1000, double r = 0.1,
                                     double m_min = 0.1, const std::vector<double>& d_grid = {},
                                     std::size_t n_trials = 10000) {
    std::vector<double> grid = d_grid;
    if (grid.empty()) grid = detail::linspace(0.2, 2.0, 10);
    CsvWriter csv(out);
    csv.header({"D", "alpha1_median", "alpha1_mc"});
    for (double d : grid) {
        const auto analytic = powerlaw_alpha1(n_assets, r, m_min, d);
        const auto mc = powerlaw_alpha1_mc(n_assets, r, m_min, d, n_trials, seed);
        csv.row(d, analytic ? *analytic : std::numeric_limits<double>::quiet_NaN(),
                mc ? *mc : std::numeric_limits<double>::quiet_NaN());
    }
}

/// Log-wealth frontier table for a universe, one row per target growth.
inline void write_lef_csv(const AssetUniverse& universe, std::ostream& out, int points = 25,
                          const ExpectationMethod& method = ExpectationMethod::quadrature(),
                          bool no_short = false) {
    double v_min = universe.asset(0).m;
    for (const Asset& a : universe.assets()) v_min = std::min(v_min, a.m);
    const double v_max = detail::max_growth_fully_invested(universe, method).growth;
    const double pad = 0.01 * (v_max - v_min);

    CsvWriter csv(out);
    std::vector<std::string> columns{"v_P", "mu_P", "sigma_P"};
    for (std::size_t i = 0; i < universe.size(); ++i)
        columns.push_back("q_" + std::to_string(i + 1));
    columns.insert(columns.end(), {"gamma1", "gamma2", "flag_nonphysical"});
    csv.header(columns);

    for (const LefFrontierPoint& point :
         lef_frontier(universe, detail::linspace(v_min + pad, v_max - pad, points), method,
                      no_short)) {
        std::vector<std::string> cells{format_number(point.v_p), format_number(point.mu_p),
                                       format_number(point.sigma_p)};
        for (double q : point.solution.fractions) cells.push_back(format_number(q));
        cells.push_back(format_number(point.solution.gamma1));
        cells.push_back(format_number(point.solution.gamma2));
        cells.push_back(point.solution.nonphysical ? "1" : "0");
        csv.write_row(cells);
    }
}

struct FigureOptions {
    std::uint64_t seed = 0;
    std::size_t repetitions = 10000;  // uniform study
    std::size_t n_trials = 10000;     // power-law study
    ExpectationMethod method = ExpectationMethod::quadrature();
};

/// Emit the dataset behind one of the bundled studies (1-7).
inline void write_figure_csv(int figure_id, std::ostream& out, const FigureOptions& opts = {}) {
    switch (figure_id) {
        case 1: {
            FrontierCsvOptions fopts;
            fopts.method = opts.method;
            write_frontier_csv(demo_universe(), out, fopts);
            return;
        }
        case 2:
            write_single_asset_sweep_csv(out);
            return;
        case 3: {
            FrontierCsvOptions fopts;
            fopts.with_constrained = true;
            fopts.with_kelly_point = true;
            fopts.method = opts.method;
            write_frontier_csv(demo_universe(), out, fopts);
            return;
        }
        case 4:
            write_phase_grid_csv(out);
            return;
        case 5:
            write_uniform_study_csv(out, opts.seed, 1000, 0.01, -0.05, {}, opts.repetitions);
            return;
        case 6:
            write_powerlaw_study_csv(out, opts.seed, 1000, 0.1, 0.1, {}, opts.n_trials);
            return;
        case 7: {
            FrontierCsvOptions fopts;
            fopts.with_constrained = true;
            fopts.with_lef = true;
            fopts.with_kelly_point = true;
            fopts.method = opts.method;
            write_frontier_csv(demo_universe(), out, fopts);
            return;
        }
        default:
            throw ConfigError("figure id must be in 1..7");
    }
}

}  // namespace kelly

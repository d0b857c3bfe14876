#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "kelly/expectation.hpp"
#include "kelly/kelly_solver.hpp"
#include "kelly/markowitz.hpp"
#include "kelly/model.hpp"

namespace kelly {

/// A point of the log-wealth frontier: fractions minimizing Var(ln W1) at a
/// fixed expected log-growth, fully invested. By default fractions may go
/// negative (mirroring the unconstrained stationarity conditions); such
/// portfolios leave a Gaussian mass where W1 <= 0, which is excluded from
/// the integrals and reported. Points with truncated mass above 1e-8 are
/// flagged non-physical.
struct LefSolution {
    std::vector<double> fractions;
    double v_target = 0.0;
    double v_achieved = 0.0;
    double var_log = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double truncated_mass = 0.0;
    double residual = 0.0;
    bool nonphysical = false;
    bool converged = false;
    bool parameters_large = false;  // some m or D above 0.3; the
                                    // small-parameter system is a stretch there
    int iterations = 0;
};

inline constexpr double kNonPhysicalMass = 1e-8;

namespace detail {

/// Growth-maximizing fully-invested portfolio; the upper end of the
/// attainable log-growth range.
inline NumericalSolution max_growth_fully_invested(const AssetUniverse& universe,
                                                   const ExpectationMethod& method) {
    SolverOptions opts;
    opts.method = method;
    opts.tolerance = 1e-10;
    return maximize_growth(universe, opts, true);
}

/// Initial guess: fully-invested small-parameter frontier fractions whose
/// approximate growth matches the target.
inline Eigen::VectorXd lef_initial_guess(const AssetUniverse& universe, double v_target) {
    const auto n = static_cast<Eigen::Index>(universe.size());
    const MomentSums s = approx_moment_sums(universe);
    const double det = s.c0 * s.c2 - s.c1 * s.c1;
    Eigen::VectorXd q(n);
    if (n == 1 || !(std::abs(det) > 1e-14 * std::max(1.0, s.c0 * s.c2))) {
        q.setConstant(1.0 / static_cast<double>(n));
        return q;
    }
    const double l1 = (-2.0 * s.c2 + 2.0 * v_target * s.c1) / det;
    const double l2 = (-2.0 * v_target * s.c0 + 2.0 * s.c1) / det;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Asset& a = universe.asset(static_cast<std::size_t>(i));
        q[i] = -(l1 + l2 * (a.m + 0.5 * a.D)) / (2.0 * a.D);
    }
    return q;
}

struct LefNewtonResult {
    Eigen::VectorXd fractions;
    double gamma1 = 0.0, gamma2 = 0.0;
    double residual = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Damped Newton iteration on the stationarity system of the two-constraint
/// minimization of E[(ln W1)^2]: for every free asset
///   E[2 ln W1 R_i / W1] + g1 E[R_i / W1] + g2 = 0,
/// with E[ln W1] = v_target and sum q = 1. Assets in `fixed_zero` are pinned
/// at q = 0 and excluded from the stationarity rows.
inline LefNewtonResult lef_newton(const AssetUniverse& universe, double v_target,
                                  const ExpectationMethod& method, Eigen::VectorXd q,
                                  const std::vector<bool>& fixed_zero, int max_iterations) {
    const auto n = static_cast<Eigen::Index>(universe.size());
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!fixed_zero[static_cast<std::size_t>(i)]) free_idx.push_back(i);
    const auto k = static_cast<Eigen::Index>(free_idx.size());
    if (k == 0) throw std::invalid_argument("no free assets left");
    for (Eigen::Index i = 0; i < n; ++i)
        if (fixed_zero[static_cast<std::size_t>(i)]) q[i] = 0.0;

    double g1 = 0.0, g2 = 0.0;
    LefNewtonResult out;

    auto residual_vector = [&](const detail::LogWealthMoments& mom, const Eigen::VectorXd& point)
        -> Eigen::VectorXd {
        Eigen::VectorXd f(k + 2);
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index i = free_idx[static_cast<std::size_t>(a)];
            f[a] = mom.grad_v2[i] + g1 * mom.grad_v[i] + g2;
        }
        f[k] = mom.v - v_target;
        double sum = 0.0;
        for (Eigen::Index a = 0; a < k; ++a) sum += point[free_idx[static_cast<std::size_t>(a)]];
        f[k + 1] = sum - 1.0;
        return f;
    };

    auto moments = log_wealth_moments(universe, q, method, true);
    Eigen::VectorXd f = residual_vector(moments, q);
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        out.residual = f.lpNorm<Eigen::Infinity>();
        if (out.residual <= 1e-10) {
            out.converged = true;
            break;
        }
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(k + 2, k + 2);
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index i = free_idx[static_cast<std::size_t>(a)];
            for (Eigen::Index b = 0; b < k; ++b) {
                const Eigen::Index j = free_idx[static_cast<std::size_t>(b)];
                // d(grad_v2)_i/dq_j = 2 E[(1 - ln W) R_i R_j / W^2],
                // d(grad_v)_i/dq_j = -E[R_i R_j / W^2]
                jac(a, b) = 2.0 * (moments.rr_w2(i, j) - moments.rr_w2_log(i, j)) -
                            g1 * moments.rr_w2(i, j);
            }
            jac(a, k) = moments.grad_v[i];
            jac(a, k + 1) = 1.0;
            jac(k, a) = moments.grad_v[i];
            jac(k + 1, a) = 1.0;
        }
        // minimal-norm least-squares step: the constraint gradients may be
        // parallel at symmetric points or at the growth-maximal endpoint,
        // where the KKT matrix is rank deficient but consistent
        const Eigen::VectorXd delta =
            jac.completeOrthogonalDecomposition().solve(-f);
        if (!delta.allFinite()) break;

        double alpha = 1.0;
        bool accepted = false;
        const double f_norm = f.norm();
        while (alpha > 1e-10) {
            Eigen::VectorXd q_trial = q;
            for (Eigen::Index a = 0; a < k; ++a)
                q_trial[free_idx[static_cast<std::size_t>(a)]] += alpha * delta[a];
            const double g1_trial = g1 + alpha * delta[k];
            const double g2_trial = g2 + alpha * delta[k + 1];
            auto trial_moments = log_wealth_moments(universe, q_trial, method, true);
            const double saved_g1 = g1, saved_g2 = g2;
            g1 = g1_trial;
            g2 = g2_trial;
            Eigen::VectorXd f_trial = residual_vector(trial_moments, q_trial);
            if (f_trial.norm() < (1.0 - 1e-4 * alpha) * f_norm) {
                q = q_trial;
                moments = std::move(trial_moments);
                f = std::move(f_trial);
                accepted = true;
                break;
            }
            g1 = saved_g1;
            g2 = saved_g2;
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    out.fractions = q;
    out.gamma1 = g1;
    out.gamma2 = g2;
    out.iterations = iter;
    return out;
}

}  // namespace detail

namespace detail {

inline LefSolution lef_point_in_range(const AssetUniverse& universe, double v_target,
                                      const ExpectationMethod& method, bool no_short,
                                      double v_min, double v_max) {
    const std::size_t n = universe.size();
    const double slack = 1e-9 * std::max(1.0, std::abs(v_target));
    if (v_target < v_min - slack || v_target > v_max + slack)
        throw std::invalid_argument("target log-growth outside the attainable range");

    LefSolution out;
    out.v_target = v_target;

    if (n == 1) {  // forced q = 1; only the multipliers need bookkeeping
        const Eigen::VectorXd q = Eigen::VectorXd::Ones(1);
        auto mom = detail::log_wealth_moments(universe, q, method, false);
        out.fractions = {1.0};
        out.v_achieved = mom.v;
        out.var_log = mom.v2 - mom.v * mom.v;
        out.gamma1 = 0.0;
        out.gamma2 = -mom.grad_v2[0];
        out.converged = std::abs(mom.v - v_target) <= 1e-8;
        if (!out.converged) throw std::invalid_argument("single-asset growth is fixed at m");
        return out;
    }

    std::vector<bool> fixed_zero(n, false);
    Eigen::VectorXd guess = detail::lef_initial_guess(universe, v_target);
    detail::LefNewtonResult newton;
    for (int round = 0; round < static_cast<int>(n) + 2; ++round) {
        newton = detail::lef_newton(universe, v_target, method, guess, fixed_zero, 80);
        if (!no_short) break;
        // drop the most negative fraction, or re-admit a pinned asset whose
        // stationarity multiplier turned negative
        Eigen::Index worst = -1;
        double worst_value = -1e-12;
        for (Eigen::Index i = 0; i < newton.fractions.size(); ++i)
            if (!fixed_zero[static_cast<std::size_t>(i)] && newton.fractions[i] < worst_value) {
                worst_value = newton.fractions[i];
                worst = i;
            }
        if (worst >= 0) {
            fixed_zero[static_cast<std::size_t>(worst)] = true;
            guess = newton.fractions.cwiseMax(0.0);
            const double total = guess.sum();
            if (total > 0) guess /= total;
            continue;
        }
        auto mom = detail::log_wealth_moments(universe, newton.fractions, method, false);
        Eigen::Index violator = -1;
        double violation = 1e-8;
        for (Eigen::Index i = 0; i < newton.fractions.size(); ++i) {
            if (!fixed_zero[static_cast<std::size_t>(i)]) continue;
            const double s = mom.grad_v2[i] + newton.gamma1 * mom.grad_v[i] + newton.gamma2;
            if (-s > violation) {  // multiplier of q_i >= 0 must be nonnegative
                violation = -s;
                violator = i;
            }
        }
        if (violator < 0) break;
        fixed_zero[static_cast<std::size_t>(violator)] = false;
        guess = newton.fractions;
    }

    auto mom = detail::log_wealth_moments(universe, newton.fractions, method, false);
    out.fractions.assign(newton.fractions.data(), newton.fractions.data() + newton.fractions.size());
    out.v_achieved = mom.v;
    out.var_log = mom.v2 - mom.v * mom.v;
    out.gamma1 = newton.gamma1;
    out.gamma2 = newton.gamma2;
    out.truncated_mass = mom.truncation_mass;
    out.nonphysical = mom.truncation_mass > kNonPhysicalMass;
    out.residual = newton.residual;
    out.converged = newton.converged && std::abs(mom.v - v_target) <= 1e-8;
    out.iterations = newton.iterations;
    return out;
}

}  // namespace detail

/// Direct frontier point: minimizes E[(ln W1)^2] - v^2 subject to full
/// investment and E[ln W1] = v_target. With no_short the sign constraints
/// are enforced by an outer active-set loop on the stationarity system.
inline LefSolution lef_point(const AssetUniverse& universe, double v_target,
                             const ExpectationMethod& method = ExpectationMethod::quadrature(),
                             bool no_short = false) {
    require_risky(universe);
    double v_min = universe.asset(0).m;
    for (std::size_t i = 1; i < universe.size(); ++i) v_min = std::min(v_min, universe.asset(i).m);
    const double v_max = detail::max_growth_fully_invested(universe, method).growth;
    return detail::lef_point_in_range(universe, v_target, method, no_short, v_min, v_max);
}

/// Small-parameter frontier point: solves the N+2 polynomial system
///   2 q_i D_i + 2 (m_i + D_i/2) sum_{j != i} q_j (m_j + D_j/2)
///     + g1 [m_i + (D_i/2)(1 - 2 q_i)] + g2 = 0,
///   sum q_i (m_i + D_i/2) = v_target,  sum q_i = 1
/// by damped Newton. Meant for m, D << 1; warns through `converged` only,
/// the caller sees the residual either way.
inline LefSolution lef_approx_system(const AssetUniverse& universe, double v_target,
                                     int max_iterations = 200) {
    require_risky(universe);
    const auto n = static_cast<Eigen::Index>(universe.size());
    LefSolution out;
    out.v_target = v_target;

    Eigen::VectorXd mu_tilde(n), d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Asset& a = universe.asset(static_cast<std::size_t>(i));
        mu_tilde[i] = a.m + 0.5 * a.D;
        d[i] = a.D;
        if (std::abs(a.m) > 0.3 || a.D > 0.3) out.parameters_large = true;
    }

    if (n == 1) {
        out.fractions = {1.0};
        out.v_achieved = mu_tilde[0];
        out.var_log = d[0];
        out.gamma1 = 0.0;
        out.gamma2 = -2.0 * d[0];  // stationarity with g1 = 0
        out.converged = std::abs(v_target - mu_tilde[0]) <= 1e-8;
        return out;
    }

    Eigen::VectorXd x(n + 2);
    x.head(n) = detail::lef_initial_guess(universe, v_target);
    x[n] = 0.0;
    x[n + 1] = 0.0;

    auto system = [&](const Eigen::VectorXd& point) -> Eigen::VectorXd {
        const auto q = point.head(n);
        const double g1 = point[n], g2 = point[n + 1];
        const double s = q.dot(mu_tilde);
        Eigen::VectorXd f(n + 2);
        for (Eigen::Index i = 0; i < n; ++i)
            f[i] = 2.0 * q[i] * d[i] + 2.0 * mu_tilde[i] * (s - q[i] * mu_tilde[i]) +
                   g1 * (universe.asset(static_cast<std::size_t>(i)).m +
                         0.5 * d[i] * (1.0 - 2.0 * q[i])) +
                   g2;
        f[n] = s - v_target;
        f[n + 1] = q.sum() - 1.0;
        return f;
    };

    Eigen::VectorXd f = system(x);
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        out.residual = f.lpNorm<Eigen::Infinity>();
        if (out.residual <= 1e-12) {
            out.converged = true;
            break;
        }
        const auto q = x.head(n);
        const double g1 = x[n];
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n + 2, n + 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j)
                    jac(i, j) = 2.0 * d[i] - g1 * d[i];
                else
                    jac(i, j) = 2.0 * mu_tilde[i] * mu_tilde[j];
            }
            jac(i, n) = universe.asset(static_cast<std::size_t>(i)).m +
                        0.5 * d[i] * (1.0 - 2.0 * q[i]);
            jac(i, n + 1) = 1.0;
            jac(n, i) = mu_tilde[i];
            jac(n + 1, i) = 1.0;
        }
        const Eigen::VectorXd delta = jac.completeOrthogonalDecomposition().solve(-f);
        if (!delta.allFinite()) break;  // identical assets make the system rank deficient
        double alpha = 1.0;
        bool accepted = false;
        while (alpha > 1e-12) {
            const Eigen::VectorXd trial = x + alpha * delta;
            const Eigen::VectorXd f_trial = system(trial);
            if (f_trial.norm() < (1.0 - 1e-4 * alpha) * f.norm()) {
                x = trial;
                f = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }

    out.fractions.assign(x.data(), x.data() + n);
    out.gamma1 = x[n];
    out.gamma2 = x[n + 1];
    out.v_achieved = x.head(n).dot(mu_tilde);
    double var = 0.0;  // small-parameter variance of ln W1
    for (Eigen::Index i = 0; i < n; ++i) var += x[i] * x[i] * d[i];
    out.var_log = var;
    out.iterations = iter;
    return out;
}

struct LefFrontierPoint {
    double v_p = 0.0;
    double mu_p = 0.0;     // exact lognormal portfolio return
    double sigma_p = 0.0;  // exact lognormal portfolio deviation
    LefSolution solution;
};

/// Frontier over a grid of target growths, mapped into the (sigma, mu)
/// plane with the exact lognormal moments of each portfolio.
inline std::vector<LefFrontierPoint> lef_frontier(
    const AssetUniverse& universe, const std::vector<double>& v_grid,
    const ExpectationMethod& method = ExpectationMethod::quadrature(), bool no_short = false) {
    require_risky(universe);
    double v_min = universe.asset(0).m;
    for (std::size_t i = 1; i < universe.size(); ++i) v_min = std::min(v_min, universe.asset(i).m);
    const double v_max = detail::max_growth_fully_invested(universe, method).growth;
    std::vector<LefFrontierPoint> points;
    points.reserve(v_grid.size());
    for (double v_target : v_grid) {
        LefFrontierPoint point;
        point.v_p = v_target;
        point.solution = detail::lef_point_in_range(universe, v_target, method, no_short, v_min, v_max);
        double mu = 0.0, var = 0.0;
        for (std::size_t i = 0; i < universe.size(); ++i) {
            const AssetMoments mom = asset_moments(universe.asset(i));
            mu += point.solution.fractions[i] * mom.mu;
            var += point.solution.fractions[i] * point.solution.fractions[i] * mom.sigma2;
        }
        point.mu_p = mu;
        point.sigma_p = std::sqrt(var);
        points.push_back(std::move(point));
    }
    return points;
}

}  // namespace kelly

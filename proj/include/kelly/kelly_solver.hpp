#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kelly/expectation.hpp"
#include "kelly/model.hpp"

namespace kelly {

/// Mean thresholds at which a single risky asset enters the portfolio
/// (m > -D/2) and absorbs all capital (m > D/2). Exact, not approximations.
inline std::pair<double, double> profitability_thresholds(double D) {
    if (!(D >= 0.0)) throw std::invalid_argument("variance must be >= 0");
    return {-0.5 * D, 0.5 * D};
}

/// Closed-form optimal fraction for one risky asset, clamped to [0, 1].
/// For D = 0 the asset is a duplicate of cash; the documented tie-break
/// invests everything iff m > 0.
inline double kelly_fraction_single(double m, double D) {
    if (D <= 0.0) return m > 0.0 ? 1.0 : 0.0;
    return std::clamp(0.5 + m / D, 0.0, 1.0);
}

/// First-order correction to the single-asset closed form; vanishes at
/// m = 0 and at m = +-D/2 where the closed form is exact.
inline double first_order_correction(double m, double D) {
    if (!(D > 0.0)) throw std::invalid_argument("variance must be > 0");
    return m * (4.0 * m * m - D * D) / (4.0 * D * D);
}

inline void require_risky(const AssetUniverse& universe) {
    for (std::size_t i = 0; i < universe.size(); ++i)
        if (!(universe.asset(i).D > 0.0))
            throw std::invalid_argument(
                "asset with D = 0 duplicates the risk-free asset; remove it before optimizing");
}

/// Raw per-asset fractions 1/2 + m_i/D_i, unclipped; the caller inspects
/// signs and the sum.
inline std::vector<double> kelly_unconstrained(const AssetUniverse& universe) {
    require_risky(universe);
    std::vector<double> q(universe.size());
    for (std::size_t i = 0; i < universe.size(); ++i)
        q[i] = 0.5 + universe.asset(i).m / universe.asset(i).D;
    return q;
}

struct ConstrainedSolution {
    std::vector<double> fractions;
    std::vector<std::size_t> active_set;  // indices with q > 0
    std::optional<double> gamma;          // multiplier when sum q = 1 binds
    bool binding = false;
};

/// Closed-form constrained solution. Negative raw fractions are clipped; if
/// the clipped sum exceeds 1 the budget constraint is imposed through the
/// multiplier and assets are eliminated one at a time (most negative first,
/// a fraction of exactly zero also drops out) until all remaining fractions
/// are positive.
inline ConstrainedSolution kelly_constrained(const AssetUniverse& universe) {
    require_risky(universe);
    const std::size_t n = universe.size();
    std::vector<double> raw = kelly_unconstrained(universe);

    ConstrainedSolution out;
    out.fractions.assign(n, 0.0);

    double clipped_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) clipped_sum += std::max(raw[i], 0.0);
    if (clipped_sum <= 1.0) {
        for (std::size_t i = 0; i < n; ++i) {
            if (raw[i] > 0.0) {
                out.fractions[i] = raw[i];
                out.active_set.push_back(i);
            }
        }
        return out;
    }

    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), std::size_t{0});
    while (true) {
        if (active.empty())
            throw std::logic_error("elimination emptied the active set while sum q = 1 binds");
        double sum_half_m = 0.0, sum_inv_d = 0.0;
        for (std::size_t i : active) {
            sum_half_m += raw[i];
            sum_inv_d += 1.0 / universe.asset(i).D;
        }
        const double gamma = (1.0 - sum_half_m) / sum_inv_d;
        std::size_t worst = active.front();
        double worst_q = std::numeric_limits<double>::infinity();
        std::vector<double> q_active(active.size());
        for (std::size_t k = 0; k < active.size(); ++k) {
            const std::size_t i = active[k];
            q_active[k] = raw[i] + gamma / universe.asset(i).D;
            // ties drop the later index, keeping the lexicographically
            // smallest active set for degenerate universes
            if (q_active[k] <= worst_q) {
                worst_q = q_active[k];
                worst = i;
            }
        }
        if (worst_q > 0.0) {
            for (std::size_t k = 0; k < active.size(); ++k) out.fractions[active[k]] = q_active[k];
            out.active_set = active;
            std::sort(out.active_set.begin(), out.active_set.end());
            out.gamma = gamma;
            out.binding = true;
            return out;
        }
        active.erase(std::find(active.begin(), active.end(), worst));
    }
}

/// Euclidean projection onto the feasible set {q >= 0, sum q <= 1}. When the
/// nonnegative part already fits the budget it is the answer; otherwise the
/// projection lands on the simplex and is found by the sorting construction.
inline Eigen::VectorXd project_to_feasible(const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x.cwiseMax(0.0);
    if (y.sum() <= 1.0) return y;
    std::vector<double> u(x.data(), x.data() + x.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double running = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        running += u[k];
        const double candidate = (running - 1.0) / static_cast<double>(k + 1);
        if (u[k] - candidate > 0.0) theta = candidate;
    }
    return (x.array() - theta).cwiseMax(0.0);
}

inline std::vector<double> project_to_feasible(const std::vector<double>& x) {
    const Eigen::VectorXd p = project_to_feasible(
        Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
    return {p.data(), p.data() + p.size()};
}

struct SolverOptions {
    double tolerance = 1e-10;  // bound on the projected-gradient residual
    int max_iterations = 300;
    ExpectationMethod method = ExpectationMethod::quadrature();
};

struct NumericalSolution {
    std::vector<double> fractions;
    double growth = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// ln W1 is concave in q, so the maximum over {q >= 0, sum q <= 1} is unique
// and an active-set Newton method converges globally once projected-gradient
// steps have brought the iterate near the right face.
inline NumericalSolution maximize_growth(const AssetUniverse& universe, const SolverOptions& opts,
                                         bool force_full_investment) {
    const Eigen::Index n = static_cast<Eigen::Index>(universe.size());
    auto project = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        if (!force_full_investment) return project_to_feasible(x);
        // projection onto the simplex {q >= 0, sum q = 1}
        std::vector<double> u(x.data(), x.data() + x.size());
        std::sort(u.begin(), u.end(), std::greater<>());
        double running = 0.0, theta = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            running += u[k];
            const double candidate = (running - 1.0) / static_cast<double>(k + 1);
            if (u[k] - candidate > 0.0) theta = candidate;
        }
        return (x.array() - theta).cwiseMax(0.0);
    };

    // warm start from the closed-form solution
    Eigen::VectorXd q(n);
    {
        const ConstrainedSolution warm = kelly_constrained(universe);
        for (Eigen::Index i = 0; i < n; ++i) q[i] = warm.fractions[static_cast<std::size_t>(i)];
        q = project(q);
    }

    auto evaluate = [&](const Eigen::VectorXd& point, bool hessian) {
        return log_wealth_moments(universe, point, opts.method, hessian);
    };

    NumericalSolution result;
    auto moments = evaluate(q, false);
    int iter = 0;

    // phase 1: projected gradient ascent with backtracking, to settle the face
    double step = 1.0;
    for (; iter < opts.max_iterations; ++iter) {
        const Eigen::VectorXd g = moments.grad_v;
        const double residual = (q - project(q + g)).lpNorm<Eigen::Infinity>();
        if (residual <= std::max(opts.tolerance, 1e-7)) break;
        step = std::min(step * 4.0, 1e3);
        bool moved = false;
        while (step > 1e-14) {
            const Eigen::VectorXd trial = project(q + step * g);
            const auto trial_moments = evaluate(trial, false);
            const double predicted = g.dot(trial - q);
            if (trial_moments.v >= moments.v + 1e-4 * predicted) {
                q = trial;
                moments = trial_moments;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }

    // phase 2: Newton polish on the identified face
    const double activity_tol = 1e-8;
    for (; iter < opts.max_iterations; ++iter) {
        moments = evaluate(q, true);
        const Eigen::VectorXd g = moments.grad_v;
        const double residual = (q - project(q + g)).lpNorm<Eigen::Infinity>();
        if (residual <= opts.tolerance) {
            result.converged = true;
            break;
        }

        const Eigen::VectorXd proposal = project(q + g);
        std::vector<Eigen::Index> active;
        for (Eigen::Index i = 0; i < n; ++i)
            if (proposal[i] > activity_tol || q[i] > activity_tol) active.push_back(i);
        if (active.empty()) {  // all-cash optimum
            q.setZero();
            continue;
        }
        const bool binding = force_full_investment || proposal.sum() >= 1.0 - 1e-12;
        const auto k = static_cast<Eigen::Index>(active.size());

        Eigen::VectorXd g_a(k);
        Eigen::MatrixXd hess(k, k);
        for (Eigen::Index a = 0; a < k; ++a) {
            g_a[a] = g[active[static_cast<std::size_t>(a)]];
            for (Eigen::Index b = 0; b < k; ++b)
                hess(a, b) = -moments.rr_w2(active[static_cast<std::size_t>(a)],
                                            active[static_cast<std::size_t>(b)]);
        }

        // min-norm solves keep duplicated (rank-deficient) universes from
        // producing wild steps; the line search still guards the rest
        Eigen::VectorXd direction = Eigen::VectorXd::Zero(n);
        if (binding) {
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
            kkt.topLeftCorner(k, k) = hess;
            kkt.topRightCorner(k, 1).setOnes();
            kkt.bottomLeftCorner(1, k).setOnes();
            const double gamma = -g_a.mean();
            Eigen::VectorXd rhs(k + 1);
            rhs.head(k) = -(g_a.array() + gamma).matrix();
            double active_sum = 0.0;
            for (Eigen::Index a = 0; a < k; ++a)
                active_sum += q[active[static_cast<std::size_t>(a)]];
            rhs[k] = 1.0 - active_sum;
            const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
            for (Eigen::Index a = 0; a < k; ++a)
                direction[active[static_cast<std::size_t>(a)]] = sol[a];
        } else {
            const Eigen::VectorXd sol = hess.completeOrthogonalDecomposition().solve(-g_a);
            for (Eigen::Index a = 0; a < k; ++a)
                direction[active[static_cast<std::size_t>(a)]] = sol[a];
        }
        // assets leaving the face shrink linearly to zero
        for (Eigen::Index i = 0; i < n; ++i)
            if (q[i] > 0.0 && proposal[i] <= activity_tol &&
                std::find(active.begin(), active.end(), i) == active.end())
                direction[i] = -q[i];

        if (!direction.allFinite()) break;
        double alpha = 1.0;
        bool moved = false;
        while (alpha > 1e-12) {
            const Eigen::VectorXd trial = project(q + alpha * direction);
            const auto trial_moments = evaluate(trial, false);
            if (trial_moments.v >= moments.v - 1e-15 * std::abs(moments.v) ||
                (trial - q).lpNorm<Eigen::Infinity>() < 1e-15) {
                q = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!moved) break;
    }

    moments = evaluate(q, false);
    result.fractions.assign(q.data(), q.data() + q.size());
    result.growth = moments.v;
    result.kkt_residual = (q - project(q + moments.grad_v)).lpNorm<Eigen::Infinity>();
    result.iterations = iter;
    result.converged = result.kkt_residual <= opts.tolerance;
    return result;
}

}  // namespace detail

/// Numerical growth-rate maximizer over {q >= 0, sum q <= 1}; the exact
/// reference the closed forms are checked against. With a Monte Carlo method
/// the same seed is reused for every evaluation, so the optimized surrogate
/// stays concave and deterministic; accuracy is then limited by the sample
/// size rather than the reported residual.
inline NumericalSolution kelly_numerical(const AssetUniverse& universe,
                                         const SolverOptions& opts = {}) {
    require_risky(universe);
    return detail::maximize_growth(universe, opts, false);
}

}  // namespace kelly

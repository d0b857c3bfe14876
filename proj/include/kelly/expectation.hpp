#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "kelly/counter_rng.hpp"
#include "kelly/gauss_hermite.hpp"
#include "kelly/model.hpp"

namespace kelly {

/// How Gaussian expectations are evaluated: a tensor-product Gauss-Hermite
/// grid (exact enough for the smooth integrands here, but the grid grows as
/// order^rank, so it is capped at 4 noise dimensions) or seeded Monte Carlo
/// with antithetic pairs.
class ExpectationMethod {
public:
    enum class Kind { GaussHermite, MonteCarlo };

    static ExpectationMethod quadrature(int order = 64) {
        if (order < 16) throw std::invalid_argument("quadrature order must be >= 16");
        ExpectationMethod m;
        m.kind_ = Kind::GaussHermite;
        m.order_ = order;
        return m;
    }

    static ExpectationMethod monte_carlo(std::size_t samples, std::uint64_t seed) {
        if (samples < 10000) throw std::invalid_argument("Monte Carlo needs >= 10^4 samples");
        ExpectationMethod m;
        m.kind_ = Kind::MonteCarlo;
        m.samples_ = samples;
        m.seed_ = seed;
        return m;
    }

    Kind kind() const { return kind_; }
    int order() const { return order_; }
    std::size_t samples() const { return samples_; }
    std::uint64_t seed() const { return seed_; }

private:
    ExpectationMethod() = default;
    Kind kind_ = Kind::GaussHermite;
    int order_ = 64;
    std::size_t samples_ = 0;
    std::uint64_t seed_ = 0;
};

inline constexpr int kMaxTensorDimensions = 4;

/// E[ln W1], E[(ln W1)^2] and the growth gradient E[R_i / W1], all evaluated
/// on the same nodes/samples so differences between portfolios stay low-noise.
struct GrowthStats {
    double v = 0.0;
    double v2 = 0.0;
    std::vector<double> grad;
};

namespace detail {

struct LogWealthMoments {
    double v = 0.0;
    double v2 = 0.0;
    Eigen::VectorXd grad_v;      // E[R_i / W]
    Eigen::VectorXd grad_v2;     // E[2 ln W R_i / W]
    Eigen::MatrixXd rr_w2;       // E[R_i R_j / W^2]
    Eigen::MatrixXd rr_w2_log;   // E[ln W R_i R_j / W^2]
    double truncation_mass = 0.0;
};

inline constexpr std::uint64_t kExpectationStreamTag = 0x4d43455850ULL;

/// Moment accumulator shared by quadrature and Monte Carlo paths. Nodes with
/// W <= 0 (possible only for portfolios outside the no-short/no-borrow set)
/// are excluded and their probability mass reported.
class MomentAccumulator {
public:
    MomentAccumulator(Eigen::Index n, bool hessians) : hessians_(hessians) {
        out_.grad_v = Eigen::VectorXd::Zero(n);
        out_.grad_v2 = Eigen::VectorXd::Zero(n);
        if (hessians_) {
            out_.rr_w2 = Eigen::MatrixXd::Zero(n, n);
            out_.rr_w2_log = Eigen::MatrixXd::Zero(n, n);
        }
    }

    void add(double weight, const Eigen::VectorXd& returns, double wealth) {
        if (!(wealth > 0.0)) {
            out_.truncation_mass += weight;
            return;
        }
        const double lw = std::log(wealth);
        out_.v += weight * lw;
        out_.v2 += weight * lw * lw;
        const Eigen::VectorXd r_over_w = returns / wealth;
        out_.grad_v += weight * r_over_w;
        out_.grad_v2 += (2.0 * weight * lw) * r_over_w;
        if (hessians_) {
            out_.rr_w2.selfadjointView<Eigen::Lower>().rankUpdate(r_over_w, weight);
            out_.rr_w2_log.selfadjointView<Eigen::Lower>().rankUpdate(r_over_w, weight * lw);
        }
    }

    LogWealthMoments take() {
        if (hessians_) {
            out_.rr_w2 = out_.rr_w2.selfadjointView<Eigen::Lower>();
            out_.rr_w2_log = out_.rr_w2_log.selfadjointView<Eigen::Lower>();
        }
        return std::move(out_);
    }

private:
    LogWealthMoments out_;
    bool hessians_;
};

inline LogWealthMoments log_wealth_moments(const AssetUniverse& universe,
                                           const Eigen::VectorXd& fractions,
                                           const ExpectationMethod& method, bool hessians) {
    const Eigen::Index n = static_cast<Eigen::Index>(universe.size());
    if (fractions.size() != n) throw std::invalid_argument("fraction vector length mismatch");
    const Eigen::MatrixXd& factor = universe.noise_factor();
    const Eigen::Index rank = factor.cols();
    const Eigen::VectorXd means = universe.log_means();
    MomentAccumulator acc(n, hessians);

    if (method.kind() == ExpectationMethod::Kind::GaussHermite) {
        if (rank > kMaxTensorDimensions)
            throw std::invalid_argument(
                "tensor quadrature is limited to 4 noise dimensions; use Monte Carlo");
        const QuadratureRule& rule = gauss_hermite_rule(method.order());
        const auto order = static_cast<Eigen::Index>(rule.nodes.size());

        const bool diagonal = !universe.has_covariance();
        Eigen::MatrixXd return_table;  // diagonal case: per-asset return at each node
        if (diagonal) {
            return_table.resize(n, order);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < order; ++j)
                    return_table(i, j) =
                        std::expm1(means[i] + factor(i, i) * rule.nodes[static_cast<std::size_t>(j)]);
        }

        std::vector<Eigen::Index> idx(static_cast<std::size_t>(rank), 0);
        Eigen::VectorXd z(rank), returns(n);
        for (;;) {
            double weight = 1.0;
            for (Eigen::Index d = 0; d < rank; ++d)
                weight *= rule.weights[static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
            if (diagonal) {
                for (Eigen::Index i = 0; i < n; ++i)
                    returns[i] = return_table(i, idx[static_cast<std::size_t>(i)]);
            } else {
                for (Eigen::Index d = 0; d < rank; ++d)
                    z[d] = rule.nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
                returns = (means + factor * z).array().expm1();
            }
            acc.add(weight, returns, 1.0 + fractions.dot(returns));

            Eigen::Index d = 0;
            for (; d < rank; ++d) {
                if (++idx[static_cast<std::size_t>(d)] < order) break;
                idx[static_cast<std::size_t>(d)] = 0;
            }
            if (d == rank) break;
        }
        return acc.take();
    }

    // Monte Carlo with antithetic pairs on a counter-based stream
    const CounterRng rng = CounterRng(method.seed()).derive(kExpectationStreamTag);
    const std::size_t pairs = (method.samples() + 1) / 2;
    const double weight = 1.0 / static_cast<double>(2 * pairs);
    Eigen::VectorXd z(rank), returns(n);
    for (std::size_t s = 0; s < pairs; ++s) {
        for (Eigen::Index d = 0; d < rank; ++d)
            z[d] = rng.normal(s, static_cast<std::uint64_t>(d));
        returns = (means + factor * z).array().expm1();
        acc.add(weight, returns, 1.0 + fractions.dot(returns));
        returns = (means - factor * z).array().expm1();
        acc.add(weight, returns, 1.0 + fractions.dot(returns));
    }
    return acc.take();
}

}  // namespace detail

/// Growth statistics of a portfolio; requires validity under the
/// no-short/no-borrow constraints, otherwise E[ln W1] is not defined.
inline GrowthStats growth_stats(const Portfolio& portfolio, const AssetUniverse& universe,
                                const ExpectationMethod& method = ExpectationMethod::quadrature()) {
    if (portfolio.fractions.size() != universe.size())
        throw std::invalid_argument("portfolio size does not match universe");
    if (auto bad = validate_portfolio(portfolio.fractions, ConstraintPolicy::NoShortNoBorrow))
        throw std::invalid_argument("growth_stats needs a no-short/no-borrow portfolio: " +
                                    bad->describe());
    const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(
        portfolio.fractions.data(), static_cast<Eigen::Index>(portfolio.fractions.size()));
    auto moments = detail::log_wealth_moments(universe, q, method, false);
    GrowthStats stats;
    stats.v = moments.v;
    stats.v2 = moments.v2;
    stats.grad.assign(moments.grad_v.data(), moments.grad_v.data() + moments.grad_v.size());
    return stats;
}

/// E[g(eta)] for scalar Gaussian eta ~ N(m, D).
inline double gauss_expectation_1d(const std::function<double(double)>& g, double m, double D,
                                   const ExpectationMethod& method = ExpectationMethod::quadrature()) {
    if (!(D >= 0.0)) throw std::invalid_argument("variance must be >= 0");
    const double sd = std::sqrt(D);
    double total = 0.0;
    auto sample = [&](double z, double weight) {
        const double value = g(m + sd * z);
        if (!std::isfinite(value))
            throw std::invalid_argument("integrand is not finite on the effective support");
        total += weight * value;
    };
    if (method.kind() == ExpectationMethod::Kind::GaussHermite) {
        const QuadratureRule& rule = gauss_hermite_rule(method.order());
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) sample(rule.nodes[j], rule.weights[j]);
        return total;
    }
    const CounterRng rng = CounterRng(method.seed()).derive(detail::kExpectationStreamTag);
    const std::size_t pairs = (method.samples() + 1) / 2;
    const double weight = 1.0 / static_cast<double>(2 * pairs);
    for (std::size_t s = 0; s < pairs; ++s) {
        const double z = rng.normal(s);
        sample(z, weight);
        sample(-z, weight);
    }
    return total;
}

/// Second-order expansion of a Gaussian expectation around the mean:
/// E[g(eta)] ~= g(m) + (D/2) g''(m). Without an analytic second derivative a
/// central difference with step max(1e-5, sqrt(D)/100) is used.
inline double approx_expectation(const std::function<double(double)>& g,
                                 const std::function<double(double)>& g_second_derivative,
                                 double m, double D) {
    double g2;
    if (g_second_derivative) {
        g2 = g_second_derivative(m);
    } else {
        const double h = std::max(1e-5, std::sqrt(D) / 100.0);
        g2 = (g(m - h) - 2.0 * g(m) + g(m + h)) / (h * h);
    }
    return g(m) + 0.5 * D * g2;
}

inline double approx_expectation(const std::function<double(double)>& g, double m, double D) {
    return approx_expectation(g, nullptr, m, D);
}

/// Bound on the error of the second-order expansion: M D^2 / 8, where M
/// bounds |g''''| on the region where the density is concentrated.
inline double approx_error_bound(double g_fourth_derivative_max, double D) {
    if (!(g_fourth_derivative_max >= 0.0))
        throw std::invalid_argument("derivative bound must be >= 0");
    return g_fourth_derivative_max * D * D / 8.0;
}

/// Multivariate counterpart: E[g(eta)] ~= g(m) + tr(S V) / 2 with V the
/// Hessian of g at m (supplied or by central differences).
inline double approx_expectation_correlated(
    const std::function<double(const Eigen::VectorXd&)>& g, const Eigen::VectorXd& means,
    const Eigen::MatrixXd& covariance, const Eigen::MatrixXd* hessian = nullptr) {
    const Eigen::Index n = means.size();
    if (covariance.rows() != n || covariance.cols() != n)
        throw std::invalid_argument("covariance dimensions do not match the mean vector");
    Eigen::MatrixXd v;
    if (hessian) {
        if (hessian->rows() != n || hessian->cols() != n)
            throw std::invalid_argument("hessian dimensions do not match the mean vector");
        v = *hessian;
    } else {
        v.resize(n, n);
        // second differences need the eps^(1/4) step; sqrt(eps) pushes the
        // numerator below double rounding
        const double step = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
        Eigen::VectorXd h(n);
        for (Eigen::Index i = 0; i < n; ++i) h[i] = step * std::max(1.0, std::abs(means[i]));
        const double g0 = g(means);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) {
                Eigen::VectorXd x = means;
                double vij;
                if (i == j) {
                    x[i] = means[i] + h[i];
                    const double gp = g(x);
                    x[i] = means[i] - h[i];
                    const double gm = g(x);
                    vij = (gp - 2.0 * g0 + gm) / (h[i] * h[i]);
                } else {
                    x[i] = means[i] + h[i]; x[j] = means[j] + h[j];
                    const double gpp = g(x);
                    x[j] = means[j] - h[j];
                    const double gpm = g(x);
                    x[i] = means[i] - h[i]; x[j] = means[j] + h[j];
                    const double gmp = g(x);
                    x[j] = means[j] - h[j];
                    const double gmm = g(x);
                    vij = (gpp - gpm - gmp + gmm) / (4.0 * h[i] * h[j]);
                }
                v(i, j) = v(j, i) = vij;
            }
        }
    }
    return g(means) + 0.5 * (covariance * v).trace();
}

}  // namespace kelly

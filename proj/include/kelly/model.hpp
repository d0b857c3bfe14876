#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace kelly {

/// One risky asset: its per-step log-return is Gaussian with mean m and
/// variance D, so the simple return R = e^eta - 1 is lognormal.
struct Asset {
    std::string name;
    double m = 0.0;
    double D = 0.0;
};

struct AssetMoments {
    double mu = 0.0;      // E[R]
    double sigma2 = 0.0;  // Var[R]
};

/// Closed-form lognormal moments of the simple return.
inline AssetMoments asset_moments(const Asset& a) {
    const double mu = std::expm1(a.m + 0.5 * a.D);
    const double sigma2 = std::expm1(a.D) * std::exp(2.0 * a.m + a.D);
    return {mu, sigma2};
}

/// Ordered collection of assets, optionally with a covariance matrix for the
/// log-return noise. Immutable after construction; the noise factor L with
/// L L^T = S is prepared eagerly so sampling and quadrature can share it.
class AssetUniverse {
public:
    explicit AssetUniverse(std::vector<Asset> assets) : assets_(std::move(assets)) {
        validate_assets();
        const auto n = static_cast<Eigen::Index>(assets_.size());
        noise_factor_ = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            noise_factor_(i, i) = std::sqrt(assets_[static_cast<std::size_t>(i)].D);
    }

    AssetUniverse(std::vector<Asset> assets, Eigen::MatrixXd covariance)
        : assets_(std::move(assets)), covariance_(std::move(covariance)) {
        validate_assets();
        validate_covariance();
    }

    std::size_t size() const { return assets_.size(); }
    const std::vector<Asset>& assets() const { return assets_; }
    const Asset& asset(std::size_t i) const { return assets_.at(i); }

    bool has_covariance() const { return covariance_.has_value(); }
    const Eigen::MatrixXd& covariance() const {
        if (!covariance_) throw std::logic_error("universe has no covariance matrix");
        return *covariance_;
    }

    /// Factor L (n x r, r <= n) with L L^T equal to the covariance (or to
    /// diag(D) when no covariance was given). Rank-deficient PSD matrices
    /// yield r < n.
    const Eigen::MatrixXd& noise_factor() const { return noise_factor_; }

    Eigen::VectorXd log_means() const {
        Eigen::VectorXd m(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) m[static_cast<Eigen::Index>(i)] = assets_[i].m;
        return m;
    }

    Eigen::VectorXd log_variances() const {
        Eigen::VectorXd d(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) d[static_cast<Eigen::Index>(i)] = assets_[i].D;
        return d;
    }

private:
    void validate_assets() const {
        if (assets_.empty()) throw std::invalid_argument("universe needs at least one asset");
        for (std::size_t i = 0; i < assets_.size(); ++i) {
            const Asset& a = assets_[i];
            if (!std::isfinite(a.m))
                throw std::invalid_argument("asset " + display_name(i) + ": m is not finite");
            if (!(a.D >= 0.0) || !std::isfinite(a.D))
                throw std::invalid_argument("asset " + display_name(i) + ": D must be finite and >= 0");
        }
    }

    void validate_covariance() {
        const auto n = static_cast<Eigen::Index>(assets_.size());
        const Eigen::MatrixXd& s = *covariance_;
        if (s.rows() != n || s.cols() != n)
            throw std::invalid_argument("covariance matrix must be n x n");
        const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < i; ++j)
                if (std::abs(s(i, j) - s(j, i)) > 1e-12 * scale)
                    throw std::invalid_argument("covariance matrix must be symmetric");
            if (std::abs(s(i, i) - assets_[static_cast<std::size_t>(i)].D) > 1e-12 * scale)
                throw std::invalid_argument("covariance diagonal must equal each asset's D");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
        const Eigen::VectorXd ev = es.eigenvalues();
        const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
        if (ev.minCoeff() < -tol)
            throw std::invalid_argument("covariance matrix is not positive semi-definite");
        // keep only the numerically positive directions: a singular S (e.g.
        // duplicated assets) gets a reduced-rank factor
        Eigen::Index rank = 0;
        for (Eigen::Index k = 0; k < n; ++k)
            if (ev[k] > tol) ++rank;
        noise_factor_.resize(n, std::max<Eigen::Index>(rank, 1));
        noise_factor_.setZero();
        Eigen::Index col = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (ev[k] <= tol) continue;
            noise_factor_.col(col++) = es.eigenvectors().col(k) * std::sqrt(ev[k]);
        }
    }

    std::string display_name(std::size_t i) const {
        return assets_[i].name.empty() ? "#" + std::to_string(i) : assets_[i].name;
    }

    std::vector<Asset> assets_;
    std::optional<Eigen::MatrixXd> covariance_;
    Eigen::MatrixXd noise_factor_;
};

enum class ConstraintPolicy {
    NoShortNoBorrow,  // q_i >= 0, sum q_i <= 1
    FullyInvested,    // additionally sum q_i == 1
};

/// First violated portfolio constraint, if any.
struct ConstraintViolation {
    enum class Kind { NegativeFraction, SumExceedsOne, SumNotOne };
    Kind kind = Kind::NegativeFraction;
    std::size_t index = 0;  // offending asset for NegativeFraction
    double value = 0.0;     // offending fraction, or the sum

    std::string describe() const {
        std::ostringstream os;
        switch (kind) {
            case Kind::NegativeFraction:
                os << "short position at index " << index << " (fraction " << value << ")";
                break;
            case Kind::SumExceedsOne:
                os << "sum " << value << " exceeds 1 by " << value - 1.0;
                break;
            case Kind::SumNotOne:
                os << "sum " << value << " is not 1 (fully-invested policy)";
                break;
        }
        return os.str();
    }
};

// Constraint tolerances: equality to 1e-12, nonnegativity with a tiny
// numerical slack below zero.
inline constexpr double kSumTolerance = 1e-12;
inline constexpr double kNonNegativitySlack = -1e-15;

inline std::optional<ConstraintViolation> validate_portfolio(const std::vector<double>& fractions,
                                                             ConstraintPolicy policy) {
    double sum = 0.0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] >= kNonNegativitySlack))
            return ConstraintViolation{ConstraintViolation::Kind::NegativeFraction, i, fractions[i]};
        sum += fractions[i];
    }
    if (sum > 1.0 + kSumTolerance)
        return ConstraintViolation{ConstraintViolation::Kind::SumExceedsOne, 0, sum};
    if (policy == ConstraintPolicy::FullyInvested && std::abs(sum - 1.0) > kSumTolerance)
        return ConstraintViolation{ConstraintViolation::Kind::SumNotOne, 0, sum};
    return std::nullopt;
}

struct Portfolio {
    std::vector<double> fractions;
    ConstraintPolicy policy = ConstraintPolicy::NoShortNoBorrow;
};

/// Validating constructor; throws with the first violated constraint.
inline Portfolio make_portfolio(std::vector<double> fractions,
                                ConstraintPolicy policy = ConstraintPolicy::NoShortNoBorrow) {
    if (auto bad = validate_portfolio(fractions, policy))
        throw std::invalid_argument("invalid portfolio: " + bad->describe());
    return Portfolio{std::move(fractions), policy};
}

/// Wealth after one step given realized simple returns, W1 = 1 + sum q_i R_i.
/// Positive whenever the no-short/no-borrow constraints hold and R_i > -1.
inline double portfolio_wealth(const Portfolio& portfolio, const std::vector<double>& returns) {
    if (returns.size() != portfolio.fractions.size())
        throw std::invalid_argument("returns length does not match portfolio");
    double w = 1.0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
        if (!(returns[i] > -1.0))
            throw std::invalid_argument("return at index " + std::to_string(i) + " is not > -1");
        w += portfolio.fractions[i] * returns[i];
    }
    return w;
}

}  // namespace kelly

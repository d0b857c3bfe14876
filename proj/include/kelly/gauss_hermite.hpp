#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace kelly {

/// Quadrature rule for expectations over a standard normal variable:
/// E[g(Z)] ~= sum_j weight[j] * g(node[j]), weights summing to 1.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite nodes/weights of the given order, rescaled to the standard
/// normal measure. Computed via the Golub-Welsch eigenproblem and cached.
inline const QuadratureRule& gauss_hermite_rule(int order) {
    if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<QuadratureRule>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[order];
    if (!slot) {
        Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
        for (int k = 1; k < order; ++k) {
            const double b = std::sqrt(k / 2.0);  // physicists' weight e^{-x^2}
            jacobi(k, k - 1) = jacobi(k - 1, k) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
        auto rule = std::make_unique<QuadratureRule>();
        rule->nodes.resize(static_cast<std::size_t>(order));
        rule->weights.resize(static_cast<std::size_t>(order));
        for (int j = 0; j < order; ++j) {
            rule->nodes[static_cast<std::size_t>(j)] = std::numbers::sqrt2 * es.eigenvalues()[j];
            const double v0 = es.eigenvectors()(0, j);
            rule->weights[static_cast<std::size_t>(j)] = v0 * v0;
        }
        slot = std::move(rule);
    }
    return *slot;
}

}  // namespace kelly

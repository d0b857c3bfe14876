#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "kelly/gauss_hermite.hpp"
#include "kelly/lef.hpp"
#include "oracles.hpp"

using kelly::ExpectationMethod;

namespace {

// Independent oracle: sweep the one remaining degree of freedom of a
// three-asset fully-invested universe. For each q1 on a grid, solve
// E[ln W1] = v_target for q2 by bisection, then keep the variance minimizer.
struct SweepResult {
    std::vector<double> fractions;
    double var_log = 0.0;
};

SweepResult sweep_three_asset_lef(const kelly::AssetUniverse& u, double v_target, int order,
                                  double q1_lo, double q1_hi, int steps) {
    const auto& rule = kelly::gauss_hermite_rule(order);
    const auto n = rule.nodes.size();
    std::vector<double> r1(n), r2(n), r3(n);
    for (std::size_t j = 0; j < n; ++j) {
        r1[j] = std::expm1(u.asset(0).m + std::sqrt(u.asset(0).D) * rule.nodes[j]);
        r2[j] = std::expm1(u.asset(1).m + std::sqrt(u.asset(1).D) * rule.nodes[j]);
        r3[j] = std::expm1(u.asset(2).m + std::sqrt(u.asset(2).D) * rule.nodes[j]);
    }
    auto stats = [&](double q1, double q2) {
        const double q3 = 1.0 - q1 - q2;
        double v = 0.0, v2 = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t c = 0; c < n; ++c) {
                    const double w = 1.0 + q1 * r1[a] + q2 * r2[b] + q3 * r3[c];
                    if (!(w > 0.0)) continue;
                    const double weight = rule.weights[a] * rule.weights[b] * rule.weights[c];
                    const double lw = std::log(w);
                    v += weight * lw;
                    v2 += weight * lw * lw;
                }
        return std::pair{v, v2};
    };
    SweepResult best;
    best.var_log = 1e300;
    for (int i = 0; i <= steps; ++i) {
        const double q1 = q1_lo + (q1_hi - q1_lo) * i / steps;
        // bracket roots of v(q2) - v_target over a q2 scan
        const int scan = 40;
        double prev_q2 = -0.6, prev_f = stats(q1, prev_q2).first - v_target;
        for (int k = 1; k <= scan; ++k) {
            const double q2 = -0.6 + (2.2) * k / scan;
            const double f = stats(q1, q2).first - v_target;
            if (std::isfinite(prev_f) && std::isfinite(f) && prev_f * f <= 0.0) {
                double lo = prev_q2, hi = q2, flo = prev_f;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = stats(q1, mid).first - v_target;
                    if (flo * fm <= 0.0) {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                const double q2_root = 0.5 * (lo + hi);
                const auto [v, v2] = stats(q1, q2_root);
                const double var = v2 - v * v;
                if (var < best.var_log) {
                    best.var_log = var;
                    best.fractions = {q1, q2_root, 1.0 - q1 - q2_root};
                }
            }
            prev_q2 = q2;
            prev_f = f;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("single-asset frontier point") {
    const auto u = oracles::make_universe({{0.07, 0.09}});
    const auto sol = kelly::lef_point(u, 0.07);
    CHECK(sol.converged);
    CHECK(sol.fractions == std::vector<double>{1.0});
    CHECK(sol.v_achieved == Approx(0.07).margin(1e-10));
    CHECK(sol.var_log == Approx(0.09).margin(1e-9));
    CHECK_THROWS_AS(kelly::lef_point(u, 0.08), std::invalid_argument);
}

TEST_CASE("two identical assets split evenly") {
    const auto u = oracles::make_universe({{0.02, 0.01}, {0.02, 0.01}});
    // target the symmetric portfolio's own growth, then expect symmetry back
    const auto sym = kelly::growth_stats(kelly::make_portfolio({0.5, 0.5}), u);
    const auto sol = kelly::lef_point(u, sym.v);
    REQUIRE(sol.converged);
    CHECK(sol.fractions[0] == Approx(0.5).margin(1e-8));
    CHECK(sol.fractions[1] == Approx(0.5).margin(1e-8));
    // independent-variance halving, up to the lognormal correction
    CHECK(sol.var_log == Approx(0.005).margin(2e-4));
}

TEST_CASE("attainable range is enforced") {
    const auto u = oracles::demo_three_assets();
    CHECK_THROWS_AS(kelly::lef_point(u, 0.05), std::invalid_argument);   // below min m
    CHECK_THROWS_AS(kelly::lef_point(u, 0.30), std::invalid_argument);   // above the optimum
}

TEST_CASE("stationarity and the objective identity at converged points") {
    const auto u = oracles::demo_three_assets();
    const auto method = ExpectationMethod::quadrature();
    for (double v_target : {0.15, 0.18, 0.21}) {
        const auto sol = kelly::lef_point(u, v_target, method);
        REQUIRE(sol.converged);
        CHECK(std::abs(sol.v_achieved - v_target) <= 1e-8);
        const double sum =
            sol.fractions[0] + sol.fractions[1] + sol.fractions[2];
        CHECK(sum == Approx(1.0).margin(1e-8));

        // first-order conditions re-checked from scratch
        Eigen::VectorXd q(3);
        for (int i = 0; i < 3; ++i) q[i] = sol.fractions[static_cast<std::size_t>(i)];
        const auto mom = kelly::detail::log_wealth_moments(u, q, method, false);
        for (int i = 0; i < 3; ++i) {
            const double stationarity =
                mom.grad_v2[i] + sol.gamma1 * mom.grad_v[i] + sol.gamma2;
            CHECK(std::abs(stationarity) < 1e-6);
        }

        // E[(ln W)^2] - (E[ln W])^2 equals the direct second central moment
        const auto& rule = kelly::gauss_hermite_rule(64);
        double central = 0.0;
        for (std::size_t a = 0; a < rule.nodes.size(); ++a)
            for (std::size_t b = 0; b < rule.nodes.size(); ++b)
                for (std::size_t c = 0; c < rule.nodes.size(); ++c) {
                    double w = 1.0;
                    const double e0 = u.asset(0).m + std::sqrt(u.asset(0).D) * rule.nodes[a];
                    const double e1 = u.asset(1).m + std::sqrt(u.asset(1).D) * rule.nodes[b];
                    const double e2 = u.asset(2).m + std::sqrt(u.asset(2).D) * rule.nodes[c];
                    w += q[0] * std::expm1(e0) + q[1] * std::expm1(e1) + q[2] * std::expm1(e2);
                    const double dev = std::log(w) - mom.v;
                    central += rule.weights[a] * rule.weights[b] * rule.weights[c] * dev * dev;
                }
        CHECK(sol.var_log == Approx(central).margin(1e-10));
    }
}

TEST_CASE("direct minimizer against the one-degree-of-freedom sweep") {
    const auto u = oracles::demo_three_assets();
    const double v_target = 0.17;
    const auto sol = kelly::lef_point(u, v_target);
    REQUIRE(sol.converged);
    const auto sweep = sweep_three_asset_lef(u, v_target, 20, -0.2, 1.0, 240);
    REQUIRE_FALSE(sweep.fractions.empty());
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(sol.fractions[i] == Approx(sweep.fractions[i]).margin(5e-3));
    CHECK(sol.var_log <= sweep.var_log + 1e-6);
}

TEST_CASE("approximate system") {
    const auto u = oracles::demo_three_assets();
    SECTION("single asset reduces to multiplier bookkeeping") {
        const auto single = oracles::make_universe({{0.03, 0.01}});
        const auto sol = kelly::lef_approx_system(single, 0.03 + 0.005);
        CHECK(sol.converged);
        CHECK(sol.fractions == std::vector<double>{1.0});
        CHECK(sol.gamma1 == 0.0);
        CHECK(sol.gamma2 == Approx(-2.0 * 0.01));
    }
    SECTION("symmetric universe gives a symmetric solution") {
        const auto twins = oracles::make_universe({{0.02, 0.04}, {0.02, 0.04}});
        const auto sol = kelly::lef_approx_system(twins, 0.02 + 0.02);
        REQUIRE(sol.converged);
        CHECK(sol.fractions[0] == Approx(sol.fractions[1]).margin(1e-10));
    }
    SECTION("system residual vanishes at the reported solution") {
        const auto sol = kelly::lef_approx_system(u, 0.18);
        REQUIRE(sol.converged);
        CHECK(sol.residual <= 1e-12);
        CHECK(sol.fractions[0] + sol.fractions[1] + sol.fractions[2] == Approx(1.0).margin(1e-12));
        CHECK(sol.v_achieved == Approx(0.18).margin(1e-12));
        CHECK_FALSE(sol.parameters_large);
    }
    SECTION("parameters outside the small regime are flagged") {
        const auto big = oracles::make_universe({{0.4, 0.1}, {0.1, 0.2}});
        CHECK(kelly::lef_approx_system(big, 0.3).parameters_large);
        const auto big_d = oracles::make_universe({{0.05, 0.35}, {0.1, 0.2}});
        CHECK(kelly::lef_approx_system(big_d, 0.15).parameters_large);
    }
    SECTION("matches the direct minimizer through the growth map") {
        // compare as curves: the approximate solution's exact growth selects
        // the direct point to compare with
        for (double v_nominal : {0.16, 0.18, 0.20}) {
            const auto approx = kelly::lef_approx_system(u, v_nominal);
            REQUIRE(approx.converged);
            Eigen::VectorXd qa(3);
            for (int i = 0; i < 3; ++i) qa[i] = approx.fractions[static_cast<std::size_t>(i)];
            const double exact_growth =
                kelly::detail::log_wealth_moments(u, qa, ExpectationMethod::quadrature(), false).v;
            const auto direct = kelly::lef_point(u, exact_growth);
            REQUIRE(direct.converged);
            for (std::size_t i = 0; i < 3; ++i)
                CHECK(std::abs(approx.fractions[i] - direct.fractions[i]) < 0.02);
        }
    }
    SECTION("approximation error shrinks with the parameter scale") {
        for (double eps : {0.1, 0.01}) {
            std::vector<std::pair<double, double>> scaled;
            for (const auto& a : u.assets()) scaled.emplace_back(eps * a.m, eps * a.D);
            const auto small = oracles::make_universe(scaled);
            // aim at the middle of the attainable band
            const double v_lo = eps * 0.1;
            const double v_target = v_lo + eps * 0.06;
            const auto approx = kelly::lef_approx_system(small, v_target);
            const auto direct = kelly::lef_point(small, v_target);
            REQUIRE(approx.converged);
            REQUIRE(direct.converged);
            for (std::size_t i = 0; i < 3; ++i)
                CHECK(std::abs(approx.fractions[i] - direct.fractions[i]) <= 10.0 * eps);
        }
    }
}

TEST_CASE("frontier in the return-deviation plane") {
    const auto u = oracles::demo_three_assets();
    const auto method = ExpectationMethod::quadrature();
    const auto points = kelly::lef_frontier(u, {0.12, 0.15, 0.18, 0.21}, method, true);
    REQUIRE(points.size() == 4);
    for (const auto& p : points) {
        REQUIRE(p.solution.converged);
        // no-short solutions are feasible portfolios
        for (double q : p.solution.fractions) CHECK(q >= -1e-9);
        CHECK(p.sigma_p > 0.0);
        // weakly right of the no-short frontier at the same return
        const auto ef = kelly::constrained_frontier(u, {p.mu_p})[0];
        CHECK(p.sigma_p >= ef.sigma_p - 1e-9);
    }
    SECTION("ends approach single-asset portfolios") {
        const auto low = kelly::lef_frontier(u, {0.101}, method, true)[0];
        CHECK(low.solution.fractions[0] > 0.95);
    }
}

TEST_CASE("short positions leave a bankruptcy mass that gets flagged") {
    const auto u = oracles::make_universe({{0.1, 0.2}, {0.2, 0.25}});
    Eigen::VectorXd shorting(2);
    shorting << 1.6, -0.6;
    const auto mom =
        kelly::detail::log_wealth_moments(u, shorting, ExpectationMethod::quadrature(), false);
    CHECK(mom.truncation_mass > kelly::kNonPhysicalMass);
    CHECK(std::isfinite(mom.v));
    CHECK(std::isfinite(mom.v2));
    // feasible portfolios never truncate
    Eigen::VectorXd feasible(2);
    feasible << 0.4, 0.5;
    CHECK(kelly::detail::log_wealth_moments(u, feasible, ExpectationMethod::quadrature(), false)
              .truncation_mass == 0.0);
}

#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>

#include "kelly/kelly_solver.hpp"
#include "oracles.hpp"

using kelly::SolverOptions;

TEST_CASE("profitability thresholds") {
    CHECK(kelly::profitability_thresholds(0.04) == std::pair{-0.02, 0.02});
    CHECK(kelly::profitability_thresholds(0.0) == std::pair{0.0, 0.0});
    CHECK(kelly::profitability_thresholds(0.25) == std::pair{-0.125, 0.125});
}

TEST_CASE("single-asset closed form") {
    SECTION("boundary values are exact") {
        for (double d : {0.01, 0.04, 1.0}) {
            CHECK(kelly::kelly_fraction_single(-0.5 * d, d) == 0.0);
            CHECK(kelly::kelly_fraction_single(0.5 * d, d) == 1.0);
        }
    }
    CHECK(kelly::kelly_fraction_single(0.0, 0.04) == 0.5);
    CHECK(kelly::kelly_fraction_single(0.01, 0.04) == Approx(0.75));
    SECTION("clamping outside the band") {
        CHECK(kelly::kelly_fraction_single(0.5, 0.04) == 1.0);
        CHECK(kelly::kelly_fraction_single(-0.5, 0.04) == 0.0);
    }
    SECTION("degenerate D = 0 tie-break") {
        CHECK(kelly::kelly_fraction_single(0.1, 0.0) == 1.0);
        CHECK(kelly::kelly_fraction_single(-0.1, 0.0) == 0.0);
        CHECK(kelly::kelly_fraction_single(0.0, 0.0) == 0.0);
    }
}

TEST_CASE("first-order correction") {
    CHECK(kelly::first_order_correction(0.0, 0.04) == 0.0);
    CHECK(kelly::first_order_correction(0.02, 0.04) == Approx(0.0).margin(1e-18));
    CHECK(kelly::first_order_correction(-0.02, 0.04) == Approx(0.0).margin(1e-18));
    CHECK(kelly::first_order_correction(0.01, 0.04) == Approx(-0.001875).epsilon(1e-12));
}

TEST_CASE("unconstrained fractions") {
    SECTION("all zero at the profitability edge") {
        const auto u = oracles::make_universe({{-0.02, 0.04}, {-0.125, 0.25}});
        const auto q = kelly::kelly_unconstrained(u);
        CHECK(q[0] == Approx(0.0).margin(1e-15));
        CHECK(q[1] == Approx(0.0).margin(1e-15));
    }
    SECTION("demo universe") {
        const auto q = kelly::kelly_unconstrained(oracles::demo_three_assets());
        CHECK(q[0] == Approx(3.0).epsilon(1e-12));
        CHECK(q[1] == Approx(2.1666666666667).epsilon(1e-10));
        CHECK(q[2] == Approx(1.3).epsilon(1e-12));
    }
    SECTION("consistent with the single-asset form before clamping") {
        const auto q = kelly::kelly_unconstrained(oracles::make_universe({{0.01, 0.04}}));
        CHECK(q[0] == Approx(0.5 + 0.01 / 0.04));
    }
}

TEST_CASE("constrained closed-form solution") {
    SECTION("demo universe drops the first asset") {
        const auto sol = kelly::kelly_constrained(oracles::demo_three_assets());
        REQUIRE(sol.binding);
        REQUIRE(sol.gamma.has_value());
        CHECK(*sol.gamma == Approx(-0.16323529411764706).epsilon(1e-12));
        CHECK(sol.active_set == std::vector<std::size_t>{1, 2});
        CHECK(sol.fractions[0] == 0.0);
        CHECK(sol.fractions[1] == Approx(0.35294117647058815).epsilon(1e-10));
        CHECK(sol.fractions[2] == Approx(0.6470588235294118).epsilon(1e-10));
    }
    SECTION("identical assets split evenly when the budget binds") {
        const auto u = oracles::make_universe({{0.05, 0.04}, {0.05, 0.04}, {0.05, 0.04}});
        const auto sol = kelly::kelly_constrained(u);
        REQUIRE(sol.binding);
        for (double q : sol.fractions) CHECK(q == Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SECTION("condensation regime goes all-in on the first asset") {
        const auto u = oracles::make_universe({{0.3, 0.1}, {0.05, 0.2}});
        const auto sol = kelly::kelly_constrained(u);
        CHECK(sol.fractions[0] == Approx(1.0).epsilon(1e-12));
        CHECK(sol.fractions[1] == 0.0);
        CHECK(sol.active_set == std::vector<std::size_t>{0});
    }
    SECTION("non-binding case keeps cash") {
        const auto u = oracles::make_universe({{-0.01, 0.04}, {0.0, 0.09}});
        const auto sol = kelly::kelly_constrained(u);
        CHECK_FALSE(sol.binding);
        CHECK_FALSE(sol.gamma.has_value());
        CHECK(sol.fractions[0] == Approx(0.25));
        CHECK(sol.fractions[1] == Approx(0.5));
    }
    SECTION("zero-variance assets are rejected") {
        CHECK_THROWS_AS(kelly::kelly_constrained(oracles::make_universe({{0.1, 0.0}})),
                        std::invalid_argument);
    }
}

TEST_CASE("constrained solution matches subset enumeration") {
    int binding_seen = 0, slack_seen = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        // moderate parameters keep the quadratic growth model meaningful
        const auto u = oracles::random_universe(seed, 2 + seed % 5, -0.05, 0.05, 0.005, 0.05);
        const auto fast = kelly::kelly_constrained(u);
        const auto brute = oracles::enumerate_constrained(u);
        REQUIRE(fast.active_set == brute.active_set);
        CHECK(fast.binding == brute.binding);
        double sum = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            CHECK(fast.fractions[i] == Approx(brute.fractions[i]).margin(1e-10));
            CHECK(fast.fractions[i] >= 0.0);
            sum += fast.fractions[i];
        }
        CHECK(sum <= 1.0 + 1e-12);
        (fast.binding ? binding_seen : slack_seen)++;
    }
    // the draw ranges must exercise both branches
    CHECK(binding_seen > 20);
    CHECK(slack_seen > 20);
}

TEST_CASE("time-scale invariance of the closed forms") {
    const auto base = oracles::demo_three_assets();
    for (double lambda : {0.1, 0.5, 2.0}) {
        std::vector<std::pair<double, double>> scaled;
        for (const auto& a : base.assets()) scaled.emplace_back(lambda * a.m, lambda * a.D);
        const auto u = oracles::make_universe(scaled);
        const auto q_base = kelly::kelly_unconstrained(base);
        const auto q_scaled = kelly::kelly_unconstrained(u);
        for (std::size_t i = 0; i < 3; ++i) CHECK(q_scaled[i] == Approx(q_base[i]).epsilon(1e-12));
        const auto c_base = kelly::kelly_constrained(base);
        const auto c_scaled = kelly::kelly_constrained(u);
        CHECK(c_base.active_set == c_scaled.active_set);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(c_scaled.fractions[i] == Approx(c_base.fractions[i]).epsilon(1e-10));
    }
}

TEST_CASE("feasible-set projection") {
    SECTION("interior points are untouched") {
        const std::vector<double> q{0.2, 0.3};
        CHECK(kelly::project_to_feasible(q) == q);
    }
    SECTION("negative coordinates clip when the budget is slack") {
        const auto p = kelly::project_to_feasible(std::vector<double>{-0.5, 0.3});
        CHECK(p[0] == 0.0);
        CHECK(p[1] == Approx(0.3));
    }
    SECTION("budget overruns land on the simplex") {
        const auto p = kelly::project_to_feasible(std::vector<double>{0.9, 0.9});
        CHECK(p[0] == Approx(0.5));
        CHECK(p[1] == Approx(0.5));
        const auto p2 = kelly::project_to_feasible(std::vector<double>{1.5, -0.2, 0.4});
        double sum = 0.0;
        for (double x : p2) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(sum == Approx(1.0).margin(1e-12));
    }
    SECTION("projection is idempotent and contracts toward the set") {
        const kelly::CounterRng rng(17);
        for (std::uint64_t t = 0; t < 100; ++t) {
            std::vector<double> x{4.0 * rng.uniform(t, 0) - 2.0, 4.0 * rng.uniform(t, 1) - 2.0,
                                  4.0 * rng.uniform(t, 2) - 2.0};
            const auto p = kelly::project_to_feasible(x);
            double sum = 0.0;
            for (double v : p) {
                CHECK(v >= 0.0);
                sum += v;
            }
            CHECK(sum <= 1.0 + 1e-12);
            const auto pp = kelly::project_to_feasible(p);
            for (std::size_t i = 0; i < 3; ++i) CHECK(pp[i] == Approx(p[i]).margin(1e-12));
        }
    }
}

TEST_CASE("numerical maximizer") {
    SECTION("boundary optima are found exactly") {
        // m >= D/2 drives everything into the risky asset
        const auto all_in = kelly::kelly_numerical(oracles::make_universe({{0.3, 0.04}}));
        CHECK(all_in.converged);
        CHECK(all_in.fractions[0] == Approx(1.0).margin(1e-9));
        const auto none = kelly::kelly_numerical(oracles::make_universe({{-0.3, 0.04}}));
        CHECK(none.fractions[0] == Approx(0.0).margin(1e-9));
    }
    SECTION("symmetric point at m = 0 even for D = 1") {
        const auto sol = kelly::kelly_numerical(oracles::make_universe({{0.0, 1.0}}));
        CHECK(sol.converged);
        CHECK(sol.fractions[0] == Approx(0.5).margin(0.02));
    }
    SECTION("demo universe close to the closed form") {
        const auto numeric = kelly::kelly_numerical(oracles::demo_three_assets());
        const auto closed = kelly::kelly_constrained(oracles::demo_three_assets());
        REQUIRE(numeric.converged);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(std::abs(numeric.fractions[i] - closed.fractions[i]) < 0.02);
        const double sum = numeric.fractions[0] + numeric.fractions[1] + numeric.fractions[2];
        CHECK(sum == Approx(1.0).margin(1e-9));
    }
    SECTION("no feasible point beats the optimizer") {
        const auto u = oracles::demo_three_assets();
        const auto sol = kelly::kelly_numerical(u);
        const auto method = kelly::ExpectationMethod::quadrature();
        const double best =
            kelly::growth_stats(kelly::make_portfolio(sol.fractions), u, method).v;
        const kelly::CounterRng rng(23);
        for (std::uint64_t t = 0; t < 1000; ++t) {
            std::vector<double> q{rng.uniform(t, 0), rng.uniform(t, 1), rng.uniform(t, 2)};
            const double sum = q[0] + q[1] + q[2];
            if (sum > 1.0)
                for (double& x : q) x /= sum;
            const double v = kelly::growth_stats(kelly::make_portfolio(q), u, method).v;
            CHECK(v <= best + 1e-12);
        }
    }
    SECTION("single asset against closed form plus correction") {
        for (double d : {0.01, 0.04, 0.25}) {
            for (int i = 0; i <= 20; ++i) {
                const double m = -0.5 * d + d * i / 20.0;
                const auto sol = kelly::kelly_numerical(oracles::make_universe({{m, d}}));
                const double closed = kelly::kelly_fraction_single(m, d);
                const double slack = std::abs(kelly::first_order_correction(m, d)) + 0.01;
                CHECK(std::abs(closed - sol.fractions[0]) <= slack);
            }
        }
    }
    SECTION("interior optimum has a vanishing gradient") {
        const auto u = oracles::make_universe({{-0.01, 0.04}, {-0.02, 0.09}});
        const auto sol = kelly::kelly_numerical(u);
        REQUIRE(sol.converged);
        const double sum = sol.fractions[0] + sol.fractions[1];
        REQUIRE(sum < 1.0 - 1e-6);  // budget slack, so the optimum is interior
        const auto stats = kelly::growth_stats(kelly::make_portfolio(sol.fractions), u);
        CHECK(std::abs(stats.grad[0]) < 1e-9);
        CHECK(std::abs(stats.grad[1]) < 1e-9);
    }
    SECTION("correlated noise shifts the optimum away from the closed form") {
        Eigen::MatrixXd cov(2, 2);
        cov << 0.04, 0.045, 0.045, 0.09;  // strong positive correlation
        const kelly::AssetUniverse correlated({{"a", 0.01, 0.04}, {"b", 0.012, 0.09}}, cov);
        const auto sol = kelly::kelly_numerical(correlated);
        REQUIRE(sol.converged);
        // grid-scan oracle over the feasible square
        const auto method = kelly::ExpectationMethod::quadrature();
        double best = -1e300;
        for (int i = 0; i <= 100; ++i) {
            for (int j = 0; j <= 100 - i; ++j) {
                Eigen::VectorXd q(2);
                q << i / 100.0, j / 100.0;
                best = std::max(best, kelly::detail::log_wealth_moments(correlated, q, method,
                                                                        false)
                                          .v);
            }
        }
        CHECK(sol.growth >= best - 1e-9);
    }
    SECTION("Monte Carlo surrogate stays deterministic") {
        SolverOptions opts;
        opts.method = kelly::ExpectationMethod::monte_carlo(20000, 19);
        opts.tolerance = 1e-8;
        const auto u = oracles::make_universe({{0.02, 0.04}, {0.01, 0.09}});
        const auto a = kelly::kelly_numerical(u, opts);
        const auto b = kelly::kelly_numerical(u, opts);
        CHECK(a.fractions == b.fractions);
        const auto quad_sol = kelly::kelly_numerical(u);
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(a.fractions[i] == Approx(quad_sol.fractions[i]).margin(0.02));
    }
    SECTION("five assets run on the Monte Carlo path") {
        SolverOptions opts;
        opts.method = kelly::ExpectationMethod::monte_carlo(40000, 7);
        opts.tolerance = 1e-8;
        const auto u = oracles::random_universe(12, 5, -0.02, 0.05, 0.02, 0.2);
        const auto sol = kelly::kelly_numerical(u, opts);
        CHECK(sol.converged);
        double sum = 0.0;
        for (double q : sol.fractions) {
            CHECK(q >= 0.0);
            sum += q;
        }
        CHECK(sum <= 1.0 + 1e-9);
        // closed form stays in the same neighborhood at these parameter sizes
        const auto closed = kelly::kelly_constrained(u);
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(sol.fractions[i] == Approx(closed.fractions[i]).margin(0.05));
    }
    SECTION("iteration cap reports the best iterate") {
        SolverOptions opts;
        opts.max_iterations = 1;
        const auto sol = kelly::kelly_numerical(oracles::demo_three_assets(), opts);
        CHECK_FALSE(sol.converged);
        CHECK(sol.kkt_residual > 1e-10);
        CHECK(sol.fractions.size() == 3);
    }
    SECTION("zero-variance assets are rejected") {
        CHECK_THROWS_AS(kelly::kelly_numerical(oracles::make_universe({{0.1, 0.0}})),
                        std::invalid_argument);
    }
    SECTION("perfectly correlated duplicates still optimize") {
        // rank-deficient universe: only the total exposure matters
        Eigen::MatrixXd cov(2, 2);
        cov << 0.09, 0.09, 0.09, 0.09;
        const kelly::AssetUniverse u({{"a", 0.01, 0.09}, {"b", 0.01, 0.09}}, cov);
        const auto sol = kelly::kelly_numerical(u);
        REQUIRE(sol.converged);
        const double total = sol.fractions[0] + sol.fractions[1];
        // the combined asset has m = 0.01, D = 0.09
        const auto single = kelly::kelly_numerical(oracles::make_universe({{0.01, 0.09}}));
        CHECK(total == Approx(single.fractions[0]).margin(1e-6));
    }
}

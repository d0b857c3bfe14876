// kelly-lab: growth-optimal and mean-variance portfolio toolbox.
//
// Exit codes: 0 success, 2 configuration error, 3 solver non-convergence.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kelly/kelly_lab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNoConvergence = 3;

struct MethodFlags {
    std::string method = "quad";
    int quad_order = 64;
    std::size_t mc_samples = 100000;
    std::optional<std::uint64_t> seed;
};

void add_method_flags(CLI::App* cmd, MethodFlags& flags, bool with_seed = true) {
    cmd->add_option("--method", flags.method, "Expectation method: quad or mc")
        ->check(CLI::IsMember({"quad", "mc"}));
    cmd->add_option("--quad-order", flags.quad_order, "Gauss-Hermite order per dimension");
    cmd->add_option("--mc-samples", flags.mc_samples, "Monte Carlo sample count");
    if (with_seed) cmd->add_option("--seed", flags.seed, "Seed for stochastic evaluation");
}

kelly::ExpectationMethod resolve_method(const MethodFlags& flags, const kelly::AssetUniverse& universe) {
    const bool want_mc =
        flags.method == "mc" || universe.noise_factor().cols() > kelly::kMaxTensorDimensions;
    if (!want_mc) return kelly::ExpectationMethod::quadrature(flags.quad_order);
    if (!flags.seed)
        throw kelly::ConfigError("--seed is required for Monte Carlo expectations");
    return kelly::ExpectationMethod::monte_carlo(flags.mc_samples, *flags.seed);
}

class Output {
public:
    explicit Output(const std::string& path) {
        if (path.empty()) return;
        file_ = std::make_unique<std::ofstream>(path);
        if (!*file_) throw kelly::ConfigError("cannot open output file: " + path);
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::vector<double> parse_fraction_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw kelly::ConfigError("cannot parse fraction list: " + text);
        }
    }
    if (values.empty()) throw kelly::ConfigError("empty fraction list");
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Growth-optimal (log-wealth) and mean-variance portfolio toolbox"};
    app.require_subcommand(1);

    std::string universe_path, out_path;

    // optimize
    auto* optimize = app.add_subcommand("optimize", "All solver results for a universe as JSON");
    MethodFlags optimize_method;
    double tolerance = 1e-10;
    int max_iterations = 300;
    optimize->add_option("--universe", universe_path, "Universe config (JSON)")->required();
    optimize->add_option("--out", out_path, "Output file (default: stdout)");
    optimize->add_option("--tolerance", tolerance, "KKT residual bound");
    optimize->add_option("--max-iter", max_iterations, "Iteration cap for the numerical solver");
    add_method_flags(optimize, optimize_method);

    // frontier
    auto* frontier = app.add_subcommand("frontier", "Frontier table (CSV)");
    MethodFlags frontier_method;
    kelly::FrontierCsvOptions frontier_opts;
    frontier_opts.with_constrained = true;
    bool frontier_lef = false;
    frontier->add_option("--universe", universe_path, "Universe config (JSON)")->required();
    frontier->add_option("--out", out_path, "Output file (default: stdout)");
    frontier->add_option("--points", frontier_opts.points, "Grid points");
    frontier->add_option("--mu-min", frontier_opts.mu_min, "Lowest target return");
    frontier->add_option("--mu-max", frontier_opts.mu_max, "Highest target return");
    frontier->add_flag("--lef", frontier_lef, "Add the log-wealth frontier column");
    add_method_flags(frontier, frontier_method);

    // lef
    auto* lef = app.add_subcommand("lef", "Log-wealth frontier table (CSV)");
    MethodFlags lef_method;
    int lef_points = 25;
    bool lef_no_short = false;
    lef->add_option("--universe", universe_path, "Universe config (JSON)")->required();
    lef->add_option("--out", out_path, "Output file (default: stdout)");
    lef->add_option("--points", lef_points, "Number of target growths");
    lef->add_flag("--no-short", lef_no_short, "Enforce nonnegative fractions");
    add_method_flags(lef, lef_method);

    // phase
    auto* phase = app.add_subcommand("phase", "Two-asset phase grid (CSV)");
    double phase_d1 = 0.1, phase_d2 = 0.2, phase_lo = -0.3, phase_hi = 0.4;
    int phase_cells = 50;
    phase->add_option("--out", out_path, "Output file (default: stdout)");
    phase->add_option("--d1", phase_d1, "Variance of asset 1");
    phase->add_option("--d2", phase_d2, "Variance of asset 2");
    phase->add_option("--m-min", phase_lo, "Lower mean bound");
    phase->add_option("--m-max", phase_hi, "Upper mean bound");
    phase->add_option("--cells", phase_cells, "Cells per axis");

    // condense uniform | powerlaw
    auto* condense = app.add_subcommand("condense", "Condensation studies (CSV)");
    condense->require_subcommand(1);
    auto* uniform = condense->add_subcommand("uniform", "Uniformly distributed means");
    std::size_t uni_assets = 1000, uni_reps = 10000;
    double uni_d = 0.01, uni_x = -0.05, uni_l_min = 0.01, uni_l_max = 0.25;
    int uni_l_points = 25;
    std::optional<std::uint64_t> uni_seed;
    uniform->add_option("--out", out_path, "Output file (default: stdout)");
    uniform->add_option("--n-assets", uni_assets, "Assets per draw");
    uniform->add_option("--d", uni_d, "Common variance");
    uniform->add_option("--x", uni_x, "Center of the mean distribution");
    uniform->add_option("--l-min", uni_l_min, "Smallest half-width");
    uniform->add_option("--l-max", uni_l_max, "Largest half-width");
    uniform->add_option("--l-points", uni_l_points, "Half-width grid points");
    uniform->add_option("--reps", uni_reps, "Monte Carlo repetitions");
    uniform->add_option("--seed", uni_seed, "Seed (required)");

    auto* powerlaw = condense->add_subcommand("powerlaw", "Pareto-tail means");
    std::size_t pl_assets = 1000, pl_trials = 10000;
    double pl_r = 0.1, pl_m_min = 0.1, pl_d_min = 0.2, pl_d_max = 2.0;
    int pl_d_points = 10;
    std::optional<std::uint64_t> pl_seed;
    powerlaw->add_option("--out", out_path, "Output file (default: stdout)");
    powerlaw->add_option("--n-assets", pl_assets, "Total assets");
    powerlaw->add_option("--r", pl_r, "Fraction of assets in the tail");
    powerlaw->add_option("--m-min", pl_m_min, "Tail cutoff");
    powerlaw->add_option("--d-min", pl_d_min, "Smallest variance");
    powerlaw->add_option("--d-max", pl_d_max, "Largest variance");
    powerlaw->add_option("--d-points", pl_d_points, "Variance grid points");
    powerlaw->add_option("--trials", pl_trials, "Monte Carlo trials per probability");
    powerlaw->add_option("--seed", pl_seed, "Seed (required)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Growth comparison on common random paths (CSV)");
    MethodFlags simulate_method;
    std::size_t sim_horizon = 100, sim_paths = 100000;
    int sim_threads = 1;
    std::optional<std::uint64_t> sim_seed;
    std::vector<std::string> sim_compare;
    simulate->add_option("--universe", universe_path, "Universe config (JSON)")->required();
    simulate->add_option("--out", out_path, "Output file (default: stdout)");
    simulate->add_option("--horizon", sim_horizon, "Steps per path");
    simulate->add_option("--paths", sim_paths, "Number of paths");
    simulate->add_option("--threads", sim_threads, "Worker threads");
    simulate->add_option("--seed", sim_seed, "Seed (required)");
    simulate->add_option("--compare", sim_compare,
                         "Comparison portfolio \"q1,q2,...\" (repeatable)");
    std::string sim_dump_paths;
    std::size_t sim_dump_count = 100;
    simulate->add_option("--dump-paths", sim_dump_paths,
                         "Also write the first simulated price paths to this CSV");
    simulate->add_option("--dump-paths-count", sim_dump_count, "Paths to dump");
    add_method_flags(simulate, simulate_method, /*with_seed=*/false);

    // figure
    auto* figure = app.add_subcommand("figure", "Bundled study datasets (CSV)");
    int figure_id = 0;
    kelly::FigureOptions figure_opts;
    std::optional<std::uint64_t> figure_seed;
    figure->add_option("--fig", figure_id, "Study id (1-7)")->required();
    figure->add_option("--out", out_path, "Output file (default: stdout)");
    figure->add_option("--seed", figure_seed, "Seed (required for studies 5 and 6)");
    figure->add_option("--reps", figure_opts.repetitions, "Repetitions (study 5)");
    figure->add_option("--trials", figure_opts.n_trials, "Trials per probability (study 6)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*optimize) {
            const kelly::AssetUniverse universe = kelly::load_universe(universe_path);
            kelly::SolverOptions opts;
            opts.method = resolve_method(optimize_method, universe);
            opts.tolerance = tolerance;
            opts.max_iterations = max_iterations;
            const auto report = kelly::optimize_report(universe, opts);
            Output out(out_path);
            out.stream() << report.dump(2) << '\n';
            if (!report["numerical"]["converged"].get<bool>()) {
                std::cerr << "kelly-lab: numerical solver did not reach the requested residual ("
                          << report["numerical"]["kkt_residual"].get<double>() << ")\n";
                return kExitNoConvergence;
            }
        } else if (*frontier) {
            const kelly::AssetUniverse universe = kelly::load_universe(universe_path);
            frontier_opts.with_lef = frontier_lef;
            frontier_opts.method = resolve_method(frontier_method, universe);
            Output out(out_path);
            kelly::write_frontier_csv(universe, out.stream(), frontier_opts);
        } else if (*lef) {
            const kelly::AssetUniverse universe = kelly::load_universe(universe_path);
            Output out(out_path);
            kelly::write_lef_csv(universe, out.stream(), lef_points,
                                 resolve_method(lef_method, universe), lef_no_short);
        } else if (*phase) {
            Output out(out_path);
            kelly::write_phase_grid_csv(out.stream(), phase_d1, phase_d2, phase_lo, phase_hi,
                                        phase_cells);
        } else if (*uniform) {
            if (!uni_seed) throw kelly::ConfigError("condense uniform needs --seed");
            Output out(out_path);
            std::vector<double> l_grid;
            for (int i = 0; i < uni_l_points; ++i)
                l_grid.push_back(uni_l_min + (uni_l_max - uni_l_min) * i /
                                 std::max(1, uni_l_points - 1));
            kelly::write_uniform_study_csv(out.stream(), *uni_seed, uni_assets, uni_d, uni_x,
                                           l_grid, uni_reps);
        } else if (*powerlaw) {
            if (!pl_seed) throw kelly::ConfigError("condense powerlaw needs --seed");
            Output out(out_path);
            std::vector<double> d_grid;
            for (int i = 0; i < pl_d_points; ++i)
                d_grid.push_back(pl_d_min + (pl_d_max - pl_d_min) * i /
                                 std::max(1, pl_d_points - 1));
            kelly::write_powerlaw_study_csv(out.stream(), *pl_seed, pl_assets, pl_r, pl_m_min,
                                            d_grid, pl_trials);
        } else if (*simulate) {
            if (!sim_seed) throw kelly::ConfigError("simulate needs --seed");
            const kelly::AssetUniverse universe = kelly::load_universe(universe_path);
            kelly::SolverOptions opts;
            simulate_method.seed = simulate_method.seed ? simulate_method.seed : sim_seed;
            opts.method = resolve_method(simulate_method, universe);
            const kelly::NumericalSolution kelly_solution = kelly::kelly_numerical(universe, opts);
            if (!kelly_solution.converged) {
                std::cerr << "kelly-lab: numerical solver did not converge\n";
                return kExitNoConvergence;
            }
            std::vector<std::string> names{"kelly", "cash"};
            std::vector<std::vector<double>> strategies{
                kelly_solution.fractions, std::vector<double>(universe.size(), 0.0)};
            for (std::size_t i = 0; i < sim_compare.size(); ++i) {
                std::vector<double> q = parse_fraction_list(sim_compare[i]);
                if (q.size() != universe.size())
                    throw kelly::ConfigError("comparison portfolio length does not match universe");
                if (auto bad = kelly::validate_portfolio(q, kelly::ConstraintPolicy::NoShortNoBorrow))
                    throw kelly::ConfigError("invalid comparison portfolio: " + bad->describe());
                names.push_back("user" + std::to_string(i + 1));
                strategies.push_back(std::move(q));
            }
            const auto results = kelly::simulate_growth(universe, strategies, sim_horizon,
                                                        sim_paths, *sim_seed, sim_threads);
            Output out(out_path);
            kelly::write_growth_csv(out.stream(), names, results);
            if (!sim_dump_paths.empty()) {
                // same seed, so these are exactly the first paths of the run
                const auto paths = kelly::simulate_paths(
                    universe, sim_horizon, std::min(sim_dump_count, sim_paths), *sim_seed,
                    sim_threads);
                Output dump(sim_dump_paths);
                kelly::write_paths_csv(paths, dump.stream());
            }
        } else if (*figure) {
            if ((figure_id == 5 || figure_id == 6) && !figure_seed)
                throw kelly::ConfigError("figure " + std::to_string(figure_id) + " needs --seed");
            figure_opts.seed = figure_seed.value_or(0);
            Output out(out_path);
            kelly::write_figure_csv(figure_id, out.stream(), figure_opts);
        }
    } catch (const kelly::ConfigError& e) {
        std::cerr << "kelly-lab: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "kelly-lab: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "kelly-lab: " << e.what() << '\n';
        return kExitNoConvergence;
    }
    return kExitOk;
}

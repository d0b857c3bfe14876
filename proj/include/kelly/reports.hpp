#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kelly/expectation.hpp"
#include "kelly/io.hpp"
#include "kelly/kelly_solver.hpp"
#include "kelly/markowitz.hpp"
#include "kelly/model.hpp"
#include "kelly/simulate.hpp"

namespace kelly {

/// One document with every solver's answer for a universe: raw fractions,
/// the closed-form constrained solution, the numerical optimum, the
/// mean-variance fractions at the growth-optimal return, and the
/// growth-optimal point itself.
inline nlohmann::ordered_json optimize_report(const AssetUniverse& universe,
                                              const SolverOptions& opts = {}) {
    nlohmann::ordered_json doc;
    doc["unconstrained"] = kelly_unconstrained(universe);

    const ConstrainedSolution constrained = kelly_constrained(universe);
    const GrowthStats constrained_stats =
        growth_stats(Portfolio{constrained.fractions, ConstraintPolicy::NoShortNoBorrow}, universe,
                     opts.method);
    doc["constrained"] = {{"fractions", constrained.fractions},
                          {"gamma", constrained.gamma ? nlohmann::ordered_json(*constrained.gamma)
                                                      : nlohmann::ordered_json(nullptr)},
                          {"active_set", constrained.active_set},
                          {"binding", constrained.binding},
                          {"v", constrained_stats.v}};

    const NumericalSolution numeric = kelly_numerical(universe, opts);
    doc["numerical"] = {{"fractions", numeric.fractions},
                        {"v", numeric.growth},
                        {"kkt_residual", numeric.kkt_residual},
                        {"iterations", numeric.iterations},
                        {"converged", numeric.converged}};

    if (constrained.active_set.empty()) {
        // nothing profitable: the optimum is all cash and has no frontier point
        doc["mv_at_kelly_mu"] = nullptr;
        doc["kelly_point"] = nullptr;
        return doc;
    }
    const KellyPoint point = kelly_point(universe);
    doc["mv_at_kelly_mu"] = {{"mu_target", point.mu_k},
                             {"fractions", mv_fractions(universe, point.mu_k)}};
    doc["kelly_point"] = {{"mu", point.mu_k},
                          {"sigma", point.sigma_k},
                          {"active_set", point.active_set}};
    return doc;
}

/// Growth comparison table for `simulate`: per-strategy mean log-growth and
/// the paired difference against the first (reference) strategy.
inline void write_growth_csv(std::ostream& out, const std::vector<std::string>& names,
                             const std::vector<StrategyGrowth>& results) {
    CsvWriter csv(out);
    csv.header({"strategy", "mean_log_growth", "std_error", "diff_vs_first", "diff_std_error"});
    for (std::size_t i = 0; i < results.size(); ++i)
        csv.row(names.at(i), results[i].mean_log_growth, results[i].std_error,
                results[i].mean_diff_vs_first, results[i].diff_std_error);
}

}  // namespace kelly

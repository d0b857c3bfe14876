#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "kelly/counter_rng.hpp"
#include "kelly/model.hpp"

namespace kelly {

namespace detail {

inline constexpr std::uint64_t kPathStreamTag = 0x53494dULL;
inline constexpr std::size_t kPathBlock = 1024;

// Runs fn(block_index, first_path, last_path) over fixed-size path blocks.
// Blocks are handed out by an atomic counter but identified by their index,
// so any per-block results can be combined in a thread-independent order.
template <typename Fn>
void for_each_path_block(std::size_t n_paths, int n_threads, Fn fn) {
    const std::size_t n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;
    if (n_threads <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b)
            fn(b, b * kPathBlock, std::min(n_paths, (b + 1) * kPathBlock));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            fn(b, b * kPathBlock, std::min(n_paths, (b + 1) * kPathBlock));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace detail

/// Simulated price paths p_i(t), p_i(0) = 1, one multiplicative Gaussian
/// step per period. Values depend only on (seed, path, step, asset), never
/// on the thread count.
struct PricePaths {
    std::size_t n_paths = 0;
    std::size_t horizon = 0;
    std::size_t n_assets = 0;
    std::uint64_t seed = 0;
    std::vector<double> data;  // [path][t][asset]

    double price(std::size_t path, std::size_t t, std::size_t asset) const {
        return data[(path * (horizon + 1) + t) * n_assets + asset];
    }
};

inline PricePaths simulate_paths(const AssetUniverse& universe, std::size_t horizon,
                                 std::size_t n_paths, std::uint64_t seed, int n_threads = 1) {
    if (horizon < 1 || n_paths < 1) throw std::invalid_argument("horizon and n_paths must be >= 1");
    const std::size_t n = universe.size();
    const Eigen::MatrixXd& factor = universe.noise_factor();
    const Eigen::VectorXd means = universe.log_means();
    const auto rank = factor.cols();
    const CounterRng rng = CounterRng(seed).derive(detail::kPathStreamTag);

    PricePaths paths;
    paths.n_paths = n_paths;
    paths.horizon = horizon;
    paths.n_assets = n;
    paths.seed = seed;
    paths.data.assign(n_paths * (horizon + 1) * n, 0.0);

    detail::for_each_path_block(n_paths, n_threads, [&](std::size_t, std::size_t first,
                                                        std::size_t last) {
        Eigen::VectorXd z(rank), eta(static_cast<Eigen::Index>(n));
        for (std::size_t p = first; p < last; ++p) {
            double* row = &paths.data[p * (horizon + 1) * n];
            for (std::size_t a = 0; a < n; ++a) row[a] = 1.0;
            for (std::size_t t = 1; t <= horizon; ++t) {
                for (Eigen::Index k = 0; k < rank; ++k)
                    z[k] = rng.normal(p, t, static_cast<std::uint64_t>(k));
                eta = means + factor * z;
                const double* prev = row + (t - 1) * n;
                double* cur = row + t * n;
                for (std::size_t a = 0; a < n; ++a) cur[a] = prev[a] * std::exp(eta[static_cast<Eigen::Index>(a)]);
            }
        }
    });
    return paths;
}

/// Mean per-step log-growth of fixed-fraction strategies on common random
/// paths. The first strategy is the reference for the paired differences.
struct StrategyGrowth {
    std::vector<double> fractions;
    double mean_log_growth = 0.0;
    double std_error = 0.0;
    double mean_diff_vs_first = 0.0;  // this strategy minus the first
    double diff_std_error = 0.0;
};

inline std::vector<StrategyGrowth> simulate_growth(const AssetUniverse& universe,
                                                   const std::vector<std::vector<double>>& strategies,
                                                   std::size_t horizon, std::size_t n_paths,
                                                   std::uint64_t seed, int n_threads = 1) {
    if (strategies.empty()) throw std::invalid_argument("need at least one strategy");
    if (horizon < 1 || n_paths < 2) throw std::invalid_argument("need horizon >= 1, n_paths >= 2");
    const std::size_t n = universe.size();
    for (const auto& q : strategies) {
        if (q.size() != n) throw std::invalid_argument("strategy length does not match universe");
        if (auto bad = validate_portfolio(q, ConstraintPolicy::NoShortNoBorrow))
            throw std::invalid_argument("invalid comparison portfolio: " + bad->describe());
    }

    const Eigen::MatrixXd& factor = universe.noise_factor();
    const Eigen::VectorXd means = universe.log_means();
    const auto rank = factor.cols();
    const CounterRng rng = CounterRng(seed).derive(detail::kPathStreamTag);
    const std::size_t s_count = strategies.size();
    const std::size_t n_blocks = (n_paths + detail::kPathBlock - 1) / detail::kPathBlock;

    // per-block partial sums, combined in block order afterwards
    struct Partial {
        std::vector<double> sum, sum_sq, dsum, dsum_sq;
    };
    std::vector<Partial> partials(n_blocks);

    detail::for_each_path_block(n_paths, n_threads, [&](std::size_t block, std::size_t first,
                                                        std::size_t last) {
        Partial part;
        part.sum.assign(s_count, 0.0);
        part.sum_sq.assign(s_count, 0.0);
        part.dsum.assign(s_count, 0.0);
        part.dsum_sq.assign(s_count, 0.0);
        Eigen::VectorXd z(rank), eta(static_cast<Eigen::Index>(n));
        std::vector<double> log_wealth(s_count);
        std::vector<double> returns(n);
        for (std::size_t p = first; p < last; ++p) {
            std::fill(log_wealth.begin(), log_wealth.end(), 0.0);
            for (std::size_t t = 1; t <= horizon; ++t) {
                for (Eigen::Index k = 0; k < rank; ++k)
                    z[k] = rng.normal(p, t, static_cast<std::uint64_t>(k));
                eta = means + factor * z;
                for (std::size_t a = 0; a < n; ++a)
                    returns[a] = std::expm1(eta[static_cast<Eigen::Index>(a)]);
                for (std::size_t s = 0; s < s_count; ++s) {
                    double w = 1.0;
                    const auto& q = strategies[s];
                    for (std::size_t a = 0; a < n; ++a) w += q[a] * returns[a];
                    log_wealth[s] += std::log(w);
                }
            }
            const double g0 = log_wealth[0] / static_cast<double>(horizon);
            for (std::size_t s = 0; s < s_count; ++s) {
                const double g = log_wealth[s] / static_cast<double>(horizon);
                part.sum[s] += g;
                part.sum_sq[s] += g * g;
                const double d = g - g0;
                part.dsum[s] += d;
                part.dsum_sq[s] += d * d;
            }
        }
        partials[block] = std::move(part);
    });

    std::vector<double> sum(s_count, 0.0), sum_sq(s_count, 0.0), dsum(s_count, 0.0),
        dsum_sq(s_count, 0.0);
    for (const Partial& part : partials) {
        if (part.sum.empty()) continue;
        for (std::size_t s = 0; s < s_count; ++s) {
            sum[s] += part.sum[s];
            sum_sq[s] += part.sum_sq[s];
            dsum[s] += part.dsum[s];
            dsum_sq[s] += part.dsum_sq[s];
        }
    }

    const double count = static_cast<double>(n_paths);
    std::vector<StrategyGrowth> out(s_count);
    for (std::size_t s = 0; s < s_count; ++s) {
        StrategyGrowth& g = out[s];
        g.fractions = strategies[s];
        g.mean_log_growth = sum[s] / count;
        const double var = std::max(0.0, (sum_sq[s] - count * g.mean_log_growth * g.mean_log_growth) /
                                             (count - 1.0));
        g.std_error = std::sqrt(var / count);
        g.mean_diff_vs_first = dsum[s] / count;
        const double dvar = std::max(
            0.0, (dsum_sq[s] - count * g.mean_diff_vs_first * g.mean_diff_vs_first) / (count - 1.0));
        g.diff_std_error = std::sqrt(dvar / count);
    }
    return out;
}

}  // namespace kelly

#pragma once

// Robustness measurements on top of either engine: critical attack size by
// bisection, attack sweeps, FCC heatmaps and strategy comparison tables.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "cascade/core.hpp"
#include "cascade/meanfield.hpp"
#include "cascade/montecarlo.hpp"
#include "cascade/strategies.hpp"

namespace cascade {

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// written by index so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; !failed && (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct RunResult {
    double surviving = 1.0;  // surviving fraction of the whole system
    bool breakdown = false;
};

/// A batch of replicate runs at a given attack. Mean-field runners have one
/// replicate; Monte-Carlo runners one per seed.
struct Runner {
    std::size_t replicates = 1;
    std::function<RunResult(const AttackSpec&, std::size_t)> run;
};

inline Runner mean_field_runner(std::vector<NetworkConfig> cfg, CouplingStrategy strategy,
                                std::size_t max_steps = kDefaultMaxSteps) {
    return {1, [cfg = std::move(cfg), strategy = std::move(strategy), max_steps](const AttackSpec& a, std::size_t) {
                const auto tr = mf_run(cfg, a, strategy, max_steps);
                return RunResult{tr.system_surviving_fraction, tr.outcome == Outcome::Breakdown};
            }};
}

/// Replicates over pre-sampled systems (populations and graphs reused across
/// attacks and strategies).
inline Runner monte_carlo_runner(std::shared_ptr<const std::vector<McSystem>> systems, CouplingStrategy strategy,
                                 std::size_t max_steps = kDefaultMaxSteps) {
    const auto n = systems->size();
    return {n, [systems = std::move(systems), strategy = std::move(strategy), max_steps](const AttackSpec& a,
                                                                                         std::size_t i) {
                const auto o = mc_simulate((*systems)[i], a, strategy, {false, max_steps});
                return RunResult{o.system_surviving_fraction, o.breakdown};
            }};
}

/// Replicates sampled on demand from base_seed + i; lighter on memory.
inline Runner monte_carlo_runner(std::vector<NetworkConfig> cfg, CouplingStrategy strategy, std::uint64_t base_seed,
                                 std::size_t replicates, std::size_t max_steps = kDefaultMaxSteps) {
    return {replicates, [cfg = std::move(cfg), strategy = std::move(strategy), base_seed, max_steps](
                            const AttackSpec& a, std::size_t i) {
                const auto o = mc_run(cfg, a, strategy, base_seed + i, false, max_steps);
                return RunResult{o.system_surviving_fraction, o.breakdown};
            }};
}

inline std::shared_ptr<const std::vector<McSystem>> prepare_systems(const std::vector<NetworkConfig>& cfg,
                                                                    std::uint64_t base_seed, std::size_t count,
                                                                    std::size_t threads = 1) {
    auto v = std::make_shared<std::vector<McSystem>>(count);
    parallel_for(count, threads, [&](std::size_t i) { (*v)[i] = mc_prepare(cfg, base_seed + i); });
    return v;
}

// ---------------------------------------------------------------------------
// Critical attack size
// ---------------------------------------------------------------------------

/// Majority of replicates break down. Stops as soon as the vote is decided.
inline bool breaks_down(const Runner& runner, const AttackSpec& attack, std::size_t threads = 1) {
    const std::size_t n = runner.replicates;
    if (threads <= 1) {
        std::size_t yes = 0, no = 0;
        for (std::size_t i = 0; i < n; ++i) {
            (runner.run(attack, i).breakdown ? yes : no) += 1;
            if (2 * yes > n) return true;
            if (2 * no >= n) return false;
        }
        return 2 * yes > n;
    }
    std::vector<char> b(n);
    parallel_for(n, threads, [&](std::size_t i) { b[i] = runner.run(attack, i).breakdown; });
    return 2 * static_cast<std::size_t>(std::count(b.begin(), b.end(), 1)) > n;
}

struct CriticalResult {
    double size = 1.0;
    bool no_breakdown = false;  // the full-scale attack did not break the system
    std::size_t evaluations = 0;
};

/// Bisection on the attack scale s in [0,1], attack = s * shape, down to an
/// interval of width <= tol; returns its midpoint.
inline CriticalResult critical_attack_size(const Runner& runner, const std::vector<double>& shape, double tol = 1e-3,
                                           std::size_t threads = 1) {
    if (!(tol > 0.0)) throw CascadeError("tolerance must be positive");
    CriticalResult r;
    auto breaks = [&](double s) {
        ++r.evaluations;
        return breaks_down(runner, AttackSpec::scaled(shape, s), threads);
    };
    if (!breaks(1.0)) {
        r.size = 1.0;
        r.no_breakdown = true;
        return r;
    }
    double lo = 0.0, hi = 1.0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (breaks(mid)) hi = mid;
        else lo = mid;
    }
    r.size = 0.5 * (lo + hi);
    return r;
}

/// Post-hoc check that s - tol survives and s + tol breaks.
inline bool verify_bracket(const Runner& runner, const std::vector<double>& shape, double s, double tol,
                           std::size_t threads = 1) {
    const double below = std::max(0.0, s - tol), above = std::min(1.0, s + tol);
    return !breaks_down(runner, AttackSpec::scaled(shape, below), threads) &&
           breaks_down(runner, AttackSpec::scaled(shape, above), threads);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepResult {
    std::vector<double> attack;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::size_t> runs;
};

inline SweepResult attack_sweep(const Runner& runner, const std::vector<double>& shape,
                                const std::vector<double>& grid, std::size_t threads = 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw CascadeError("attack grid must lie in [0,1]");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw CascadeError("attack grid must be strictly increasing");
    }
    const std::size_t reps = runner.replicates;
    std::vector<double> values(grid.size() * reps);
    parallel_for(values.size(), threads, [&](std::size_t idx) {
        values[idx] = runner.run(AttackSpec::scaled(shape, grid[idx / reps]), idx % reps).surviving;
    });
    SweepResult r;
    r.attack = grid;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double sum = 0.0;
        for (std::size_t i = 0; i < reps; ++i) sum += values[g * reps + i];
        const double mean = sum / static_cast<double>(reps);
        double ss = 0.0;
        for (std::size_t i = 0; i < reps; ++i) ss += (values[g * reps + i] - mean) * (values[g * reps + i] - mean);
        r.mean.push_back(mean);
        r.stddev.push_back(reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0);
        r.runs.push_back(reps);
    }
    return r;
}

inline std::vector<double> regular_grid(double lo, double hi, double step) {
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(std::min(hi, lo + static_cast<double>(i) * step));
    return g;
}

struct HeatmapResult {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> cells;  // cells[i * beta.size() + j] for (alpha[i], beta[j])
    double clip_floor = 0.0;

    double at(std::size_t i, std::size_t j) const { return cells[i * beta.size() + j]; }

    struct Best {
        double alpha, beta, critical;
    };
    /// Largest critical size; ties go to the smallest alpha, then beta.
    Best best() const {
        Best b{alpha.at(0), beta.at(0), at(0, 0)};
        for (std::size_t i = 0; i < alpha.size(); ++i)
            for (std::size_t j = 0; j < beta.size(); ++j)
                if (at(i, j) > b.critical) b = {alpha[i], beta[j], at(i, j)};
        return b;
    }
};

using RunnerFactory = std::function<Runner(const CouplingStrategy&)>;

inline HeatmapResult fcc_grid_sweep(const RunnerFactory& factory, const std::vector<double>& shape,
                                    const std::vector<double>& alpha_grid, const std::vector<double>& beta_grid,
                                    double clip_floor = 0.0, double tol = 1e-3, std::size_t threads = 1) {
    HeatmapResult h;
    h.alpha = alpha_grid;
    h.beta = beta_grid;
    h.clip_floor = clip_floor;
    h.cells.assign(alpha_grid.size() * beta_grid.size(), 0.0);
    parallel_for(h.cells.size(), threads, [&](std::size_t idx) {
        const double a = alpha_grid[idx / beta_grid.size()];
        const double b = beta_grid[idx % beta_grid.size()];
        const auto runner = factory(FixedCoupling{CouplingMatrix::two_network(a, b)});
        h.cells[idx] = std::max(clip_floor, critical_attack_size(runner, shape, tol).size);
    });
    return h;
}

/// Full grid over [0,1]^2 at the given resolution (0.05 gives 21 x 21 cells).
inline HeatmapResult fcc_grid_sweep(const RunnerFactory& factory, const std::vector<double>& shape, double resolution,
                                    double clip_floor = 0.0, double tol = 1e-3, std::size_t threads = 1) {
    if (!(resolution > 0.0) || std::abs(1.0 / resolution - std::round(1.0 / resolution)) > 1e-9)
        throw CascadeError("heatmap resolution must divide 1 evenly");
    const auto g = regular_grid(0.0, 1.0, resolution);
    return fcc_grid_sweep(factory, shape, g, g, clip_floor, tol, threads);
}

struct NamedStrategy {
    std::string name;
    CouplingStrategy strategy;
};

struct StrategyReport {
    std::string name;
    SweepResult sweep;
    CriticalResult critical;
};

/// Every strategy runs on the same replicate populations (the factory is
/// expected to close over one shared batch).
inline std::vector<StrategyReport> compare_strategies(const RunnerFactory& factory,
                                                      const std::vector<NamedStrategy>& strategies,
                                                      const std::vector<double>& shape,
                                                      const std::vector<double>& grid, double tol = 1e-3,
                                                      std::size_t threads = 1) {
    std::vector<StrategyReport> out;
    for (const auto& s : strategies) {
        const auto runner = factory(s.strategy);
        StrategyReport r;
        r.name = s.name;
        if (!grid.empty()) r.sweep = attack_sweep(runner, shape, grid, threads);
        r.critical = critical_attack_size(runner, shape, tol, threads);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline void write_sweep_csv(std::ostream& os, const SweepResult& r) {
    const auto old = os.precision(17);
    os << "attack,mean_fraction,std,n_runs\n";
    for (std::size_t i = 0; i < r.attack.size(); ++i)
        os << r.attack[i] << ',' << r.mean[i] << ',' << r.stddev[i] << ',' << r.runs[i] << '\n';
    os.precision(old);
}

inline void write_heatmap_csv(std::ostream& os, const HeatmapResult& h) {
    const auto old = os.precision(17);
    os << "alpha,beta,critical_size\n";
    for (std::size_t i = 0; i < h.alpha.size(); ++i)
        for (std::size_t j = 0; j < h.beta.size(); ++j) os << h.alpha[i] << ',' << h.beta[j] << ',' << h.at(i, j) << '\n';
    os.precision(old);
}

inline void write_comparison_csv(std::ostream& os, const std::vector<StrategyReport>& reports) {
    const auto old = os.precision(17);
    os << "strategy,critical_size,no_breakdown,attack,mean_fraction,std,n_runs\n";
    for (const auto& r : reports) {
        if (r.sweep.attack.empty()) {
            os << r.name << ',' << r.critical.size << ',' << r.critical.no_breakdown << ",,,,\n";
            continue;
        }
        for (std::size_t i = 0; i < r.sweep.attack.size(); ++i)
            os << r.name << ',' << r.critical.size << ',' << r.critical.no_breakdown << ',' << r.sweep.attack[i] << ','
               << r.sweep.mean[i] << ',' << r.sweep.stddev[i] << ',' << r.sweep.runs[i] << '\n';
    }
    os.precision(old);
}

}  // namespace cascade

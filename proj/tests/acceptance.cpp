// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance            all criteria
//   acceptance 2 4 7      a subset
//
// Monte-Carlo at N = 1e5 per network. Critical sizes and sweeps use 100
// seeds on complete graphs; grid searches and every graph-topology batch use
// 20 seeds (100 pre-sampled ER/BA systems do not fit in memory).

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cascade/cascade.hpp"
#include "support.hpp"

using namespace cascade;

namespace {

constexpr std::size_t kNodes = 100000;
constexpr std::size_t kSeeds = 100;
constexpr std::size_t kGridSeeds = 20;
constexpr double kTol = 1e-3;

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const char* fmt, ...) __attribute__((format(printf, 3, 4))) {
        char buf[512];
        va_list ap;
        va_start(ap, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, ap);
        va_end(ap);
        if (!detail.empty()) detail += "; ";
        detail += buf;
        if (!cond) {
            detail += " [x]";
            ok = false;
        }
    }
};

double critical(const Runner& r, const std::vector<double>& shape = {1, 0}) {
    return critical_attack_size(r, shape, kTol, threads()).size;
}

std::vector<double> grid_01() {
    std::vector<double> g;
    for (int i = 1; i <= 9; ++i) g.push_back(0.1 * i);
    return g;
}

// ---------------------------------------------------------------------------

Check non_identical_swo_vs_best_fcc() {
    Check c;
    const auto cfg = fixtures::non_identical(kNodes);
    const auto full = prepare_systems(cfg, 1, kSeeds, threads());
    const auto few = std::make_shared<const std::vector<McSystem>>(full->begin(), full->begin() + kGridSeeds);

    const double swo = critical(monte_carlo_runner(full, StepwiseOptimization{}));
    const double sbd = critical(monte_carlo_runner(full, SizeBasedDynamic{}));

    const RunnerFactory factory = [&](const CouplingStrategy& s) { return monte_carlo_runner(few, s); };
    const auto h = fcc_grid_sweep(factory, {1, 0}, 0.05, 0.0, kTol, threads());
    const auto b = h.best();
    const double fcc = critical(monte_carlo_runner(full, FixedCoupling{CouplingMatrix::two_network(b.alpha, b.beta)}));

    std::printf("    sbd %.4f, best fcc cell (%.2f, %.2f) at %.4f on %zu seeds\n", sbd, b.alpha, b.beta, b.critical,
                kGridSeeds);
    c.expect(std::abs(swo - 0.634) <= 0.01, "swo %.4f vs 0.634", swo);
    c.expect(std::abs(fcc - 0.632) <= 0.01, "best fcc %.4f vs 0.632", fcc);
    return c;
}

Check identical_swo_matches_sbd() {
    Check c;
    const auto grid = regular_grid(0.0, 1.0, 0.05);
    StepwiseOptimization exp_swo;
    exp_swo.resolution = 0.01;
    const std::pair<const char*, std::vector<NetworkConfig>> settings[] = {
        {"uniform", fixtures::identical_uniform(kNodes)}, {"exponential", fixtures::identical_exponential(kNodes)}};
    for (const auto& [name, cfg] : settings) {
        const auto sys = prepare_systems(cfg, 1, kSeeds, threads());
        const auto a = attack_sweep(monte_carlo_runner(sys, SizeBasedDynamic{}), {1, 0}, grid, threads());
        const auto b = attack_sweep(monte_carlo_runner(sys, exp_swo), {1, 0}, grid, threads());
        double worst = 0.0, at = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (std::abs(a.mean[i] - b.mean[i]) > worst) {
                worst = std::abs(a.mean[i] - b.mean[i]);
                at = grid[i];
            }
        c.expect(worst <= 0.005, "%s max |swo - sbd| %.5f at %.2f", name, worst, at);
    }
    return c;
}

Check light_load_fcc_family() {
    Check c;
    const auto cfg = fixtures::light_load(kNodes);
    const auto sys = prepare_systems(cfg, 1, kSeeds, threads());
    double best = -1.0, best_x = 0.0;
    std::printf("   ");
    for (int i = 0; i <= 20; ++i) {
        const double x = 0.05 * i;
        const double v = critical(monte_carlo_runner(sys, FixedCoupling{CouplingMatrix::two_network(x, x)}));
        std::printf(" %.2f:%.3f", x, v);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    std::printf("\n");
    const double swo = critical(monte_carlo_runner(sys, StepwiseOptimization{}));
    const double sbd = critical(monte_carlo_runner(sys, SizeBasedDynamic{}));
    c.expect(std::abs(best_x - 0.65) <= 0.05 + 1e-9, "best fcc x=%.2f (%.4f) vs 0.65", best_x, best);
    c.expect(swo > best && sbd > best, "swo %.4f sbd %.4f above best fcc %.4f", swo, sbd, best);
    return c;
}

Check mean_field_matches_monte_carlo() {
    Check c;
    std::vector<double> grid;
    for (int i = 1; i <= 20; ++i) grid.push_back(0.05 * i);
    const std::pair<const char*, std::vector<NetworkConfig>> settings[] = {
        {"uniform", fixtures::identical_uniform(kNodes)},
        {"non-identical", fixtures::non_identical(kNodes)},
        {"exponential", fixtures::identical_exponential(kNodes)}};
    for (const auto& [name, cfg] : settings) {
        const auto sys = prepare_systems(cfg, 1, kSeeds, threads());
        const auto mc = attack_sweep(monte_carlo_runner(sys, SizeBasedDynamic{}), {1, 0}, grid, threads());
        const auto mf = attack_sweep(mean_field_runner(cfg, SizeBasedDynamic{}), {1, 0}, grid);
        double worst = 0.0, at = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (std::abs(mc.mean[i] - mf.mean[i]) > worst) {
                worst = std::abs(mc.mean[i] - mf.mean[i]);
                at = grid[i];
            }
        c.expect(worst <= 0.005, "%s max |mf - mc| %.5f at %.2f", name, worst, at);
    }
    return c;
}

Check topology_heatmap(Topology a, Topology b, double want_alpha, double want_beta, double want_fcc,
                       double want_swo) {
    Check c;
    auto cfg = fixtures::identical_uniform(kNodes);
    cfg[0].topology = a;
    cfg[1].topology = b;
    const auto t0 = std::chrono::steady_clock::now();
    const auto sys = prepare_systems(cfg, 1, kGridSeeds, threads());
    const RunnerFactory factory = [&](const CouplingStrategy& s) { return monte_carlo_runner(sys, s); };
    const auto g = grid_01();
    const auto h = fcc_grid_sweep(factory, {1, 0}, g, g, 0.0, kTol, threads());
    const double elapsed = seconds_since(t0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::printf("    a=%.1f", g[i]);
        for (std::size_t j = 0; j < g.size(); ++j) std::printf(" %.3f", h.at(i, j));
        std::printf("\n");
    }
    const auto best = h.best();
    const double swo = critical(monte_carlo_runner(sys, StepwiseOptimization{}));
    c.expect(std::abs(best.alpha - want_alpha) <= 0.1 + 1e-9 && std::abs(best.beta - want_beta) <= 0.1 + 1e-9,
             "optimum (%.1f, %.1f) vs (%.1f, %.1f)", best.alpha, best.beta, want_alpha, want_beta);
    c.expect(std::abs(best.critical - want_fcc) <= 0.03, "best fcc %.4f vs %.3f", best.critical, want_fcc);
    c.expect(std::abs(swo - want_swo) <= 0.03, "swo %.4f vs %.3f", swo, want_swo);
    c.expect(elapsed < 1800.0, "9x9 grid in %.0f s", elapsed);
    return c;
}

Check properties() {
    Check c;
    const auto states = fixtures::reachable_uniform_states(1000, 41);

    // (a) Hessian of the quadratic model is positive semidefinite.
    std::size_t bad = 0;
    for (const auto& v : states) {
        const auto k = swo_build_uniform(v);
        const double scale = 4 * k.K_alpha2 * k.K_beta2 + k.K_alphabeta * k.K_alphabeta;
        if (k.K_alpha2 < 0 || k.K_beta2 < 0 || k.hessian_det() < -1e-9 * scale) ++bad;
    }
    c.expect(bad == 0, "(a) hessian psd %zu/%zu", states.size() - bad, states.size());

    // (b) box solver against a brute-force grid of the objective written from the cdf.
    auto oracle = [](const SystemView& s, double al, double be) {
        const double fa = s.net[0].pool, fb = s.net[1].pool;
        const double in[2] = {al * fa + (1 - be) * fb, (1 - al) * fa + be * fb};
        double total = 0.0;
        for (int k = 0; k < 2; ++k) {
            const auto& v = s.net[k];
            const double q = v.q_cum, d = in[k] / v.n_alive;
            total += v.n_alive * (v.space.cdf(q + d) - v.space.cdf(q)) / (1.0 - v.space.cdf(q)) * (v.load_mean + q + d);
        }
        return total;
    };
    std::size_t compared = 0, worse = 0;
    for (const auto& v : states) {
        const auto k = swo_build_uniform(v);
        if (!k.exact_on({0, 1}, {0, 1})) continue;
        if (++compared > 60) break;
        const auto box = swo_solve_box(k, {0, 1}, {0, 1});
        double grid_min = oracle(v, 0, 0);
        for (int i = 0; i <= 400; ++i)
            for (int j = 0; j <= 400; ++j) grid_min = std::min(grid_min, oracle(v, i / 400.0, j / 400.0));
        if (oracle(v, box.alpha, box.beta) > grid_min + 1e-9 * std::max(1.0, grid_min)) ++worse;
    }
    compared = std::min<std::size_t>(compared, 60);
    c.expect(compared >= 20 && worse == 0, "(b) box <= grid on %zu states, %zu worse", compared, worse);

    // (c) load conservation per Monte-Carlo step.
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u01(0, 1);
    double drift = 0.0;
    for (const auto& [ta, tb] : std::vector<std::pair<Topology, Topology>>{
             {CompleteGraph{}, CompleteGraph{}}, {ErdosRenyi{10}, ErdosRenyi{20}}, {BarabasiAlbert{10}, ErdosRenyi{5}}})
        for (int trial = 0; trial < 10; ++trial) {
            const std::vector<NetworkConfig> cfg{{20000, Distribution::uniform(5, 25), Distribution::uniform(10, 90), ta},
                                                 {20000, Distribution::point(15), Distribution::uniform(5, 120), tb}};
            const auto sys = mc_prepare(cfg, 100 + trial);
            auto s = mc_attack(sys, AttackSpec{{0.2 + 0.8 * u01(rng), 0.5 * u01(rng)}});
            const auto m = CouplingMatrix::two_network(u01(rng), u01(rng));
            const double total = mc_total_load(sys, s);
            for (int step = 0; step < 500; ++step) {
                const auto d = sys.local() ? mc_step_local(sys, s, m) : mc_step_complete(sys, s, m);
                if (!d) break;
                drift = std::max(drift, std::abs(mc_total_load(sys, s) - total) / total);
                if (*d == 0 && s.net[0].passthrough == 0 && s.net[1].passthrough == 0) break;
            }
        }
    c.expect(drift <= 1e-6, "(c) max relative load drift %.2e", drift);

    // (d) monotone f and Q in mean-field runs.
    std::size_t runs = 0, broken = 0;
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<NetworkConfig> cfg(2);
        for (auto& n : cfg) {
            n.node_count = 1000 + static_cast<std::size_t>(u01(rng) * 1e6);
            const double lo = 40 * u01(rng);
            n.space = u01(rng) < 0.7 ? Distribution::uniform(lo, lo + 20 + 200 * u01(rng))
                                     : Distribution::shifted_exponential(lo, 1.0 / (20 + 150 * u01(rng)));
            n.load = Distribution::point(5 + 80 * u01(rng));
        }
        const AttackSpec attack{{u01(rng), u01(rng) < 0.5 ? 0.0 : u01(rng)}};
        const CouplingStrategy st = u01(rng) < 0.5 ? CouplingStrategy{SizeBasedDynamic{}}
                                                   : CouplingStrategy{FixedCoupling{CouplingMatrix::two_network(u01(rng), u01(rng))}};
        const auto tr = mf_run(cfg, attack, st);
        ++runs;
        for (std::size_t t = 1; t < tr.steps.size(); ++t)
            for (int k = 0; k < 2; ++k)
                if (tr.steps[t].net[k].f < tr.steps[t - 1].net[k].f - 1e-15 ||
                    tr.steps[t].net[k].q_cum < tr.steps[t - 1].net[k].q_cum) {
                    ++broken;
                    t = tr.steps.size();
                    break;
                }
    }
    c.expect(broken == 0, "(d) monotone in %zu/%zu runs", runs - broken, runs);

    // (e) graph mode on an explicit complete graph equals complete mode.
    std::size_t mismatches = 0, compared_runs = 0;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const std::vector<NetworkConfig> cfg(2, {100, Distribution::uniform(5, 25), Distribution::uniform(2, 60), CompleteGraph{}});
        const auto global = mc_prepare_with_graphs(cfg, seed, {Adjacency::complete_sentinel(100), Adjacency::complete_sentinel(100)});
        const auto local = mc_prepare_with_graphs(cfg, seed, {Adjacency::explicit_complete(100), Adjacency::explicit_complete(100)});
        for (const auto& st : std::vector<CouplingStrategy>{FixedCoupling{CouplingMatrix::two_network(0.3, 0.8)}, SizeBasedDynamic{}}) {
            const AttackSpec attack{{0.3, 0.05}};
            const auto a = mc_simulate(global, attack, st, {true, 1000});
            const auto b = mc_simulate(local, attack, st, {true, 1000});
            ++compared_runs;
            bool same = a.trajectory.size() == b.trajectory.size() && a.surviving_fraction == b.surviving_fraction;
            for (std::size_t t = 0; same && t < a.trajectory.size(); ++t)
                for (int k = 0; k < 2; ++k) {
                    const auto& x = a.trajectory[t].net[k];
                    const auto& y = b.trajectory[t].net[k];
                    same = same && x.n_alive == y.n_alive && std::abs(x.q_cum - y.q_cum) <= 1e-9 * std::max(1.0, x.q_cum);
                }
            mismatches += !same;
        }
    }
    c.expect(mismatches == 0, "(e) local == complete in %zu/%zu runs", compared_runs - mismatches, compared_runs);

    // (f) size-based coupling gives every network the same increment.
    double spread = 0.0;
    for (double p : {0.3, 0.5, 0.6, 0.7}) {
        const auto tr = mf_run(fixtures::non_identical(kNodes), AttackSpec{{p, 0}}, SizeBasedDynamic{});
        for (const auto& s : tr.steps)
            if (s.net[0].n_alive >= 1 && s.net[1].n_alive >= 1)
                spread = std::max(spread, std::abs(s.net[0].q_step - s.net[1].q_step) / std::max(1.0, s.net[0].q_step));
    }
    c.expect(spread <= 1e-12, "(f) sbd increment spread %.1e", spread);

    // (g) four nodes by hand: loads {4,6,2,12}, spaces {3,5,9,50}, node 3 removed.
    {
        NodePopulation p;
        p.load = {4, 6, 2, 12};
        p.space = {3, 5, 9, 50};
        p.adj = Adjacency::complete_sentinel(4);
        p.by_space = {0, 1, 2, 3};
        McSystem sys;
        sys.cfg.push_back({4, Distribution::point(1), Distribution::uniform(0, 1), CompleteGraph{}});
        sys.pop.push_back(p);
        auto s = mc_initial_state(sys);
        s.net[0].alive[3] = 0;
        s.net[0].n_alive = 3;
        s.net[0].newly_dead = {3};
        s.net[0].carried = {12};
        s.net[0].pool = 12;
        const auto m = CouplingMatrix::identity(1);
        std::vector<double> q, pool;
        while (auto d = mc_step_complete(sys, s, m)) {
            q.push_back(s.net[0].q_cum);
            pool.push_back(s.net[0].pool);
        }
        c.expect(q == std::vector<double>{4, 8, 22} && pool == std::vector<double>{8, 14, 24},
                 "(g) hand trace Q %s", q == std::vector<double>{4, 8, 22} ? "4,8,22" : "differs");
    }

    // (h) one-key random key graph recursion equals the single-network mean field.
    double gap = 0.0;
    for (double p : {0.1, 0.2, 0.25, 0.3}) {
        const auto load = Distribution::point(75);
        const auto space = Distribution::uniform(20, 180);
        const auto mf = mf_run({{1000000, load, space, CompleteGraph{}}}, AttackSpec{{p}}, SizeBasedDynamic{});
        const auto rk = rkg_run(p, 1, load, space);
        for (std::size_t t = 0; t < std::min(mf.steps.size(), rk.q.size()); ++t)
            gap = std::max(gap, std::abs(rk.q[t] - mf.steps[t].net[0].q_cum) / std::max(1.0, rk.q[t]));
    }
    c.expect(gap <= 1e-9, "(h) rkg vs mean field %.1e", gap);
    return c;
}

Check er_degree_monotone() {
    Check c;
    std::vector<double> crit;
    for (double d : {0.0, 10.0, 20.0, 30.0, 40.0}) {
        auto cfg = fixtures::identical_uniform(kNodes);
        if (d > 0) cfg[1].topology = ErdosRenyi{d};
        const auto sys = prepare_systems(cfg, 1, kGridSeeds, threads());
        crit.push_back(critical(monte_carlo_runner(sys, StepwiseOptimization{})));
    }
    bool monotone = true;
    for (std::size_t i = 2; i < crit.size(); ++i) monotone = monotone && crit[i] >= crit[i - 1];
    c.expect(monotone, "er 10/20/30/40: %.4f %.4f %.4f %.4f", crit[1], crit[2], crit[3], crit[4]);
    c.expect(std::abs(crit[4] - crit[0]) <= 0.02, "degree 40 %.4f vs complete %.4f", crit[4], crit[0]);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Check()>>> criteria{
        {"non-identical: swo and best fcc critical sizes", non_identical_swo_vs_best_fcc},
        {"identical: swo and sbd sweeps agree", identical_swo_matches_sbd},
        {"light load: fcc(x,x) optimum and dynamic strategies above it", light_load_fcc_family},
        {"mean field matches monte carlo", mean_field_matches_monte_carlo},
        {"er/er heatmap and swo",
         [] { return topology_heatmap(ErdosRenyi{20}, ErdosRenyi{40}, 0.4, 0.9, 0.52, 0.49); }},
        {"ba/ba heatmap and swo",
         [] { return topology_heatmap(BarabasiAlbert{20}, BarabasiAlbert{40}, 0.5, 0.9, 0.42, 0.396); }},
        {"property suite", properties},
        {"er degree monotonicity", er_degree_monotone},
    };

    std::set<std::size_t> wanted;
    for (int i = 1; i < argc; ++i) {
        const long k = std::strtol(argv[i], nullptr, 10);
        if (k < 1 || k > static_cast<long>(criteria.size())) {
            std::fprintf(stderr, "unknown criterion %s\n", argv[i]);
            return 2;
        }
        wanted.insert(static_cast<std::size_t>(k));
    }

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!wanted.empty() && !wanted.count(i + 1)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Check c;
        try {
            c = criteria[i].second();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("error: ") + e.what();
        }
        std::printf("%s %zu %s: %s (%.0f s)\n", c.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, c.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        failures += !c.ok;
    }
    return failures ? 1 : 0;
}

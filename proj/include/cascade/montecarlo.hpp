#pragma once

// Node-level cascade simulation.
//
// Complete topology: every survivor of a network receives the same share, so
// a single per-network offset `global` carries all received load and deaths
// are found by walking the nodes in order of free space.
//
// Graph topology: a failing node hands its in-net share to its live
// neighbours and its out-net share to the node with the same index in the
// other network plus that node's live neighbours. Empty target sets fall back
// to the whole network (again through `global`). Those fallbacks are rare, so
// a step that raises the offset simply rescans every live node.
//
// A node dies when everything it received exceeds its free space (strict).
// Deaths within a step are simultaneous.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "cascade/core.hpp"
#include "cascade/graph.hpp"
#include "cascade/meanfield.hpp"
#include "cascade/strategies.hpp"

namespace cascade {

/// Sampled network: per-node load and free space plus adjacency. Immutable
/// once built; shared by every run that starts from it.
struct NodePopulation {
    std::vector<double> load;
    std::vector<double> space;
    Adjacency adj;
    std::vector<std::uint32_t> by_space;  // node indices, ascending free space

    std::size_t size() const { return load.size(); }
    double capacity(std::size_t v) const { return load[v] + space[v]; }
};

inline NodePopulation sample_population(const NetworkConfig& cfg, std::uint64_t seed, Adjacency adj) {
    NodePopulation p;
    const std::size_t n = cfg.node_count;
    std::mt19937_64 rng_load(derive_seed(seed, 0x10AD));
    std::mt19937_64 rng_space(derive_seed(seed, 0x5BACE));
    p.load.resize(n);
    p.space.resize(n);
    for (std::size_t v = 0; v < n; ++v) p.load[v] = cfg.load.sample(rng_load);
    for (std::size_t v = 0; v < n; ++v) p.space[v] = cfg.space.sample(rng_space);
    p.adj = std::move(adj);
    if (p.adj.node_count() != n) throw CascadeError("adjacency size does not match node count");
    p.by_space.resize(n);
    std::iota(p.by_space.begin(), p.by_space.end(), 0u);
    std::stable_sort(p.by_space.begin(), p.by_space.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return p.space[a] < p.space[b]; });
    return p;
}

struct McSystem {
    std::vector<NetworkConfig> cfg;
    std::vector<NodePopulation> pop;
    std::uint64_t seed = 0;

    std::size_t size() const { return pop.size(); }
    bool local() const {
        for (const auto& p : pop)
            if (!p.adj.is_complete_sentinel()) return true;
        return false;
    }
};

/// Samples every network (loads, spaces, topology) from the base seed.
inline McSystem mc_prepare(const std::vector<NetworkConfig>& cfg, std::uint64_t seed) {
    if (cfg.empty()) throw CascadeError("at least one network is required");
    McSystem s;
    s.cfg = cfg;
    s.seed = seed;
    for (std::size_t k = 0; k < cfg.size(); ++k) {
        cfg[k].validate();
        auto adj = generate_graph(cfg[k].topology, cfg[k].node_count, derive_seed(seed, k, 1));
        s.pop.push_back(sample_population(cfg[k], derive_seed(seed, k, 0), std::move(adj)));
    }
    if (s.local())
        for (const auto& c : cfg)
            if (c.node_count != cfg[0].node_count)
                throw CascadeError("local redistribution pairs nodes by index and needs equal node counts");
    return s;
}

/// Same as mc_prepare but with caller-supplied adjacency per network.
inline McSystem mc_prepare_with_graphs(const std::vector<NetworkConfig>& cfg, std::uint64_t seed,
                                       std::vector<Adjacency> graphs) {
    if (graphs.size() != cfg.size()) throw CascadeError("one adjacency per network is required");
    McSystem s;
    s.cfg = cfg;
    s.seed = seed;
    for (std::size_t k = 0; k < cfg.size(); ++k) {
        cfg[k].validate();
        s.pop.push_back(sample_population(cfg[k], derive_seed(seed, k, 0), std::move(graphs[k])));
    }
    if (s.local())
        for (const auto& c : cfg)
            if (c.node_count != cfg[0].node_count)
                throw CascadeError("local redistribution pairs nodes by index and needs equal node counts");
    return s;
}

// ---------------------------------------------------------------------------
// Run state
// ---------------------------------------------------------------------------

struct NetworkRunState {
    std::vector<double> received;     // load delivered to this node specifically
    std::vector<std::uint8_t> alive;
    double global = 0.0;              // load delivered to every node of the network
    std::size_t n_alive = 0;
    std::size_t cursor = 0;           // complete mode: position in by_space
    double pool = 0.0;                // load released by the nodes that just died
    std::vector<std::uint32_t> newly_dead;
    std::vector<double> carried;      // per newly dead node: load + everything received
    double q_cum = 0.0;
    double q_step = 0.0;
    double passthrough = 0.0;         // load sent here after every node died; forwarded next step

    // graph mode bookkeeping
    std::vector<std::uint32_t> touched;
    std::vector<std::uint8_t> is_touched;
};

struct McState {
    std::size_t t = 0;
    std::vector<NetworkRunState> net;
};

/// Kills exactly round(p*N) nodes chosen uniformly at random. The chosen set
/// is a prefix of one seeded permutation, so larger attacks contain smaller
/// ones. Returns the pool (sum of the removed loads).
inline double apply_attack(const NodePopulation& pop, NetworkRunState& st, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw CascadeError("attack fraction must lie in [0,1]");
    const std::size_t n = pop.size();
    const auto kill = static_cast<std::size_t>(std::llround(p * static_cast<double>(n)));
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::mt19937_64 rng(seed);
    double pool = 0.0;
    for (std::size_t i = 0; i < kill; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
        const auto v = idx[i];
        if (!st.alive[v]) continue;
        st.alive[v] = 0;
        --st.n_alive;
        st.newly_dead.push_back(v);
        st.carried.push_back(pop.load[v]);
        pool += pop.load[v];
    }
    st.pool += pool;
    return pool;
}

inline McState mc_initial_state(const McSystem& sys) {
    McState s;
    s.net.resize(sys.size());
    const bool local = sys.local();
    for (std::size_t k = 0; k < sys.size(); ++k) {
        auto& st = s.net[k];
        const auto n = sys.pop[k].size();
        st.alive.assign(n, 1);
        st.n_alive = n;
        if (local) {
            st.received.assign(n, 0.0);
            st.is_touched.assign(n, 0);
        }
    }
    return s;
}

inline McState mc_attack(const McSystem& sys, const AttackSpec& attack) {
    attack.validate(sys.size());
    auto s = mc_initial_state(sys);
    for (std::size_t k = 0; k < sys.size(); ++k)
        apply_attack(sys.pop[k], s.net[k], attack.p[k], derive_seed(sys.seed, k, 2));
    return s;
}

/// Live load plus outstanding pools; constant across steps.
inline double mc_total_load(const McSystem& sys, const McState& s) {
    double total = 0.0;
    for (std::size_t k = 0; k < sys.size(); ++k) {
        const auto& st = s.net[k];
        const auto& pop = sys.pop[k];
        for (std::size_t v = 0; v < pop.size(); ++v)
            if (st.alive[v]) total += pop.load[v] + st.global + (st.received.empty() ? 0.0 : st.received[v]);
        total += st.pool + st.passthrough;
    }
    return total;
}

inline SystemView mc_view(const McSystem& sys, const McState& s) {
    SystemView v;
    v.t = s.t;
    v.net.resize(sys.size());
    for (std::size_t k = 0; k < sys.size(); ++k) {
        const auto& st = s.net[k];
        const double nn = static_cast<double>(sys.pop[k].size());
        auto& w = v.net[k];
        w.n_alive = static_cast<double>(st.n_alive);
        w.q_cum = st.q_cum;
        w.q_step = st.q_step;
        w.f = 1.0 - w.n_alive / nn;
        w.node_count = nn;
        w.pool = st.pool + st.passthrough;
        w.load_mean = sys.cfg[k].load.mean();
        w.space = sys.cfg[k].space;
    }
    return v;
}

namespace detail {

inline bool any_alive(const McState& s) {
    for (const auto& st : s.net)
        if (st.n_alive > 0) return true;
    return false;
}

/// The coupling with every dead network's row spread over the live networks
/// only (renormalized). A dead row with no mass on live networks is spread in
/// proportion to survivor counts. Rows of live networks are left alone.
inline CouplingMatrix dead_rows_over_live(const McState& s, const CouplingMatrix& coupling) {
    const std::size_t n = s.net.size();
    if (coupling.size() != n) throw CascadeError("coupling dimension does not match network count");
    CouplingMatrix out = coupling;
    double alive_total = 0.0;
    for (const auto& st : s.net) alive_total += static_cast<double>(st.n_alive);
    for (std::size_t i = 0; i < n; ++i) {
        if (s.net[i].n_alive > 0) continue;
        double row = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (s.net[k].n_alive > 0) row += coupling(i, k);
        for (std::size_t k = 0; k < n; ++k) {
            const double alive = static_cast<double>(s.net[k].n_alive);
            if (alive == 0.0) out(i, k) = 0.0;
            else out(i, k) = row > 0.0 ? coupling(i, k) / row : alive / alive_total;
        }
    }
    return out;
}

inline void kill(const NodePopulation& pop, NetworkRunState& st, std::uint32_t v) {
    st.alive[v] = 0;
    --st.n_alive;
    const double carried = pop.load[v] + st.global + (st.received.empty() ? 0.0 : st.received[v]);
    st.newly_dead.push_back(v);
    st.carried.push_back(carried);
    st.pool += carried;
}

}  // namespace detail

/// One complete-mode step: place every pool, then remove the nodes whose free
/// space is now exceeded. Returns the number of deaths, or nullopt when no
/// network has survivors left to take the load.
inline std::optional<std::size_t> mc_step_complete(const McSystem& sys, McState& s, const CouplingMatrix& coupling) {
    const std::size_t n = sys.size();
    for (const auto& st : s.net)
        if (st.pool < 0.0) throw CascadeError("negative pool");
    if (!detail::any_alive(s)) return std::nullopt;
    const auto rows = detail::dead_rows_over_live(s, coupling);

    std::vector<double> inbound(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) inbound[k] += (s.net[i].pool + s.net[i].passthrough) * rows(i, k);

    for (std::size_t k = 0; k < n; ++k) {
        auto& st = s.net[k];
        st.pool = 0.0;
        st.newly_dead.clear();
        st.carried.clear();
        st.passthrough = 0.0;
        if (st.n_alive == 0) {
            st.passthrough = inbound[k];
            st.q_step = 0.0;
            continue;
        }
        st.q_step = inbound[k] / static_cast<double>(st.n_alive);
        st.q_cum += st.q_step;
        st.global += st.q_step;
    }
    std::size_t deaths = 0;
    for (std::size_t k = 0; k < n; ++k) {
        auto& st = s.net[k];
        const auto& pop = sys.pop[k];
        while (st.cursor < pop.size() && pop.space[pop.by_space[st.cursor]] < st.global) {
            const auto v = pop.by_space[st.cursor++];
            if (!st.alive[v]) continue;
            detail::kill(pop, st, v);
            ++deaths;
        }
    }
    ++s.t;
    return deaths;
}

/// One graph-mode step: spread the carried load of every node that died in
/// the previous step, then evaluate deaths simultaneously.
inline std::optional<std::size_t> mc_step_local(const McSystem& sys, McState& s, const CouplingMatrix& coupling) {
    const std::size_t n = sys.size();
    if (!detail::any_alive(s)) return std::nullopt;
    const auto rows = detail::dead_rows_over_live(s, coupling);

    std::vector<double> to_global(n, 0.0), delivered(n, 0.0);
    auto give = [&](std::size_t j, std::uint32_t u, double amount) {
        auto& st = s.net[j];
        st.received[u] += amount;
        if (!st.is_touched[u]) {
            st.is_touched[u] = 1;
            st.touched.push_back(u);
        }
    };
    // Splits `amount` over the live members of `targets` (plus `extra` if live),
    // falling back to the whole of network j.
    auto spread = [&](std::size_t j, std::span<const std::uint32_t> targets, std::optional<std::uint32_t> extra,
                      double amount) {
        delivered[j] += amount;
        const auto& st = s.net[j];
        if (sys.pop[j].adj.is_complete_sentinel()) {
            to_global[j] += amount;
            return;
        }
        std::size_t count = (extra && st.alive[*extra]) ? 1 : 0;
        for (auto u : targets) count += st.alive[u];
        if (count == 0) {
            to_global[j] += amount;
            return;
        }
        const double share = amount / static_cast<double>(count);
        if (extra && st.alive[*extra]) give(j, *extra, share);
        for (auto u : targets)
            if (st.alive[u]) give(j, u, share);
    };

    std::vector<std::vector<std::uint32_t>> dead(n);
    std::vector<std::vector<double>> carried(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& st = s.net[i];
        if (st.pool < 0.0) throw CascadeError("negative pool");
        dead[i] = std::move(st.newly_dead);
        carried[i] = std::move(st.carried);
        st.newly_dead.clear();
        st.carried.clear();
        st.pool = 0.0;
    }
    // Load parked in dead networks goes to every live node of the targets.
    for (std::size_t i = 0; i < n; ++i) {
        const double l = s.net[i].passthrough;
        s.net[i].passthrough = 0.0;
        if (l <= 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            const double amount = rows(i, j) * l;
            if (amount <= 0.0) continue;
            delivered[j] += amount;
            to_global[j] += amount;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dead[i].size(); ++d) {
            const auto v = dead[i][d];
            const double l = carried[i][d];
            for (std::size_t j = 0; j < n; ++j) {
                const double amount = rows(i, j) * l;
                if (amount <= 0.0) continue;
                if (j == i) {
                    const auto nb = sys.pop[i].adj.is_complete_sentinel() ? std::span<const std::uint32_t>{}
                                                                            : sys.pop[i].adj.neighbors(v);
                    spread(i, nb, std::nullopt, amount);
                } else {
                    const auto nb = sys.pop[j].adj.is_complete_sentinel() ? std::span<const std::uint32_t>{}
                                                                            : sys.pop[j].adj.neighbors(v);
                    spread(j, nb, v, amount);
                }
            }
        }
    }

    std::size_t deaths = 0;
    for (std::size_t k = 0; k < n; ++k) {
        auto& st = s.net[k];
        const auto& pop = sys.pop[k];
        if (st.n_alive == 0) {
            st.passthrough = delivered[k];
            st.q_step = 0.0;
            for (auto u : st.touched) st.is_touched[u] = 0;
            st.touched.clear();
            continue;
        }
        st.q_step = delivered[k] / static_cast<double>(st.n_alive);
        st.q_cum += st.q_step;
        st.global += to_global[k] / static_cast<double>(st.n_alive);

        // Evaluate against the final state of the step, then apply.
        std::vector<std::uint32_t> dying;
        if (to_global[k] > 0.0) {
            for (std::uint32_t u = 0; u < pop.size(); ++u)
                if (st.alive[u] && pop.space[u] - st.received[u] < st.global) dying.push_back(u);
        } else {
            for (auto u : st.touched)
                if (st.alive[u] && pop.space[u] - st.received[u] < st.global) dying.push_back(u);
        }
        for (auto u : st.touched) st.is_touched[u] = 0;
        st.touched.clear();
        std::sort(dying.begin(), dying.end());
        for (auto u : dying) detail::kill(pop, st, u);
        deaths += dying.size();
    }
    ++s.t;
    return deaths;
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

struct SimOutcome {
    std::vector<double> surviving_fraction;
    double system_surviving_fraction = 0.0;
    std::size_t steps = 0;
    bool breakdown = false;
    Outcome outcome = Outcome::Survived;
    std::vector<MeanFieldState> trajectory;  // filled when recording
};

struct McOptions {
    bool record_trajectory = false;
    std::size_t max_steps = kDefaultMaxSteps;
};

inline SimOutcome mc_simulate(const McSystem& sys, const AttackSpec& attack, const CouplingStrategy& strategy,
                              McOptions opt = {}) {
    auto s = mc_attack(sys, attack);
    const bool local = sys.local();
    const std::size_t n = sys.size();
    SimOutcome out;

    auto snapshot = [&](const std::vector<double>& placed) {
        MeanFieldState m;
        m.t = s.t == 0 ? 0 : s.t - 1;
        m.net.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& st = s.net[k];
            const double nn = static_cast<double>(sys.pop[k].size());
            m.net[k].n_alive = static_cast<double>(st.n_alive);
            m.net[k].f = 1.0 - m.net[k].n_alive / nn;
            m.net[k].total_extra = placed[k];
            m.net[k].q_step = st.q_step;
            m.net[k].q_cum = st.q_cum;
        }
        return m;
    };
    auto finish = [&](Outcome o) {
        out.outcome = o;
        out.steps = s.t;
        double alive = 0.0, total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double nn = static_cast<double>(sys.pop[k].size());
            out.surviving_fraction.push_back(static_cast<double>(s.net[k].n_alive) / nn);
            alive += static_cast<double>(s.net[k].n_alive);
            total += nn;
        }
        out.system_surviving_fraction = alive / total;
        out.breakdown = alive == 0.0;
        return out;
    };

    for (std::size_t step = 0; step < opt.max_steps; ++step) {
        bool any_pool = false;
        for (const auto& st : s.net) any_pool = any_pool || st.pool > 0.0 || st.passthrough > 0.0;
        bool any_alive = false;
        for (const auto& st : s.net) any_alive = any_alive || st.n_alive > 0;
        if (!any_alive) return finish(Outcome::Breakdown);
        if (!any_pool) return finish(step == 0 ? Outcome::NoCascade : Outcome::Survived);

        std::vector<double> placed(n);
        std::vector<std::size_t> alive_before(n);
        for (std::size_t k = 0; k < n; ++k) {
            placed[k] = s.net[k].pool + s.net[k].passthrough;
            alive_before[k] = s.net[k].n_alive;
        }
        const auto decision = decide(strategy, mc_view(sys, s));
        const auto deaths = local ? mc_step_local(sys, s, decision.matrix) : mc_step_complete(sys, s, decision.matrix);
        if (opt.record_trajectory) {
            auto snap = snapshot(placed);
            for (std::size_t k = 0; k < n; ++k) {
                snap.net[k].n_alive = static_cast<double>(alive_before[k]);
                snap.net[k].f = 1.0 - snap.net[k].n_alive / static_cast<double>(sys.pop[k].size());
            }
            out.trajectory.push_back(std::move(snap));
        }
        if (!deaths) return finish(Outcome::Breakdown);
        bool parked = false;
        for (const auto& st : s.net) parked = parked || st.passthrough > 0.0;
        if (*deaths == 0 && !parked) {
            bool any_alive_now = false;
            for (const auto& st : s.net) any_alive_now = any_alive_now || st.n_alive > 0;
            return finish(any_alive_now ? (step == 0 ? Outcome::NoCascade : Outcome::Survived) : Outcome::Breakdown);
        }
    }
    return finish(Outcome::NonConverged);
}

inline SimOutcome mc_run(const std::vector<NetworkConfig>& cfg, const AttackSpec& attack,
                         const CouplingStrategy& strategy, std::uint64_t seed, bool record_trajectory = false,
                         std::size_t max_steps = kDefaultMaxSteps) {
    const auto sys = mc_prepare(cfg, seed);
    return mc_simulate(sys, attack, strategy, {record_trajectory, max_steps});
}

}  // namespace cascade

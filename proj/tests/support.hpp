#pragma once

// Shared fixtures: the standard experiment settings and a generator of
// states actually visited by mean-field runs.

#include <random>
#include <vector>

#include "cascade/meanfield.hpp"
#include "cascade/strategies.hpp"

namespace fixtures {

using namespace cascade;

inline std::vector<NetworkConfig> identical(std::size_t n, Distribution load, Distribution space) {
    return std::vector<NetworkConfig>(2, NetworkConfig{n, load, space, CompleteGraph{}});
}

inline std::vector<NetworkConfig> identical_uniform(std::size_t n) {
    return identical(n, Distribution::point(75), Distribution::uniform(20, 180));
}

inline std::vector<NetworkConfig> identical_exponential(std::size_t n) {
    return identical(n, Distribution::point(60), Distribution::shifted_exponential(20, 1.0 / 120));
}

inline std::vector<NetworkConfig> non_identical(std::size_t n) {
    return {NetworkConfig{n, Distribution::point(75), Distribution::uniform(20, 180), CompleteGraph{}},
            NetworkConfig{n, Distribution::point(75), Distribution::uniform(40, 280), CompleteGraph{}}};
}

inline std::vector<NetworkConfig> light_load(std::size_t n) {
    return identical(n, Distribution::uniform(10, 30), Distribution::uniform(10, 65));
}

/// Strategy views taken from mean-field runs with random uniform settings,
/// random attacks and random fixed couplings. Only views with load to place
/// and two live networks are kept.
inline std::vector<SystemView> reachable_uniform_states(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<SystemView> out;
    while (out.size() < count) {
        std::vector<NetworkConfig> cfg(2);
        for (auto& c : cfg) {
            c.node_count = static_cast<std::size_t>(1000 + u01(rng) * 1e6);
            const double lo = 50 * u01(rng);
            c.space = Distribution::uniform(lo, lo + 20 + 200 * u01(rng));
            const double l = 5 + 80 * u01(rng);
            c.load = u01(rng) < 0.5 ? Distribution::point(l) : Distribution::uniform(0.5 * l, 1.5 * l);
        }
        AttackSpec attack{{0.9 * u01(rng), u01(rng) < 0.5 ? 0.0 : 0.9 * u01(rng)}};
        const auto m = CouplingMatrix::two_network(u01(rng), u01(rng));

        auto s = mf_init(cfg, attack, m);
        std::vector<double> q2(2, 0.0);
        for (int t = 1; t < 60 && out.size() < count; ++t) {
            auto cur = mf_advance(cfg, attack, s, q2);
            q2 = {s.net[0].q_cum, s.net[1].q_cum};
            const auto view = mf_view(cfg, attack, cur);
            if (view.net[0].n_alive < 1 || view.net[1].n_alive < 1) break;
            if (view.net[0].pool + view.net[1].pool <= 0) break;
            out.push_back(view);
            mf_redistribute(cur, m);
            s = cur;
        }
    }
    return out;
}

}  // namespace fixtures

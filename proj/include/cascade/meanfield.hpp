#pragma once

// Mean-field recursion over per-network aggregates.
//
// At step t, with Q the cumulative extra load per surviving node:
//   f_t = 1 - (1-p) P[S >= Q_{t-1}]
//   N_t = (1-f_t) N
//   F_t = N (1-p) P[Q_{t-2} < S <= Q_{t-1}] (E[L] + Q_{t-1})
//   dQ_t = (load routed into the network) / N_t,   Q_t = Q_{t-1} + dQ_t
// Load sent to a network with no survivors has nowhere to go: it is absorbed
// and that network's Q becomes +inf.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "cascade/core.hpp"
#include "cascade/strategies.hpp"

namespace cascade {

enum class Outcome { NoCascade, Survived, Breakdown, NonConverged };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::NoCascade: return "NoCascade";
        case Outcome::Survived: return "Survived";
        case Outcome::Breakdown: return "Breakdown";
        case Outcome::NonConverged: return "NonConverged";
    }
    return "?";
}

enum class InitiationCase { Case1, Case2, Case3 };

struct Initiation {
    InitiationCase kind = InitiationCase::Case1;
    std::vector<std::size_t> triggered;  // networks whose Q0 reaches their smallest free space
};

struct MeanFieldTrajectory {
    std::vector<MeanFieldState> steps;
    Outcome outcome = Outcome::NoCascade;
    std::size_t steps_taken = 0;
    std::vector<double> surviving_fraction;  // per network, n_alive / N at the end
    double system_surviving_fraction = 0.0;  // sum n_alive / sum N

    const MeanFieldState& final_state() const { return steps.back(); }
};

inline constexpr std::size_t kDefaultMaxSteps = 100000;

namespace detail {

/// P[S >= x], keeping the atom of a point mass.
inline double prob_at_least(const Distribution& d, double x) {
    if (const auto* pm = d.get_if<PointMass>()) return x <= pm->value ? 1.0 : 0.0;
    return d.survival(x);
}

inline void check_inputs(const std::vector<NetworkConfig>& cfg, const AttackSpec& attack) {
    if (cfg.empty()) throw CascadeError("at least one network is required");
    for (const auto& c : cfg) c.validate();
    attack.validate(cfg.size());
}

}  // namespace detail

/// Places each network's released load F through the coupling matrix and
/// updates q_step / q_cum. Returns false when no network has survivors.
inline bool mf_redistribute(MeanFieldState& s, const CouplingMatrix& coupling) {
    const std::size_t n = s.net.size();
    if (coupling.size() != n) throw CascadeError("coupling dimension does not match network count");
    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
        auto& a = s.net[k];
        double inbound = 0.0;
        for (std::size_t i = 0; i < n; ++i) inbound += s.net[i].total_extra * coupling(i, k);
        if (a.n_alive > 0.0) {
            a.q_step = inbound / a.n_alive;
        } else {
            a.q_step = inbound > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        }
        a.q_cum += a.q_step;
        any = any || a.n_alive >= 1.0;
    }
    return any;
}

/// t=0: attacked nodes fail and their loads are placed through the coupling.
inline MeanFieldState mf_init(const std::vector<NetworkConfig>& cfg, const AttackSpec& attack,
                              const CouplingMatrix& coupling) {
    detail::check_inputs(cfg, attack);
    if (auto v = validate_coupling(coupling)) throw CascadeError("invalid coupling: " + v->message);
    MeanFieldState s;
    s.t = 0;
    s.net.resize(cfg.size());
    for (std::size_t k = 0; k < cfg.size(); ++k) {
        const double nn = static_cast<double>(cfg[k].node_count);
        auto& a = s.net[k];
        a.f = attack.p[k];
        a.n_alive = (1.0 - attack.p[k]) * nn;
        a.total_extra = nn * attack.p[k] * cfg[k].load.mean();
    }
    mf_redistribute(s, coupling);
    return s;
}

inline Initiation mf_classify_initiation(const MeanFieldState& state0, const std::vector<double>& space_min) {
    if (space_min.size() != state0.net.size()) throw CascadeError("space_min dimension mismatch");
    Initiation r;
    for (std::size_t k = 0; k < space_min.size(); ++k)
        if (state0.net[k].q_cum >= space_min[k]) r.triggered.push_back(k);
    if (r.triggered.empty()) r.kind = InitiationCase::Case1;
    else if (r.triggered.size() == space_min.size()) r.kind = InitiationCase::Case3;
    else r.kind = InitiationCase::Case2;
    return r;
}

inline Initiation mf_classify_initiation(const MeanFieldState& state0, const std::vector<NetworkConfig>& cfg) {
    std::vector<double> smin;
    for (const auto& c : cfg) smin.push_back(c.space.support_min());
    return mf_classify_initiation(state0, smin);
}

/// First half of a step: failures caused by Q_{t-1}, and the load they
/// release. q_cum still holds Q_{t-1}; q_step still holds dQ_{t-1}.
inline MeanFieldState mf_advance(const std::vector<NetworkConfig>& cfg, const AttackSpec& attack,
                                 const MeanFieldState& prev, const std::vector<double>& prev2_qcum) {
    if (prev.net.size() != cfg.size() || prev2_qcum.size() != cfg.size())
        throw CascadeError("state dimension does not match network count");
    MeanFieldState s;
    s.t = prev.t + 1;
    s.net.resize(cfg.size());
    for (std::size_t k = 0; k < cfg.size(); ++k) {
        const double nn = static_cast<double>(cfg[k].node_count);
        const double p = attack.p[k];
        const double q1 = prev.net[k].q_cum;
        const double q2 = prev2_qcum[k];
        const double s1 = detail::prob_at_least(cfg[k].space, q1);
        const double s2 = detail::prob_at_least(cfg[k].space, q2);
        auto& a = s.net[k];
        a.f = 1.0 - (1.0 - p) * s1;
        a.n_alive = (1.0 - a.f) * nn;
        const double failing = (1.0 - p) * std::max(0.0, s2 - s1);
        a.total_extra = failing > 0.0 ? nn * failing * (cfg[k].load.mean() + q1) : 0.0;
        a.q_cum = q1;
        a.q_step = prev.net[k].q_step;
    }
    return s;
}

inline MeanFieldState mf_step(const std::vector<NetworkConfig>& cfg, const AttackSpec& attack,
                              const MeanFieldState& prev, const std::vector<double>& prev2_qcum,
                              const CouplingMatrix& coupling) {
    auto s = mf_advance(cfg, attack, prev, prev2_qcum);
    mf_redistribute(s, coupling);
    return s;
}

/// What a strategy sees after the failures of step t, before placement.
inline SystemView mf_view(const std::vector<NetworkConfig>& cfg, const AttackSpec& attack,
                          const MeanFieldState& partial) {
    SystemView v;
    v.t = partial.t;
    v.net.resize(cfg.size());
    for (std::size_t k = 0; k < cfg.size(); ++k) {
        const auto& a = partial.net[k];
        auto& w = v.net[k];
        w.n_alive = a.n_alive;
        w.q_cum = a.q_cum;
        w.q_step = a.q_step;
        w.f = a.f;
        w.p = attack.p[k];
        w.node_count = static_cast<double>(cfg[k].node_count);
        w.pool = a.total_extra;
        w.load_mean = cfg[k].load.mean();
        w.space = cfg[k].space;
    }
    return v;
}

inline MeanFieldTrajectory mf_run(const std::vector<NetworkConfig>& cfg, const AttackSpec& attack,
                                  const CouplingStrategy& strategy, std::size_t max_steps = kDefaultMaxSteps) {
    if (max_steps < 1) throw CascadeError("max_steps must be >= 1");
    detail::check_inputs(cfg, attack);
    const std::size_t n = cfg.size();
    MeanFieldTrajectory tr;

    auto finish = [&](Outcome o) {
        tr.outcome = o;
        tr.steps_taken = tr.steps.back().t;
        double alive = 0.0, total = 0.0;
        tr.surviving_fraction.clear();
        for (std::size_t k = 0; k < n; ++k) {
            const double nn = static_cast<double>(cfg[k].node_count);
            const double a = tr.steps.back().net[k].n_alive;
            tr.surviving_fraction.push_back(a / nn);
            alive += a;
            total += nn;
        }
        tr.system_surviving_fraction = alive / total;
        return tr;
    };
    auto all_dead = [&](const MeanFieldState& s) {
        for (const auto& a : s.net)
            if (a.n_alive >= 1.0) return false;
        return true;
    };

    // t = 0
    MeanFieldState s0;
    s0.net.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double nn = static_cast<double>(cfg[k].node_count);
        s0.net[k].f = attack.p[k];
        s0.net[k].n_alive = (1.0 - attack.p[k]) * nn;
        s0.net[k].total_extra = nn * attack.p[k] * cfg[k].load.mean();
    }
    if (all_dead(s0)) {
        tr.steps.push_back(s0);
        return finish(Outcome::Breakdown);
    }
    double pool = 0.0;
    for (const auto& a : s0.net) pool += a.total_extra;
    mf_redistribute(s0, decide(strategy, mf_view(cfg, attack, s0)).matrix);
    tr.steps.push_back(s0);
    if (pool <= 0.0 || mf_classify_initiation(s0, cfg).kind == InitiationCase::Case1)
        return finish(Outcome::NoCascade);

    std::vector<double> q_prev2(n, 0.0);
    for (std::size_t step = 1; step <= max_steps; ++step) {
        const auto& prev = tr.steps.back();
        auto cur = mf_advance(cfg, attack, prev, q_prev2);
        for (std::size_t k = 0; k < n; ++k) q_prev2[k] = prev.net[k].q_cum;
        if (all_dead(cur)) {
            for (auto& a : cur.net) a.q_step = 0.0;
            tr.steps.push_back(std::move(cur));
            return finish(Outcome::Breakdown);
        }
        mf_redistribute(cur, decide(strategy, mf_view(cfg, attack, cur)).matrix);
        bool settled = true;
        for (std::size_t k = 0; k < n; ++k)
            if (std::abs(cur.net[k].n_alive - prev.net[k].n_alive) >= 1.0) settled = false;
        tr.steps.push_back(std::move(cur));
        if (settled) return finish(Outcome::Survived);
    }
    return finish(Outcome::NonConverged);
}

// ---------------------------------------------------------------------------
// Random key graph, identical groups
// ---------------------------------------------------------------------------

/// One step of the identical-group recursion. Each surviving node holds m keys
/// and receives m*Q; nodes with free space in (m*q_prev2, m*q_prev] fail now
/// and spread (E[L] + m*q_prev) over the m*P[S > m*q_prev] survivors' keys.
/// Returns nullopt when nobody survives.
inline std::optional<double> rkg_identical_step(double q_prev, double m, const Distribution& load,
                                                const Distribution& space, double q_prev2 = 0.0) {
    if (!(m > 0.0)) throw CascadeError("keys per node must be positive");
    const double surv = detail::prob_at_least(space, m * q_prev);
    if (!(surv > 0.0)) return std::nullopt;
    const double failing = std::max(0.0, detail::prob_at_least(space, m * q_prev2) - surv);
    return q_prev + (load.mean() + m * q_prev) * failing / (m * surv);
}

/// Per-key load right after attacking a fraction p of the nodes.
inline double rkg_initial_q(double p, double m, const Distribution& load) {
    if (!(p < 1.0)) throw CascadeError("attack must leave survivors");
    return load.mean() * p / ((1.0 - p) * m);
}

struct RkgTrajectory {
    std::vector<double> q;  // q[0] is the post-attack value
    bool breakdown = false;
    double surviving_fraction = 0.0;
};

inline RkgTrajectory rkg_run(double p, double m, const Distribution& load, const Distribution& space,
                             std::size_t max_steps = kDefaultMaxSteps, double tol = 1e-12) {
    RkgTrajectory r;
    if (p >= 1.0) {
        r.breakdown = true;
        return r;
    }
    r.q.push_back(rkg_initial_q(p, m, load));
    double q2 = 0.0;
    for (std::size_t t = 0; t < max_steps; ++t) {
        const auto next = rkg_identical_step(r.q.back(), m, load, space, q2);
        if (!next) {
            r.breakdown = true;
            return r;
        }
        q2 = r.q.back();
        r.q.push_back(*next);
        if (std::abs(*next - q2) <= tol * std::max(1.0, *next)) break;
    }
    r.surviving_fraction = (1.0 - p) * detail::prob_at_least(space, m * r.q.back());
    return r;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline void write_trajectory_header(std::ostream& os) { os << "t,network,f,n_alive,F,Q_step,Q_cum\n"; }

inline void write_trajectory_rows(std::ostream& os, const std::vector<MeanFieldState>& steps) {
    const auto old = os.precision(17);
    for (const auto& s : steps)
        for (std::size_t k = 0; k < s.net.size(); ++k) {
            const auto& a = s.net[k];
            os << s.t << ',' << k << ',' << a.f << ',' << a.n_alive << ',' << a.total_extra << ','
               << a.q_step << ',' << a.q_cum << '\n';
        }
    os.precision(old);
}

inline void write_trajectory_csv(std::ostream& os, const MeanFieldTrajectory& tr) {
    write_trajectory_header(os);
    write_trajectory_rows(os, tr.steps);
}

}  // namespace cascade

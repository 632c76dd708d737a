#pragma once

// Coupling strategies: fixed coefficients (FCC), size-based dynamic (SBD)
// and step-wise optimization (SWO).
//
// SWO picks the coupling that minimizes the predicted extra load released at
// the next step. For a candidate matrix M the load received by network k is
// R_k = sum_i pool_i * M(i,k), each survivor gets dq_k = R_k / n_k, and the
// predicted release is
//
//     sum_k n_k * pi_k(dq_k) * (E[L_k] + Q_k + dq_k),
//     pi_k(d) = P[Q_k < S_k <= Q_k + d] / P[S_k > Q_k].
//
// With two networks the objective depends on (alpha, beta) only through
// R_A = alpha*pool_A + (1-beta)*pool_B, so its Hessian is singular and the
// minimizers form a segment. Ties are broken towards the smallest alpha, then
// the smallest beta.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "cascade/core.hpp"

namespace cascade {

// ---------------------------------------------------------------------------
// State view
// ---------------------------------------------------------------------------

/// What a strategy may observe about one network at step t, after the nodes
/// failing at t have been removed and before their load is placed.
struct NetworkView {
    double n_alive = 0.0;     // survivors at t
    double q_cum = 0.0;       // cumulative per-node extra load received up to t-1
    double q_step = 0.0;      // per-node extra load received at t-1
    double f = 0.0;           // failed fraction at t
    double p = 0.0;           // initial attack fraction
    double node_count = 0.0;  // N
    double pool = 0.0;        // extra load released at t, to be placed now
    double load_mean = 0.0;   // E[L]
    Distribution space;
};

struct SystemView {
    std::size_t t = 0;
    std::vector<NetworkView> net;

    std::size_t size() const { return net.size(); }
};

/// A network counts as alive while it has at least one (expected) node.
inline bool is_live(const NetworkView& v) { return v.n_alive >= 1.0; }

inline std::vector<bool> live_mask(const SystemView& s) {
    std::vector<bool> m(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) m[k] = is_live(s.net[k]);
    return m;
}

inline std::vector<double> alive_counts(const SystemView& s) {
    std::vector<double> n(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) n[k] = s.net[k].n_alive;
    return n;
}

// ---------------------------------------------------------------------------
// Strategy types
// ---------------------------------------------------------------------------

struct CoefficientBox {
    double lo = 0.0;
    double hi = 1.0;
    bool operator==(const CoefficientBox&) const = default;
};

/// Per-entry lower/upper bounds on a coupling matrix.
class CouplingBounds {
public:
    CouplingBounds() = default;
    CouplingBounds(std::size_t n, std::vector<double> lo, std::vector<double> hi)
        : n_(n), lo_(std::move(lo)), hi_(std::move(hi)) {
        if (lo_.size() != n * n || hi_.size() != n * n)
            throw CascadeError("coupling bounds need n*n entries");
    }

    static CouplingBounds unit(std::size_t n) {
        return CouplingBounds(n, std::vector<double>(n * n, 0.0), std::vector<double>(n * n, 1.0));
    }

    /// Box on the in-net ratios; off-diagonal bounds follow from row sums.
    static CouplingBounds two_network(CoefficientBox alpha, CoefficientBox beta) {
        return CouplingBounds(2, {alpha.lo, 1.0 - alpha.hi, 1.0 - beta.hi, beta.lo},
                              {alpha.hi, 1.0 - alpha.lo, 1.0 - beta.lo, beta.hi});
    }

    /// Same in-net box for every network; off-diagonals in [0,1].
    static CouplingBounds diagonal(std::size_t n, CoefficientBox in_net) {
        if (n == 2) return two_network(in_net, in_net);
        auto b = unit(n);
        for (std::size_t i = 0; i < n; ++i) {
            b.lo_[i * n + i] = in_net.lo;
            b.hi_[i * n + i] = in_net.hi;
        }
        return b;
    }

    std::size_t size() const { return n_; }
    double lo(std::size_t i, std::size_t j) const { return lo_[i * n_ + j]; }
    double hi(std::size_t i, std::size_t j) const { return hi_[i * n_ + j]; }

    CoefficientBox alpha() const { return {lo(0, 0), hi(0, 0)}; }
    CoefficientBox beta() const { return {lo(1, 1), hi(1, 1)}; }

    void validate() const {
        for (std::size_t k = 0; k < lo_.size(); ++k)
            if (!(0.0 <= lo_[k] && lo_[k] <= hi_[k] && hi_[k] <= 1.0))
                throw CascadeError("coupling bounds require 0 <= lo <= hi <= 1");
        for (std::size_t i = 0; i < n_; ++i) {
            double slo = 0.0, shi = 0.0;
            for (std::size_t j = 0; j < n_; ++j) {
                slo += lo(i, j);
                shi += hi(i, j);
            }
            if (slo > 1.0 + 1e-12 || shi < 1.0 - 1e-12)
                throw CascadeError("coupling bounds are infeasible: row cannot sum to 1");
        }
    }

    bool operator==(const CouplingBounds&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> lo_, hi_;
};

enum class SwoSolver { ClosedFormUniform, GridFallback, MultiNetQP };

struct FixedCoupling {
    CouplingMatrix matrix;
    bool operator==(const FixedCoupling&) const = default;
};

struct SizeBasedDynamic {
    bool operator==(const SizeBasedDynamic&) const = default;
};

struct StepwiseOptimization {
    CouplingBounds bounds = CouplingBounds::unit(2);
    SwoSolver solver = SwoSolver::ClosedFormUniform;
    double resolution = 1e-3;  // grid step for GridFallback
    bool operator==(const StepwiseOptimization&) const = default;
};

using CouplingStrategy = std::variant<FixedCoupling, SizeBasedDynamic, StepwiseOptimization>;

struct CouplingDecision {
    CouplingMatrix matrix;
    std::optional<double> objective_value;  // predicted next-step release (SWO only)
    std::vector<bool> at_boundary;          // row-major, one flag per entry
};

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

/// Load received by every network under M. Load sent to a dead network is lost.
inline std::vector<double> received_loads(const SystemView& s, const CouplingMatrix& m) {
    const std::size_t n = s.size();
    std::vector<double> r(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) r[k] += s.net[i].pool * m(i, k);
    return r;
}

/// Predicted release of network k if each of its survivors receives dq more.
inline double predicted_release(const NetworkView& v, double dq) {
    if (!is_live(v) || dq <= 0.0) return 0.0;
    const double surv = v.space.survival(v.q_cum);
    if (surv <= 0.0) return 0.0;
    const double failing = std::max(0.0, surv - v.space.survival(v.q_cum + dq)) / surv;
    return v.n_alive * failing * (v.load_mean + v.q_cum + dq);
}

inline double swo_objective_general(const CouplingMatrix& m, const SystemView& s) {
    const auto r = received_loads(s, m);
    double total = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (is_live(s.net[k])) total += predicted_release(s.net[k], r[k] / s.net[k].n_alive);
    return total;
}

inline double swo_objective_general(double alpha, double beta, const SystemView& s) {
    return swo_objective_general(CouplingMatrix::two_network(alpha, beta), s);
}

inline std::pair<double, double> sbd_coefficients(double n_alive_a, double n_alive_b) {
    const double total = n_alive_a + n_alive_b;
    if (!(total > 0.0)) throw CascadeError("size-based coupling needs at least one survivor");
    return {n_alive_a / total, n_alive_b / total};
}

/// Every row equals the survivor shares, so each survivor receives the same
/// per-node increment.
inline CouplingMatrix sbd_matrix(const SystemView& s) {
    const std::size_t n = s.size();
    double total = 0.0;
    for (const auto& v : s.net) total += v.n_alive;
    if (!(total > 0.0)) throw CascadeError("size-based coupling needs at least one survivor");
    CouplingMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) m(i, k) = s.net[k].n_alive / total;
    // Re-close each row against rounding.
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) sum += m(i, k);
        m(i, n - 1) = std::max(0.0, 1.0 - sum);
    }
    return m;
}

struct SwoSolution {
    double alpha = 0.0;
    double beta = 0.0;
    double objective = 0.0;
};

namespace detail {

inline bool better(double v, double a, double b, const SwoSolution& best, double tol) {
    if (v < best.objective - tol) return true;
    if (v > best.objective + tol) return false;
    return a < best.alpha || (a == best.alpha && b < best.beta);
}

inline double clamp_box(double x, CoefficientBox b) { return std::clamp(x, b.lo, b.hi); }

/// Grid lo, lo+step, ..., hi (endpoint included).
inline std::vector<double> grid_points(CoefficientBox b, double step) {
    std::vector<double> g;
    const auto count = static_cast<std::size_t>(std::floor((b.hi - b.lo) / step + 1e-9));
    g.reserve(count + 2);
    for (std::size_t i = 0; i <= count; ++i) g.push_back(b.lo + static_cast<double>(i) * step);
    if (b.hi - g.back() > 1e-9 * step) g.push_back(b.hi);
    else g.back() = b.hi;
    return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Uniform-space quadratic model
// ---------------------------------------------------------------------------

/// obj(alpha, beta) = K_alpha2*a^2 + K_beta2*b^2 + K_alphabeta*a*b
///                  + K_alpha*a + K_beta*b + constant
/// with dq_A = A1*alpha + B1*(1-beta) and dq_B = A2*beta + B2*(1-alpha).
/// Network k contributes c_k*(dq_k - gap_k)*(dq_k + e_k), which is exact while
/// gap_k <= dq_k <= cap_k.
struct SwoCoefficients {
    double A1 = 0, B1 = 0, A2 = 0, B2 = 0;
    double c_a = 0, c_b = 0;      // survivors per unit of remaining space width
    double gap_a = 0, gap_b = 0;  // increment absorbed before any node fails
    double cap_a = std::numeric_limits<double>::infinity();
    double cap_b = std::numeric_limits<double>::infinity();
    double e_a = 0, e_b = 0;      // E[L] + Q
    double K_alpha2 = 0, K_beta2 = 0, K_alpha = 0, K_beta = 0, K_alphabeta = 0;
    double constant = 0;

    double evaluate(double a, double b) const {
        return K_alpha2 * a * a + K_beta2 * b * b + K_alphabeta * a * b + K_alpha * a + K_beta * b +
               constant;
    }

    double hessian_trace() const { return 2.0 * K_alpha2 + 2.0 * K_beta2; }
    double hessian_det() const { return 4.0 * K_alpha2 * K_beta2 - K_alphabeta * K_alphabeta; }

    double scale() const {
        return std::abs(K_alpha2) + std::abs(K_beta2) + std::abs(K_alphabeta) + std::abs(K_alpha) +
               std::abs(K_beta) + std::abs(constant);
    }

    /// True when the quadratic equals the exact objective over the whole box.
    bool exact_on(CoefficientBox alpha, CoefficientBox beta) const {
        auto range = [](double c0, double ca, double cb, CoefficientBox x, CoefficientBox y) {
            const double v1 = c0 + ca * x.lo + cb * y.lo, v2 = c0 + ca * x.hi + cb * y.lo;
            const double v3 = c0 + ca * x.lo + cb * y.hi, v4 = c0 + ca * x.hi + cb * y.hi;
            return std::pair{std::min({v1, v2, v3, v4}), std::max({v1, v2, v3, v4})};
        };
        const double eps = 1e-12;
        if (c_a > 0) {
            auto [lo, hi] = range(B1, A1, -B1, alpha, beta);
            if (lo < gap_a * (1 - eps) - eps || hi > cap_a * (1 + eps)) return false;
        }
        if (c_b > 0) {
            auto [lo, hi] = range(B2, -B2, A2, alpha, beta);
            if (lo < gap_b * (1 - eps) - eps || hi > cap_b * (1 + eps)) return false;
        }
        return true;
    }
};

inline SwoCoefficients swo_build_uniform(const SystemView& s) {
    if (s.size() != 2) throw CascadeError("closed-form step-wise optimization needs two networks");
    for (const auto& v : s.net)
        if (!v.space.is_uniform())
            throw CascadeError("closed-form step-wise optimization needs uniform free space");

    const auto& na = s.net[0];
    const auto& nb = s.net[1];
    SwoCoefficients k;

    auto live = [](const NetworkView& v) {
        const auto& u = *v.space.get_if<Uniform>();
        return is_live(v) && v.q_cum < u.hi;
    };
    const bool la = live(na), lb = live(nb);
    auto fill = [](const NetworkView& v, double& c, double& gap, double& cap, double& e) {
        const auto& u = *v.space.get_if<Uniform>();
        const double floor_q = std::max(v.q_cum, u.lo);
        c = v.n_alive / (u.hi - floor_q);
        gap = floor_q - v.q_cum;
        cap = u.hi - v.q_cum;
        e = v.load_mean + v.q_cum;
    };

    if (la && lb) {
        fill(na, k.c_a, k.gap_a, k.cap_a, k.e_a);
        fill(nb, k.c_b, k.gap_b, k.cap_b, k.e_b);
        k.A1 = na.pool / na.n_alive;
        k.B1 = nb.pool / na.n_alive;
        k.A2 = nb.pool / nb.n_alive;
        k.B2 = na.pool / nb.n_alive;

        // c*(d - g)*(d + e) = c*(d^2 + (e - g)*d - g*e), d affine in (alpha, beta).
        const double ha = k.e_a - k.gap_a, hb = k.e_b - k.gap_b;
        k.K_alpha2 = k.c_a * k.A1 * k.A1 + k.c_b * k.B2 * k.B2;
        k.K_beta2 = k.c_a * k.B1 * k.B1 + k.c_b * k.A2 * k.A2;
        k.K_alphabeta = -2.0 * (k.c_a * k.A1 * k.B1 + k.c_b * k.A2 * k.B2);
        k.K_alpha = k.c_a * k.A1 * (2.0 * k.B1 + ha) - k.c_b * k.B2 * (2.0 * k.B2 + hb);
        k.K_beta = -k.c_a * k.B1 * (2.0 * k.B1 + ha) + k.c_b * k.A2 * (2.0 * k.B2 + hb);
        k.constant = k.c_a * (k.B1 * k.B1 + ha * k.B1 - k.gap_a * k.e_a) +
                     k.c_b * (k.B2 * k.B2 + hb * k.B2 - k.gap_b * k.e_b);
    } else if (la || lb) {
        // All load lands on the single live network whatever the coupling.
        const auto& v = la ? na : nb;
        k.constant = predicted_release(v, (na.pool + nb.pool) / v.n_alive);
    }
    return k;
}

/// Box-constrained minimizer of the quadratic: stationary point when it is
/// interior and the Hessian is non-singular, otherwise the best of the four
/// edge minimizers and four vertices.
inline SwoSolution swo_solve_box(const SwoCoefficients& k, CoefficientBox alpha, CoefficientBox beta) {
    const double tol = 1e-12 * std::max(1.0, k.scale());
    SwoSolution best{alpha.lo, beta.lo, k.evaluate(alpha.lo, beta.lo)};
    auto consider = [&](double a, double b) {
        const double v = k.evaluate(a, b);
        if (detail::better(v, a, b, best, tol)) best = {a, b, v};
    };

    const double det = k.hessian_det();
    const double hscale = 4.0 * std::abs(k.K_alpha2 * k.K_beta2) + k.K_alphabeta * k.K_alphabeta;
    if (det > 1e-10 * hscale && det > 0.0) {
        // [2Ka2  Kab][a]   [-Ka]
        // [Kab  2Kb2][b] = [-Kb]
        const double a = (-k.K_alpha * 2.0 * k.K_beta2 + k.K_beta * k.K_alphabeta) / det;
        const double b = (-k.K_beta * 2.0 * k.K_alpha2 + k.K_alpha * k.K_alphabeta) / det;
        if (a >= alpha.lo && a <= alpha.hi && b >= beta.lo && b <= beta.hi) consider(a, b);
    }

    // Edges alpha = const: Kb2*b^2 + (Kab*a + Kb)*b + ...
    for (double a : {alpha.lo, alpha.hi}) {
        if (k.K_beta2 > 0.0)
            consider(a, detail::clamp_box(-(k.K_alphabeta * a + k.K_beta) / (2.0 * k.K_beta2), beta));
    }
    for (double b : {beta.lo, beta.hi}) {
        if (k.K_alpha2 > 0.0)
            consider(detail::clamp_box(-(k.K_alphabeta * b + k.K_alpha) / (2.0 * k.K_alpha2), alpha), b);
    }
    for (double a : {alpha.lo, alpha.hi})
        for (double b : {beta.lo, beta.hi}) consider(a, b);
    return best;
}

/// Exhaustive search of the exact objective on a regular (alpha, beta) grid.
inline SwoSolution swo_solve_grid(const SystemView& s, CoefficientBox alpha, CoefficientBox beta,
                                  double resolution) {
    if (!(resolution > 0.0)) throw CascadeError("grid resolution must be positive");
    const auto ga = detail::grid_points(alpha, resolution);
    const auto gb = detail::grid_points(beta, resolution);
    SwoSolution best{ga.front(), gb.front(), swo_objective_general(ga.front(), gb.front(), s)};
    double scale = 0.0;
    for (const auto& v : s.net) scale += v.pool * (v.load_mean + v.q_cum + 1.0);
    const double tol = 1e-12 * std::max(1.0, scale);
    for (double a : ga)
        for (double b : gb) {
            const double v = swo_objective_general(a, b, s);
            if (detail::better(v, a, b, best, tol)) best = {a, b, v};
        }
    return best;
}

/// Exact minimizer of the two-network objective for uniform free space in
/// every regime (including loads below the smallest free space and loads
/// that wipe a network out). Works on the one-dimensional load split R_A,
/// where the objective is piecewise quadratic with at most four breakpoints.
inline SwoSolution swo_solve_piecewise(const SystemView& s, CoefficientBox alpha, CoefficientBox beta) {
    if (s.size() != 2) throw CascadeError("piecewise step-wise optimization needs two networks");
    for (const auto& v : s.net)
        if (!v.space.is_uniform()) throw CascadeError("piecewise step-wise optimization needs uniform free space");

    const double fa = s.net[0].pool, fb = s.net[1].pool;
    const double total = fa + fb;
    const auto live = live_mask(s);

    if (!(live[0] && live[1]) || total <= 0.0) {
        return {alpha.lo, beta.lo, swo_objective_general(alpha.lo, beta.lo, s)};
    }

    const auto& va = s.net[0];
    const auto& vb = s.net[1];
    const double r_lo = alpha.lo * fa + (1.0 - beta.hi) * fb;
    const double r_hi = alpha.hi * fa + (1.0 - beta.lo) * fb;
    auto h = [&](double r) {
        return predicted_release(va, r / va.n_alive) + predicted_release(vb, (total - r) / vb.n_alive);
    };

    std::vector<double> cand{r_lo, r_hi};
    auto push = [&](double r) {
        if (r > r_lo && r < r_hi) cand.push_back(r);
    };
    const auto& ua = *va.space.get_if<Uniform>();
    const auto& ub = *vb.space.get_if<Uniform>();
    push(va.n_alive * (std::max(va.q_cum, ua.lo) - va.q_cum));
    push(va.n_alive * (ua.hi - va.q_cum));
    push(total - vb.n_alive * (std::max(vb.q_cum, ub.lo) - vb.q_cum));
    push(total - vb.n_alive * (ub.hi - vb.q_cum));
    std::sort(cand.begin(), cand.end());

    // Vertex of the quadratic inside each piece, located from three samples.
    const std::size_t nb = cand.size();
    for (std::size_t i = 0; i + 1 < nb; ++i) {
        const double x0 = cand[i], x2 = cand[i + 1];
        if (x2 - x0 <= 0.0) continue;
        const double x1 = 0.5 * (x0 + x2);
        const double y0 = h(x0), y1 = h(x1), y2 = h(x2);
        const double curv = y0 - 2.0 * y1 + y2;
        if (curv > 0.0) {
            const double w = x2 - x0;
            const double xv = x1 + 0.25 * w * (y0 - y2) / curv;
            if (xv > x0 && xv < x2) cand.push_back(xv);
        }
    }

    double best_v = std::numeric_limits<double>::infinity();
    for (double r : cand) best_v = std::min(best_v, h(r));
    double scale = 0.0;
    for (const auto& v : s.net) scale += v.pool * (v.load_mean + v.q_cum + 1.0);
    const double tol = 1e-12 * std::max(1.0, scale);
    double r_min = std::numeric_limits<double>::infinity(), r_max = -r_min;
    for (double r : cand)
        if (h(r) <= best_v + tol) {
            r_min = std::min(r_min, r);
            r_max = std::max(r_max, r);
        }
    // Only a zero-release plateau is a genuine interval of minimizers; other
    // ties are isolated points and the smallest split is taken.
    if (best_v > tol) r_max = r_min;

    // Smallest alpha reaching the split interval, then smallest beta.
    double a = alpha.lo;
    if (fa > 0.0) a = detail::clamp_box((r_min - (1.0 - beta.lo) * fb) / fa, alpha);
    double b = beta.lo;
    if (fb > 0.0) b = detail::clamp_box(1.0 - (r_max - a * fa) / fb, beta);
    return {a, b, swo_objective_general(a, b, s)};
}

// ---------------------------------------------------------------------------
// n-network convex QP
// ---------------------------------------------------------------------------

struct MultinetSolution {
    CouplingMatrix matrix;
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

/// Euclidean projection of y onto {x : lo <= x <= hi, sum x = 1}.
inline void project_capped_simplex(std::span<double> y, std::span<const double> lo,
                                   std::span<const double> hi) {
    auto mass = [&](double tau) {
        double s = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) s += std::clamp(y[j] - tau, lo[j], hi[j]);
        return s;
    };
    double t_lo = std::numeric_limits<double>::infinity(), t_hi = -t_lo;
    for (std::size_t j = 0; j < y.size(); ++j) {
        t_lo = std::min(t_lo, y[j] - hi[j]);
        t_hi = std::max(t_hi, y[j] - lo[j]);
    }
    // mass(t_lo) = sum hi >= 1 >= sum lo = mass(t_hi); mass is non-increasing.
    for (int it = 0; it < 200 && t_hi - t_lo > 1e-18 * (1.0 + std::abs(t_lo)); ++it) {
        const double mid = 0.5 * (t_lo + t_hi);
        if (mass(mid) > 1.0) t_lo = mid;
        else t_hi = mid;
    }
    const double tau = 0.5 * (t_lo + t_hi);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = std::clamp(y[j] - tau, lo[j], hi[j]);
}

}  // namespace detail

/// Per-network quadratic release model for uniform free space.
struct UniformReleaseModel {
    std::vector<double> c, gap, e;  // c_k*(d - gap_k)*(d + e_k)

    static UniformReleaseModel from(const SystemView& s) {
        UniformReleaseModel m;
        for (const auto& v : s.net) {
            const auto* u = v.space.get_if<Uniform>();
            if (!u) throw CascadeError("multi-network optimization needs uniform free space");
            if (is_live(v) && v.q_cum < u->hi) {
                const double floor_q = std::max(v.q_cum, u->lo);
                m.c.push_back(v.n_alive / (u->hi - floor_q));
                m.gap.push_back(floor_q - v.q_cum);
            } else {
                m.c.push_back(0.0);
                m.gap.push_back(0.0);
            }
            m.e.push_back(v.load_mean + v.q_cum);
        }
        return m;
    }
};

/// Minimizes the uniform-space release model over row-stochastic matrices
/// inside the bounds with accelerated projected gradient. The objective is
/// convex (separable convex quadratic in the per-network increments, which
/// are linear in the matrix entries).
inline MultinetSolution swo_solve_multinet(const SystemView& s, const CouplingBounds& bounds,
                                           double kkt_tol = 1e-8, std::size_t max_iter = 200000) {
    const std::size_t n = s.size();
    if (n < 2) throw CascadeError("multi-network optimization needs at least two networks");
    if (bounds.size() != n) throw CascadeError("bounds dimension does not match network count");
    bounds.validate();
    const auto model = UniformReleaseModel::from(s);
    const auto live = live_mask(s);

    double total = 0.0;
    for (const auto& v : s.net) total += v.pool;
    const double unit = total > 0.0 ? total : 1.0;

    std::vector<double> pool(n), n_alive(n);
    for (std::size_t i = 0; i < n; ++i) {
        pool[i] = s.net[i].pool / unit;
        n_alive[i] = live[i] ? s.net[i].n_alive : 0.0;
    }

    // Objective in normalized load units: f = sum_k c_k (d_k - g_k)(d_k + e_k),
    // d_k = unit * sum_i pool_i m_ik / n_k.
    auto increments = [&](const std::vector<double>& m) {
        std::vector<double> d(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            if (!live[k]) continue;
            double r = 0.0;
            for (std::size_t i = 0; i < n; ++i) r += pool[i] * m[i * n + k];
            d[k] = unit * r / n_alive[k];
        }
        return d;
    };
    auto objective = [&](const std::vector<double>& m) {
        const auto d = increments(m);
        double f = 0.0;
        for (std::size_t k = 0; k < n; ++k) f += model.c[k] * (d[k] - model.gap[k]) * (d[k] + model.e[k]);
        return f;
    };
    auto gradient = [&](const std::vector<double>& m) {
        const auto d = increments(m);
        std::vector<double> g(n * n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            if (!live[k]) continue;
            const double dfdd = model.c[k] * (2.0 * d[k] + model.e[k] - model.gap[k]);
            for (std::size_t i = 0; i < n; ++i) g[i * n + k] = dfdd * unit * pool[i] / n_alive[k];
        }
        return g;
    };

    // Entries towards dead networks are pinned to zero when the row allows it.
    std::vector<double> lo(n * n), hi(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double live_hi = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (live[k]) live_hi += bounds.hi(i, k);
        for (std::size_t k = 0; k < n; ++k) {
            lo[i * n + k] = bounds.lo(i, k);
            hi[i * n + k] = (!live[k] && live_hi >= 1.0) ? bounds.lo(i, k) : bounds.hi(i, k);
        }
    }
    auto project = [&](std::vector<double>& m) {
        for (std::size_t i = 0; i < n; ++i)
            detail::project_capped_simplex(std::span<double>(m.data() + i * n, n),
                                           std::span<const double>(lo.data() + i * n, n),
                                           std::span<const double>(hi.data() + i * n, n));
    };

    double lip = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!live[k]) continue;
        double col = 0.0;
        for (std::size_t i = 0; i < n; ++i) col += pool[i] * pool[i];
        lip = std::max(lip, 2.0 * model.c[k] * unit * unit * col / (n_alive[k] * n_alive[k]));
    }
    if (!(lip > 0.0)) lip = 1.0;
    const double step = 1.0 / lip;

    // Start from the size-based point projected into the bounds.
    std::vector<double> x(n * n);
    {
        double tot = 0.0;
        for (double v : n_alive) tot += v;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                x[i * n + k] = tot > 0.0 ? n_alive[k] / tot : (i == k ? 1.0 : 0.0);
        project(x);
    }
    std::vector<double> y = x, x_prev = x;
    double t = 1.0, f_prev = objective(x);
    MultinetSolution out;
    auto residual_at = [&](const std::vector<double>& m) {
        auto g = gradient(m);
        std::vector<double> z(n * n);
        for (std::size_t j = 0; j < z.size(); ++j) z[j] = m[j] - step * g[j];
        project(z);
        double r = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) r = std::max(r, std::abs(z[j] - m[j]));
        return r;
    };

    std::size_t it = 0;
    double res = residual_at(x);
    bool restarted = false;
    for (; it < max_iter && res >= kkt_tol; ++it) {
        auto g = gradient(y);
        std::vector<double> z(n * n);
        for (std::size_t j = 0; j < z.size(); ++j) z[j] = y[j] - step * g[j];
        project(z);
        const double fz = objective(z);
        // Restart momentum on an increase. Right after a restart the step is a
        // plain projected gradient step, which is taken regardless of rounding.
        if (fz > f_prev && !restarted) {
            t = 1.0;
            y = x;
            restarted = true;
            continue;
        }
        restarted = false;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        x_prev = x;
        x = z;
        for (std::size_t j = 0; j < y.size(); ++j) y[j] = x[j] + ((t - 1.0) / t_next) * (x[j] - x_prev[j]);
        t = t_next;
        f_prev = fz;
        if (it % 16 == 0) res = residual_at(x);
    }
    res = residual_at(x);

    out.matrix = CouplingMatrix(n, x);
    // Snap rows onto the simplex exactly.
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) sum += out.matrix(i, k);
        std::size_t j = 0;
        for (std::size_t k = 1; k < n; ++k)
            if (out.matrix(i, k) > out.matrix(i, j)) j = k;
        out.matrix(i, j) = std::clamp(out.matrix(i, j) + (1.0 - sum), 0.0, 1.0);
    }
    out.objective = objective(out.matrix.data());
    out.kkt_residual = res;
    out.iterations = it;
    return out;
}

/// Value of the uniform release model at an arbitrary matrix (no routing).
inline double multinet_model_objective(const SystemView& s, const CouplingMatrix& m) {
    const auto model = UniformReleaseModel::from(s);
    const auto live = live_mask(s);
    double f = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (!live[k]) continue;
        double r = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) r += s.net[i].pool * m(i, k);
        const double d = r / s.net[k].n_alive;
        f += model.c[k] * (d - model.gap[k]) * (d + model.e[k]);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<bool> boundary_flags(const CouplingMatrix& m, const CouplingBounds& b) {
    std::vector<bool> flags(m.size() * m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            flags[i * m.size() + j] =
                std::abs(m(i, j) - b.lo(i, j)) <= 1e-12 || std::abs(m(i, j) - b.hi(i, j)) <= 1e-12;
    return flags;
}

inline SwoSolution solve_two_network(const StepwiseOptimization& swo, const SystemView& s) {
    const auto a = swo.bounds.alpha();
    const auto b = swo.bounds.beta();
    const bool uniform = s.net[0].space.is_uniform() && s.net[1].space.is_uniform();
    if (swo.solver == SwoSolver::GridFallback || !uniform) {
        const double res = swo.solver == SwoSolver::GridFallback ? swo.resolution : 1e-3;
        return swo_solve_grid(s, a, b, res);
    }
    const auto coeffs = swo_build_uniform(s);
    if (coeffs.exact_on(a, b)) {
        auto sol = swo_solve_box(coeffs, a, b);
        sol.objective = swo_objective_general(sol.alpha, sol.beta, s);
        return sol;
    }
    return swo_solve_piecewise(s, a, b);
}

}  // namespace detail

inline CouplingDecision decide(const CouplingStrategy& strategy, const SystemView& s) {
    const std::size_t n = s.size();
    bool any_live = false;
    for (const auto& v : s.net) any_live = any_live || is_live(v);

    return std::visit(
        [&](const auto& st) -> CouplingDecision {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, FixedCoupling>) {
                if (st.matrix.size() != n) throw CascadeError("fixed coupling dimension mismatch");
                return {st.matrix, std::nullopt, detail::boundary_flags(st.matrix, CouplingBounds::unit(n))};
            } else {
                if (!any_live) {
                    auto id = CouplingMatrix::identity(n);
                    return {id, std::nullopt, detail::boundary_flags(id, CouplingBounds::unit(n))};
                }
                if constexpr (std::is_same_v<T, SizeBasedDynamic>) {
                    auto m = sbd_matrix(s);
                    return {m, std::nullopt, detail::boundary_flags(m, CouplingBounds::unit(n))};
                } else {
                    if (st.bounds.size() != n) throw CascadeError("coupling bounds dimension mismatch");
                    // Load sent to a dead network would simply vanish, which the
                    // objective would happily exploit. Keep it on the survivors.
                    for (const auto& v : s.net)
                        if (!is_live(v)) {
                            auto m = sbd_matrix(s);
                            return {m, swo_objective_general(m, s), detail::boundary_flags(m, st.bounds)};
                        }
                    if (n == 2 && st.solver != SwoSolver::MultiNetQP) {
                        const auto sol = detail::solve_two_network(st, s);
                        auto m = CouplingMatrix::two_network(sol.alpha, sol.beta);
                        return {m, sol.objective, detail::boundary_flags(m, st.bounds)};
                    }
                    if (st.solver == SwoSolver::GridFallback)
                        throw CascadeError("grid step-wise optimization supports two networks only");
                    auto sol = swo_solve_multinet(s, st.bounds);
                    return {sol.matrix, swo_objective_general(sol.matrix, s),
                            detail::boundary_flags(sol.matrix, st.bounds)};
                }
            }
        },
        strategy);
}

}  // namespace cascade

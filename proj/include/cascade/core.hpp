#pragma once

// Domain types shared by the mean-field and Monte-Carlo engines: load and
// free-space distributions, network configuration, coupling matrices and
// attack vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cascade {

class CascadeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kRowSumTolerance = 1e-12;

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

struct Uniform {
    double lo;
    double hi;
    bool operator==(const Uniform&) const = default;
};

struct ShiftedExponential {
    double shift;
    double rate;
    bool operator==(const ShiftedExponential&) const = default;
};

struct PointMass {
    double value;
    bool operator==(const PointMass&) const = default;
};

/// Closed family of non-negative distributions used for node loads and free
/// spaces. Validated on construction; immutable afterwards.
class Distribution {
public:
    using Kind = std::variant<Uniform, ShiftedExponential, PointMass>;

    Distribution() : kind_(PointMass{0.0}) {}
    Distribution(Uniform u) : kind_(u) { validate(); }
    Distribution(ShiftedExponential e) : kind_(e) { validate(); }
    Distribution(PointMass p) : kind_(p) { validate(); }

    static Distribution uniform(double lo, double hi) { return Uniform{lo, hi}; }
    static Distribution shifted_exponential(double shift, double rate) {
        return ShiftedExponential{shift, rate};
    }
    static Distribution point(double value) { return PointMass{value}; }

    const Kind& kind() const { return kind_; }

    template <class T>
    const T* get_if() const { return std::get_if<T>(&kind_); }

    bool is_uniform() const { return std::holds_alternative<Uniform>(kind_); }

    /// P[X <= x].
    double cdf(double x) const {
        return std::visit(
            [x](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    if (x <= d.lo) return 0.0;
                    if (x >= d.hi) return 1.0;
                    return (x - d.lo) / (d.hi - d.lo);
                } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                    if (x <= d.shift) return 0.0;
                    return -std::expm1(-d.rate * (x - d.shift));
                } else {
                    return x >= d.value ? 1.0 : 0.0;
                }
            },
            kind_);
    }

    /// P[X > x], computed without cancellation for the exponential tail.
    double survival(double x) const {
        if (const auto* e = get_if<ShiftedExponential>()) {
            if (x <= e->shift) return 1.0;
            return std::exp(-e->rate * (x - e->shift));
        }
        return 1.0 - cdf(x);
    }

    double mean() const {
        return std::visit(
            [](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    return 0.5 * (d.lo + d.hi);
                } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                    return d.shift + 1.0 / d.rate;
                } else {
                    return d.value;
                }
            },
            kind_);
    }

    double support_min() const {
        return std::visit(
            [](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Uniform>) return d.lo;
                else if constexpr (std::is_same_v<T, ShiftedExponential>) return d.shift;
                else return d.value;
            },
            kind_);
    }

    double support_max() const {
        return std::visit(
            [](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Uniform>) return d.hi;
                else if constexpr (std::is_same_v<T, ShiftedExponential>)
                    return std::numeric_limits<double>::infinity();
                else return d.value;
            },
            kind_);
    }

    template <class Rng>
    double sample(Rng& rng) const {
        return std::visit(
            [&rng](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    return std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
                } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                    return d.shift + std::exponential_distribution<double>(d.rate)(rng);
                } else {
                    return d.value;
                }
            },
            kind_);
    }

    /// Normalized text form, e.g. "uniform:20:180", "exp:20:0.00833", "point:75".
    std::string to_string() const {
        std::ostringstream os;
        os.precision(17);
        std::visit(
            [&os](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Uniform>) os << "uniform:" << d.lo << ':' << d.hi;
                else if constexpr (std::is_same_v<T, ShiftedExponential>)
                    os << "exp:" << d.shift << ':' << d.rate;
                else os << "point:" << d.value;
            },
            kind_);
        return os.str();
    }

    bool operator==(const Distribution&) const = default;

private:
    void validate() const {
        std::visit(
            [](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Uniform>) {
                    if (!(d.lo >= 0.0) || !(d.hi > d.lo) || !std::isfinite(d.hi))
                        throw CascadeError("uniform distribution requires 0 <= lo < hi");
                } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                    if (!(d.shift >= 0.0) || !(d.rate > 0.0) || !std::isfinite(d.shift))
                        throw CascadeError("shifted exponential requires shift >= 0 and rate > 0");
                } else {
                    if (!(d.value >= 0.0) || !std::isfinite(d.value))
                        throw CascadeError("point mass requires a finite value >= 0");
                }
            },
            kind_);
    }

    Kind kind_;
};

inline double dist_cdf(const Distribution& d, double x) { return d.cdf(x); }
inline double dist_mean(const Distribution& d) { return d.mean(); }

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

struct CompleteGraph {
    bool operator==(const CompleteGraph&) const = default;
};
struct ErdosRenyi {
    double mean_degree;
    bool operator==(const ErdosRenyi&) const = default;
};
struct BarabasiAlbert {
    double mean_degree;
    bool operator==(const BarabasiAlbert&) const = default;
};
/// Topology read from an edge-list file ("u v" per line).
struct EdgeListFile {
    std::string path;
    bool operator==(const EdgeListFile&) const = default;
};

using Topology = std::variant<CompleteGraph, ErdosRenyi, BarabasiAlbert, EdgeListFile>;

inline bool is_complete(const Topology& t) { return std::holds_alternative<CompleteGraph>(t); }

struct NetworkConfig {
    std::size_t node_count = 1;
    Distribution load;
    Distribution space;
    Topology topology = CompleteGraph{};

    void validate() const {
        if (node_count < 1) throw CascadeError("node_count must be >= 1");
        auto check_degree = [this](double k) {
            if (!(k > 0.0) || !(k < static_cast<double>(node_count)))
                throw CascadeError("mean_degree must satisfy 0 < k < node_count");
        };
        if (const auto* er = std::get_if<ErdosRenyi>(&topology)) check_degree(er->mean_degree);
        if (const auto* ba = std::get_if<BarabasiAlbert>(&topology)) check_degree(ba->mean_degree);
    }

    bool operator==(const NetworkConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Coupling matrix
// ---------------------------------------------------------------------------

/// Row i holds the fractions of network i's extra load sent to each network.
class CouplingMatrix {
public:
    CouplingMatrix() = default;
    explicit CouplingMatrix(std::size_t n) : n_(n), m_(n * n, 0.0) {}
    CouplingMatrix(std::size_t n, std::vector<double> row_major) : n_(n), m_(std::move(row_major)) {
        if (m_.size() != n * n) throw CascadeError("coupling matrix needs n*n entries");
    }

    static CouplingMatrix identity(std::size_t n) {
        CouplingMatrix c(n);
        for (std::size_t i = 0; i < n; ++i) c(i, i) = 1.0;
        return c;
    }

    /// [[alpha, 1-alpha], [1-beta, beta]]
    static CouplingMatrix two_network(double alpha, double beta) {
        return CouplingMatrix(2, {alpha, 1.0 - alpha, 1.0 - beta, beta});
    }

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return m_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return m_[i * n_ + j]; }
    const std::vector<double>& data() const { return m_; }

    double alpha() const { return (*this)(0, 0); }
    double beta() const { return (*this)(1, 1); }

    bool operator==(const CouplingMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> m_;
};

struct CouplingViolation {
    std::size_t row;
    std::optional<std::size_t> col;  // set for an out-of-range entry, empty for a bad row sum
    std::string message;
};

/// Accepts iff every entry is in [0,1] and every row sums to 1 within 1e-12.
inline std::optional<CouplingViolation> validate_coupling(const CouplingMatrix& m) {
    const std::size_t n = m.size();
    if (n == 0) return CouplingViolation{0, std::nullopt, "empty coupling matrix"};
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = m(i, j);
            if (!(v >= 0.0 && v <= 1.0)) {
                std::ostringstream os;
                os << "entry (" << i << ',' << j << ") = " << v << " outside [0,1]";
                return CouplingViolation{i, j, os.str()};
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
            std::ostringstream os;
            os.precision(17);
            os << "row " << i << " sums to " << sum;
            return CouplingViolation{i, std::nullopt, os.str()};
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Attack
// ---------------------------------------------------------------------------

struct AttackSpec {
    std::vector<double> p;

    void validate(std::size_t networks) const {
        if (p.size() != networks) throw CascadeError("attack dimension does not match network count");
        for (double v : p)
            if (!(v >= 0.0 && v <= 1.0)) throw CascadeError("attack fractions must lie in [0,1]");
    }

    /// scale * shape, clamped to [0,1].
    static AttackSpec scaled(const std::vector<double>& shape, double scale) {
        AttackSpec a;
        a.p.reserve(shape.size());
        for (double s : shape) a.p.push_back(std::clamp(s * scale, 0.0, 1.0));
        return a;
    }

    bool operator==(const AttackSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Mean-field state
// ---------------------------------------------------------------------------

/// Per-network aggregates at one time step.
struct NetworkAggregate {
    double f = 0.0;            // failed fraction up to t
    double n_alive = 0.0;      // expected surviving node count
    double total_extra = 0.0;  // extra load released by nodes failing at t
    double q_cum = 0.0;        // cumulative extra load per surviving node
    double q_step = 0.0;       // extra load per surviving node received at t

    bool operator==(const NetworkAggregate&) const = default;
};

struct MeanFieldState {
    std::size_t t = 0;
    std::vector<NetworkAggregate> net;

    bool operator==(const MeanFieldState&) const = default;
};

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; derives independent stream seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return mix_seed(mix_seed(mix_seed(base) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

}  // namespace cascade

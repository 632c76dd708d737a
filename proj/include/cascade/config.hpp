#pragma once

// Flat "key = value" run configuration.
//
//   networks = 2
//   net.0.nodes = 100000
//   net.0.load = point:75                 # uniform:lo:hi | exp:shift:rate | point:v
//   net.0.space = uniform:20:180
//   net.0.topology = complete             # complete | er:<k> | ba:<k> | edges:<path>
//   attack = 0.5,0                        # fixed attack (meanfield, simulate)
//   attack_shape = 1,0                    # direction for critical / sweep / heatmap
//   sweep = 0:1:0.05                      # lo:hi:step or an explicit list
//   strategy = swo                        # fcc | sbd | swo
//   strategy.matrix = 0.65,0.35;0.35,0.65 # fcc only, rows separated by ';'
//   strategy.bounds = 0.5:1,0.5:1         # swo: in-net box per network
//   strategy.solver = closed_form         # closed_form | grid | qp
//   strategy.resolution = 0.001           # grid solver step
//   compare = sbd,swo,fcc:0.5:0.5         # strategies for the compare command
//   engine = meanfield                    # meanfield | montecarlo
//   seed = 1
//   runs = 100
//   max_steps = 100000
//   tol = 0.001
//   heatmap.resolution = 0.05
//   heatmap.clip = 0
//   out_dir = out
//
// Numbers may be written as fractions ("1/120"). '#' starts a comment.
// emit_config writes the normalized form; parse_config(emit_config(c)) == c.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/core.hpp"
#include "cascade/search.hpp"
#include "cascade/strategies.hpp"

namespace cascade {

class ConfigError : public CascadeError {
public:
    ConfigError(std::size_t line, std::string key, const std::string& what)
        : CascadeError(format(line, key, what)), line_(line), key_(std::move(key)) {}

    std::size_t line() const { return line_; }
    const std::string& key() const { return key_; }

private:
    static std::string format(std::size_t line, const std::string& key, const std::string& what) {
        std::string s;
        if (line) s += "line " + std::to_string(line) + ": ";
        if (!key.empty()) s += "'" + key + "': ";
        return s + what;
    }
    std::size_t line_;
    std::string key_;
};

enum class Engine { MeanField, MonteCarlo };

struct RunConfig {
    std::vector<NetworkConfig> networks;
    std::vector<double> attack;        // empty when not given
    std::vector<double> attack_shape;  // defaults to (1, 0, ..., 0)
    std::vector<double> sweep;         // empty when not given
    CouplingStrategy strategy = SizeBasedDynamic{};
    std::vector<NamedStrategy> compare;
    Engine engine = Engine::MeanField;
    std::uint64_t seed = 1;
    std::size_t runs = 100;
    std::size_t max_steps = 100000;
    double tol = 1e-3;
    double heatmap_resolution = 0.05;
    double heatmap_clip = 0.0;
    std::string out_dir = "out";

    bool operator==(const RunConfig& o) const {
        if (compare.size() != o.compare.size()) return false;
        for (std::size_t i = 0; i < compare.size(); ++i)
            if (compare[i].name != o.compare[i].name || !(compare[i].strategy == o.compare[i].strategy)) return false;
        return networks == o.networks && attack == o.attack && attack_shape == o.attack_shape && sweep == o.sweep &&
               strategy == o.strategy && engine == o.engine && seed == o.seed && runs == o.runs &&
               max_steps == o.max_steps && tol == o.tol && heatmap_resolution == o.heatmap_resolution &&
               heatmap_clip == o.heatmap_clip && out_dir == o.out_dir;
    }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct Ctx {
    std::size_t line;
    std::string key;
    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(line, key, what); }
};

inline double number(const Ctx& c, const std::string& s) {
    auto parse = [&](const std::string& t) {
        double v = 0.0;
        const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) c.fail("not a number: \"" + s + "\"");
        return v;
    };
    const auto slash = s.find('/');
    if (slash == std::string::npos) return parse(trim(s));
    const double den = parse(trim(s.substr(slash + 1)));
    if (den == 0.0) c.fail("division by zero in \"" + s + "\"");
    return parse(trim(s.substr(0, slash))) / den;
}

inline std::uint64_t unsigned_int(const Ctx& c, const std::string& s) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
        c.fail("expected a non-negative integer, got \"" + s + "\"");
    return v;
}

inline double fraction(const Ctx& c, const std::string& s) {
    const double v = number(c, s);
    if (!(v >= 0.0 && v <= 1.0)) c.fail("value " + s + " is out of range [0,1]");
    return v;
}

inline std::vector<double> fraction_list(const Ctx& c, const std::string& s) {
    std::vector<double> out;
    for (const auto& p : split(s, ',')) out.push_back(fraction(c, p));
    return out;
}

inline Distribution distribution(const Ctx& c, const std::string& s) {
    const auto parts = split(s, ':');
    try {
        if (parts[0] == "uniform" && parts.size() == 3)
            return Distribution::uniform(number(c, parts[1]), number(c, parts[2]));
        if (parts[0] == "exp" && parts.size() == 3)
            return Distribution::shifted_exponential(number(c, parts[1]), number(c, parts[2]));
        if (parts[0] == "point" && parts.size() == 2) return Distribution::point(number(c, parts[1]));
    } catch (const ConfigError&) {
        throw;
    } catch (const CascadeError& e) {
        c.fail(e.what());
    }
    c.fail("expected uniform:lo:hi, exp:shift:rate or point:value, got \"" + s + "\"");
}

inline Topology topology(const Ctx& c, const std::string& s) {
    if (s == "complete") return CompleteGraph{};
    const auto colon = s.find(':');
    if (colon != std::string::npos) {
        const auto kind = s.substr(0, colon);
        const auto arg = s.substr(colon + 1);
        if (kind == "er") return ErdosRenyi{number(c, arg)};
        if (kind == "ba") return BarabasiAlbert{number(c, arg)};
        if (kind == "edges" && !arg.empty()) return EdgeListFile{arg};
    }
    c.fail("expected complete, er:<degree>, ba:<degree> or edges:<path>, got \"" + s + "\"");
}

inline std::string topology_string(const Topology& t) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, CompleteGraph>) return "complete";
            else if constexpr (std::is_same_v<T, ErdosRenyi>) return "er:" + fmt(x.mean_degree);
            else if constexpr (std::is_same_v<T, BarabasiAlbert>) return "ba:" + fmt(x.mean_degree);
            else return "edges:" + x.path;
        },
        t);
}

inline std::string distribution_string(const Distribution& d) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Uniform>) return "uniform:" + fmt(x.lo) + ":" + fmt(x.hi);
            else if constexpr (std::is_same_v<T, ShiftedExponential>) return "exp:" + fmt(x.shift) + ":" + fmt(x.rate);
            else return "point:" + fmt(x.value);
        },
        d.kind());
}

inline std::string list_string(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

inline std::vector<double> sweep_grid(const Ctx& c, const std::string& s) {
    std::vector<double> g;
    if (s.find(':') != std::string::npos) {
        const auto p = split(s, ':');
        if (p.size() != 3) c.fail("expected lo:hi:step");
        const double lo = fraction(c, p[0]), hi = fraction(c, p[1]), step = number(c, p[2]);
        if (!(step > 0.0) || hi < lo) c.fail("sweep needs lo <= hi and step > 0");
        const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) g.push_back(std::min(hi, lo + static_cast<double>(i) * step));
    } else {
        g = fraction_list(c, s);
    }
    for (std::size_t i = 1; i < g.size(); ++i)
        if (!(g[i] > g[i - 1])) c.fail("sweep grid must be strictly increasing");
    return g;
}

inline CouplingMatrix matrix(const Ctx& c, const std::string& s) {
    const auto rows = split(s, ';');
    const std::size_t n = rows.size();
    std::vector<double> m;
    for (const auto& r : rows) {
        const auto e = split(r, ',');
        if (e.size() != n) c.fail("coupling matrix must be square");
        for (const auto& x : e) m.push_back(number(c, x));
    }
    CouplingMatrix cm(n, m);
    if (auto v = validate_coupling(cm)) c.fail("range error: " + v->message);
    return cm;
}

inline std::string matrix_string(const CouplingMatrix& m) {
    std::string s;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) s += ";";
        for (std::size_t j = 0; j < m.size(); ++j) s += (j ? "," : "") + fmt(m(i, j));
    }
    return s;
}

inline std::vector<CoefficientBox> boxes(const Ctx& c, const std::string& s) {
    std::vector<CoefficientBox> out;
    for (const auto& item : split(s, ',')) {
        const auto p = split(item, ':');
        if (p.size() != 2) c.fail("expected lo:hi per network");
        CoefficientBox b{fraction(c, p[0]), fraction(c, p[1])};
        if (b.lo > b.hi) c.fail("box lower bound exceeds upper bound");
        out.push_back(b);
    }
    return out;
}

inline CouplingBounds bounds_from_boxes(const std::vector<CoefficientBox>& b) {
    const std::size_t n = b.size();
    if (n == 2) return CouplingBounds::two_network(b[0], b[1]);
    auto lo = std::vector<double>(n * n, 0.0), hi = std::vector<double>(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i * n + i] = b[i].lo;
        hi[i * n + i] = b[i].hi;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) hi[i * n + j] = 1.0 - b[i].lo;
    }
    return CouplingBounds(n, lo, hi);
}

inline std::vector<CoefficientBox> boxes_from_bounds(const CouplingBounds& b) {
    std::vector<CoefficientBox> out;
    for (std::size_t i = 0; i < b.size(); ++i) out.push_back({b.lo(i, i), b.hi(i, i)});
    return out;
}

inline SwoSolver solver(const Ctx& c, const std::string& s) {
    if (s == "closed_form") return SwoSolver::ClosedFormUniform;
    if (s == "grid") return SwoSolver::GridFallback;
    if (s == "qp") return SwoSolver::MultiNetQP;
    c.fail("expected closed_form, grid or qp, got \"" + s + "\"");
}

inline const char* solver_string(SwoSolver s) {
    switch (s) {
        case SwoSolver::ClosedFormUniform: return "closed_form";
        case SwoSolver::GridFallback: return "grid";
        case SwoSolver::MultiNetQP: return "qp";
    }
    return "?";
}

inline NamedStrategy compare_entry(const Ctx& c, const std::string& s, std::size_t n,
                                   const CouplingStrategy& configured) {
    if (s == "sbd") return {"sbd", SizeBasedDynamic{}};
    if (s == "swo") {
        if (std::holds_alternative<StepwiseOptimization>(configured)) return {"swo", configured};
        return {"swo", StepwiseOptimization{CouplingBounds::unit(n)}};
    }
    const auto p = split(s, ':');
    if (p[0] == "fcc" && p.size() == 3 && n == 2) {
        const double a = fraction(c, p[1]), b = fraction(c, p[2]);
        return {"fcc:" + fmt(a) + ":" + fmt(b), FixedCoupling{CouplingMatrix::two_network(a, b)}};
    }
    c.fail("expected sbd, swo or fcc:<alpha>:<beta>, got \"" + s + "\"");
}

}  // namespace config_detail

inline RunConfig parse_config(std::string_view text) {
    using namespace config_detail;
    struct Entry {
        std::size_t line;
        std::string value;
    };
    std::map<std::string, Entry> kv;
    {
        std::istringstream in{std::string(text)};
        std::string raw;
        std::size_t lineno = 0;
        while (std::getline(in, raw)) {
            ++lineno;
            const auto hash = raw.find('#');
            if (hash != std::string::npos) raw.erase(hash);
            const auto line = trim(raw);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError(lineno, "", "expected key = value");
            auto key = trim(line.substr(0, eq));
            auto value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(lineno, "", "empty key");
            if (value.empty()) throw ConfigError(lineno, key, "empty value");
            if (kv.count(key)) throw ConfigError(lineno, key, "duplicate key (first set on line " +
                                                                  std::to_string(kv[key].line) + ")");
            kv[key] = {lineno, value};
        }
    }

    std::set<std::string> used;
    auto get = [&](const std::string& key) -> std::optional<std::pair<Ctx, std::string>> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        used.insert(key);
        return std::pair{Ctx{it->second.line, key}, it->second.value};
    };
    auto require = [&](const std::string& key) {
        auto v = get(key);
        if (!v) throw ConfigError(0, key, "missing required key");
        return *v;
    };

    RunConfig cfg;
    std::size_t n = 0;
    {
        auto [c, v] = require("networks");
        n = unsigned_int(c, v);
        if (n < 1 || n > 64) c.fail("network count must be between 1 and 64");
    }
    cfg.networks.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto prefix = "net." + std::to_string(k) + ".";
        auto& net = cfg.networks[k];
        {
            auto [c, v] = require(prefix + "nodes");
            net.node_count = unsigned_int(c, v);
            if (net.node_count < 1) c.fail("node count must be >= 1");
        }
        {
            auto [c, v] = require(prefix + "load");
            net.load = distribution(c, v);
        }
        {
            auto [c, v] = require(prefix + "space");
            net.space = distribution(c, v);
        }
        if (auto t = get(prefix + "topology")) {
            net.topology = topology(t->first, t->second);
            try {
                net.validate();
            } catch (const CascadeError& e) {
                t->first.fail(e.what());
            }
        }
    }

    if (auto a = get("attack")) {
        cfg.attack = fraction_list(a->first, a->second);
        if (cfg.attack.size() != n) a->first.fail("expected one fraction per network");
    }
    cfg.attack_shape.assign(n, 0.0);
    cfg.attack_shape[0] = 1.0;
    if (auto a = get("attack_shape")) {
        cfg.attack_shape = fraction_list(a->first, a->second);
        if (cfg.attack_shape.size() != n) a->first.fail("expected one fraction per network");
    }
    if (auto s = get("sweep")) cfg.sweep = sweep_grid(s->first, s->second);

    std::string kind = "sbd";
    std::optional<std::pair<Ctx, std::string>> strategy_line;
    if ((strategy_line = get("strategy"))) kind = strategy_line->second;
    auto matrix_v = get("strategy.matrix");
    auto bounds_v = get("strategy.bounds");
    auto solver_v = get("strategy.solver");
    auto res_v = get("strategy.resolution");
    auto misplaced = [](const std::optional<std::pair<Ctx, std::string>>& v, const char* why) {
        if (v) v->first.fail(why);
    };
    if (kind == "fcc") {
        if (!matrix_v) throw ConfigError(strategy_line->first.line, "strategy.matrix", "fcc needs strategy.matrix");
        auto m = matrix(matrix_v->first, matrix_v->second);
        if (m.size() != n) matrix_v->first.fail("matrix dimension does not match network count");
        cfg.strategy = FixedCoupling{m};
        misplaced(bounds_v, "only valid with strategy = swo");
        misplaced(solver_v, "only valid with strategy = swo");
        misplaced(res_v, "only valid with strategy = swo");
    } else if (kind == "sbd") {
        cfg.strategy = SizeBasedDynamic{};
        misplaced(matrix_v, "only valid with strategy = fcc");
        misplaced(bounds_v, "only valid with strategy = swo");
        misplaced(solver_v, "only valid with strategy = swo");
        misplaced(res_v, "only valid with strategy = swo");
    } else if (kind == "swo") {
        misplaced(matrix_v, "only valid with strategy = fcc");
        StepwiseOptimization swo;
        swo.bounds = CouplingBounds::unit(n);
        if (bounds_v) {
            auto b = boxes(bounds_v->first, bounds_v->second);
            if (b.size() != n) bounds_v->first.fail("expected one lo:hi box per network");
            swo.bounds = bounds_from_boxes(b);
            try {
                swo.bounds.validate();
            } catch (const CascadeError& e) {
                bounds_v->first.fail(e.what());
            }
        }
        if (solver_v) swo.solver = solver(solver_v->first, solver_v->second);
        if (res_v) {
            swo.resolution = number(res_v->first, res_v->second);
            if (!(swo.resolution > 0.0 && swo.resolution <= 1.0)) res_v->first.fail("resolution must be in (0,1]");
        }
        if (n > 2 && swo.solver != SwoSolver::MultiNetQP) swo.solver = SwoSolver::MultiNetQP;
        cfg.strategy = swo;
    } else {
        strategy_line->first.fail("expected fcc, sbd or swo, got \"" + kind + "\"");
    }

    if (auto v = get("compare"))
        for (const auto& item : split(v->second, ','))
            cfg.compare.push_back(compare_entry(v->first, item, n, cfg.strategy));

    if (auto v = get("engine")) {
        if (v->second == "meanfield") cfg.engine = Engine::MeanField;
        else if (v->second == "montecarlo") cfg.engine = Engine::MonteCarlo;
        else v->first.fail("expected meanfield or montecarlo");
    }
    if (auto v = get("seed")) cfg.seed = unsigned_int(v->first, v->second);
    if (auto v = get("runs")) {
        cfg.runs = unsigned_int(v->first, v->second);
        if (cfg.runs < 1) v->first.fail("runs must be >= 1");
    }
    if (auto v = get("max_steps")) {
        cfg.max_steps = unsigned_int(v->first, v->second);
        if (cfg.max_steps < 1) v->first.fail("max_steps must be >= 1");
    }
    if (auto v = get("tol")) {
        cfg.tol = number(v->first, v->second);
        if (!(cfg.tol > 0.0 && cfg.tol < 1.0)) v->first.fail("tol must be in (0,1)");
    }
    if (auto v = get("heatmap.resolution")) {
        cfg.heatmap_resolution = number(v->first, v->second);
        const double inv = 1.0 / cfg.heatmap_resolution;
        if (!(cfg.heatmap_resolution > 0.0) || std::abs(inv - std::round(inv)) > 1e-9)
            v->first.fail("resolution must divide 1 evenly");
    }
    if (auto v = get("heatmap.clip")) cfg.heatmap_clip = fraction(v->first, v->second);
    if (auto v = get("out_dir")) cfg.out_dir = v->second;

    for (const auto& [key, e] : kv)
        if (!used.count(key)) throw ConfigError(e.line, key, "unknown key");
    return cfg;
}

/// Normalized text: every key written, fixed order, shortest round-trip numbers.
inline std::string emit_config(const RunConfig& cfg) {
    using namespace config_detail;
    std::ostringstream os;
    os << "networks = " << cfg.networks.size() << '\n';
    for (std::size_t k = 0; k < cfg.networks.size(); ++k) {
        const auto& net = cfg.networks[k];
        const auto p = "net." + std::to_string(k) + ".";
        os << p << "nodes = " << net.node_count << '\n';
        os << p << "load = " << distribution_string(net.load) << '\n';
        os << p << "space = " << distribution_string(net.space) << '\n';
        os << p << "topology = " << topology_string(net.topology) << '\n';
    }
    if (!cfg.attack.empty()) os << "attack = " << list_string(cfg.attack) << '\n';
    os << "attack_shape = " << list_string(cfg.attack_shape) << '\n';
    if (!cfg.sweep.empty()) os << "sweep = " << list_string(cfg.sweep) << '\n';
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, FixedCoupling>) {
                os << "strategy = fcc\n";
                os << "strategy.matrix = " << matrix_string(s.matrix) << '\n';
            } else if constexpr (std::is_same_v<T, SizeBasedDynamic>) {
                os << "strategy = sbd\n";
            } else {
                os << "strategy = swo\n";
                os << "strategy.bounds = ";
                const auto b = boxes_from_bounds(s.bounds);
                for (std::size_t i = 0; i < b.size(); ++i) os << (i ? "," : "") << fmt(b[i].lo) << ':' << fmt(b[i].hi);
                os << '\n';
                os << "strategy.solver = " << solver_string(s.solver) << '\n';
                os << "strategy.resolution = " << fmt(s.resolution) << '\n';
            }
        },
        cfg.strategy);
    if (!cfg.compare.empty()) {
        os << "compare = ";
        for (std::size_t i = 0; i < cfg.compare.size(); ++i) {
            const auto& c = cfg.compare[i];
            os << (i ? "," : "");
            if (const auto* f = std::get_if<FixedCoupling>(&c.strategy))
                os << "fcc:" << fmt(f->matrix.alpha()) << ':' << fmt(f->matrix.beta());
            else os << c.name;
        }
        os << '\n';
    }
    os << "engine = " << (cfg.engine == Engine::MeanField ? "meanfield" : "montecarlo") << '\n';
    os << "seed = " << cfg.seed << '\n';
    os << "runs = " << cfg.runs << '\n';
    os << "max_steps = " << cfg.max_steps << '\n';
    os << "tol = " << fmt(cfg.tol) << '\n';
    os << "heatmap.resolution = " << fmt(cfg.heatmap_resolution) << '\n';
    os << "heatmap.clip = " << fmt(cfg.heatmap_clip) << '\n';
    os << "out_dir = " << cfg.out_dir << '\n';
    return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a(emit_config(cfg)); }

}  // namespace cascade

#pragma once

// Undirected simple graphs in compressed adjacency form, with Erdos-Renyi and
// Barabasi-Albert generators and a plain "u v" edge-list format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cascade/core.hpp"

namespace cascade {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

class Adjacency {
public:
    Adjacency() = default;

    /// Sentinel for global redistribution: no explicit edges stored.
    static Adjacency complete_sentinel(std::size_t n) {
        Adjacency a;
        a.n_ = n;
        a.complete_ = true;
        a.offset_.assign(n + 1, 0);
        return a;
    }

    /// Builds from an edge list; drops self-loops and duplicate edges.
    static Adjacency from_edges(std::size_t n, std::vector<Edge> edges) {
        for (auto& e : edges) {
            if (e.first >= n || e.second >= n) throw CascadeError("edge endpoint out of range");
            if (e.first > e.second) std::swap(e.first, e.second);
        }
        std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

        Adjacency a;
        a.n_ = n;
        a.offset_.assign(n + 1, 0);
        for (const auto& [u, v] : edges) {
            ++a.offset_[u + 1];
            ++a.offset_[v + 1];
        }
        for (std::size_t i = 0; i < n; ++i) a.offset_[i + 1] += a.offset_[i];
        a.nbr_.resize(a.offset_[n]);
        std::vector<std::size_t> fill(a.offset_.begin(), a.offset_.end() - 1);
        for (const auto& [u, v] : edges) {
            a.nbr_[fill[u]++] = v;
            a.nbr_[fill[v]++] = u;
        }
        for (std::size_t i = 0; i < n; ++i)
            std::sort(a.nbr_.begin() + static_cast<std::ptrdiff_t>(a.offset_[i]),
                      a.nbr_.begin() + static_cast<std::ptrdiff_t>(a.offset_[i + 1]));
        return a;
    }

    /// Every pair linked, stored explicitly (small n only).
    static Adjacency explicit_complete(std::size_t n) {
        std::vector<Edge> e;
        e.reserve(n * (n - 1) / 2);
        for (std::uint32_t u = 0; u < n; ++u)
            for (std::uint32_t v = u + 1; v < n; ++v) e.emplace_back(u, v);
        return from_edges(n, std::move(e));
    }

    std::size_t node_count() const { return n_; }
    bool is_complete_sentinel() const { return complete_; }
    std::size_t edge_count() const { return nbr_.size() / 2; }
    std::size_t degree(std::size_t i) const { return offset_[i + 1] - offset_[i]; }
    std::span<const std::uint32_t> neighbors(std::size_t i) const {
        return {nbr_.data() + offset_[i], degree(i)};
    }
    double mean_degree() const { return n_ ? static_cast<double>(nbr_.size()) / static_cast<double>(n_) : 0.0; }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(edge_count());
        for (std::uint32_t u = 0; u < n_; ++u)
            for (auto v : neighbors(u))
                if (u < v) out.emplace_back(u, v);
        return out;
    }

private:
    std::size_t n_ = 0;
    bool complete_ = false;
    std::vector<std::size_t> offset_;
    std::vector<std::uint32_t> nbr_;
};

/// G(n, p) with p = k/(n-1), by geometric skipping over the pair sequence.
inline Adjacency erdos_renyi(std::size_t n, double mean_degree, std::uint64_t seed) {
    if (n < 2) return Adjacency::from_edges(n, {});
    const double p = mean_degree / static_cast<double>(n - 1);
    if (!(p > 0.0 && p <= 1.0)) throw CascadeError("Erdos-Renyi edge probability outside (0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(mean_degree * static_cast<double>(n) / 2.0 * 1.05) + 16);
    if (p >= 1.0) return Adjacency::explicit_complete(n);

    const double log_q = std::log1p(-p);
    std::int64_t v = 1, w = -1;
    const auto nn = static_cast<std::int64_t>(n);
    while (v < nn) {
        const double r = 1.0 - u01(rng);  // (0,1]
        w += 1 + static_cast<std::int64_t>(std::floor(std::log(r) / log_q));
        while (w >= v && v < nn) {
            w -= v;
            ++v;
        }
        if (v < nn) edges.emplace_back(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(v));
    }
    return Adjacency::from_edges(n, std::move(edges));
}

/// Preferential attachment: seed clique of m+1 nodes, then each node links to
/// m distinct existing nodes chosen proportionally to degree, m = ceil(k/2).
inline Adjacency barabasi_albert(std::size_t n, double mean_degree, std::uint64_t seed) {
    const auto m = static_cast<std::size_t>(std::ceil(mean_degree / 2.0));
    if (m < 1) throw CascadeError("Barabasi-Albert needs mean_degree > 0");
    if (n <= m + 1) return Adjacency::explicit_complete(n);

    std::mt19937_64 rng(seed);
    std::vector<Edge> edges;
    edges.reserve(m * n);
    std::vector<std::uint32_t> endpoints;  // node repeated once per incident edge
    endpoints.reserve(2 * m * n);
    for (std::uint32_t u = 0; u <= m; ++u)
        for (std::uint32_t v = u + 1; v <= m; ++v) {
            edges.emplace_back(u, v);
            endpoints.push_back(u);
            endpoints.push_back(v);
        }

    std::vector<std::uint32_t> chosen;
    chosen.reserve(m);
    for (std::size_t v = m + 1; v < n; ++v) {
        chosen.clear();
        std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
        while (chosen.size() < m) {
            const auto t = endpoints[pick(rng)];
            if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) chosen.push_back(t);
        }
        for (auto t : chosen) {
            edges.emplace_back(t, static_cast<std::uint32_t>(v));
            endpoints.push_back(t);
            endpoints.push_back(static_cast<std::uint32_t>(v));
        }
    }
    return Adjacency::from_edges(n, std::move(edges));
}

// ---------------------------------------------------------------------------
// Edge-list I/O
// ---------------------------------------------------------------------------

inline std::vector<Edge> read_edge_list(std::istream& in, std::size_t n) {
    std::vector<Edge> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        long long u = 0, v = 0;
        if (!(ls >> u)) continue;  // blank line
        std::string rest;
        if (!(ls >> v) || (ls >> rest))
            throw CascadeError("edge list line " + std::to_string(lineno) + ": expected \"u v\"");
        if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n)
            throw CascadeError("edge list line " + std::to_string(lineno) + ": node index out of range");
        edges.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    }
    return edges;
}

inline Adjacency load_edge_list(const std::string& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) throw CascadeError("cannot open edge list: " + path);
    return Adjacency::from_edges(n, read_edge_list(in, n));
}

inline void write_edge_list(std::ostream& os, const Adjacency& a) {
    for (const auto& [u, v] : a.edges()) os << u << ' ' << v << '\n';
}

/// Adjacency for a topology; the complete graph is the global sentinel.
inline Adjacency generate_graph(const Topology& topo, std::size_t n, std::uint64_t seed) {
    return std::visit(
        [&](const auto& t) -> Adjacency {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, CompleteGraph>) return Adjacency::complete_sentinel(n);
            else if constexpr (std::is_same_v<T, ErdosRenyi>) return erdos_renyi(n, t.mean_degree, seed);
            else if constexpr (std::is_same_v<T, BarabasiAlbert>) return barabasi_albert(n, t.mean_degree, seed);
            else return load_edge_list(t.path, n);
        },
        topo);
}

}  // namespace cascade

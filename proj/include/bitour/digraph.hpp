#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bitour/bitset.hpp"
#include "bitour/errors.hpp"

namespace bitour {

using Vertex = int;

struct Arc {
    Vertex from = -1;
    Vertex to = -1;
    friend auto operator<=>(const Arc&, const Arc&) = default;
};

using ArcList = std::vector<Arc>;

// Loop-free digraph with bitset adjacency. Vertex ids are dense 0..n-1.
// `class_of` carries an optional vertex coloring (blow-up classes, bipartition
// sides); generators assign classes contiguously in blocks.
class Digraph {
public:
    Digraph() = default;
    explicit Digraph(int n, int num_classes = 0)
        : n_(n), num_classes_(num_classes), out_(n, bitset(n)), in_(n, bitset(n)),
          class_of_(num_classes > 0 ? n : 0, 0) {}

    int order() const { return n_; }
    int size() const { return m_; }

    int num_classes() const { return num_classes_; }
    int class_of(Vertex v) const { return class_of_[v]; }
    void set_class(Vertex v, int c) { class_of_[v] = c; }

    bool tournament_flag() const { return tournament_; }
    void set_tournament_flag(bool b) { tournament_ = b; }

    bool has_arc(Vertex u, Vertex v) const { return out_[u].test(v); }

    void add_arc(Vertex u, Vertex v) {
        require_arg(u != v, "add_arc: loop");
        require_arg(!has_arc(u, v), "add_arc: duplicate arc");
        out_[u].set(v);
        in_[v].set(u);
        ++m_;
    }

    void remove_arc(Vertex u, Vertex v) {
        require_arg(has_arc(u, v), "remove_arc: no such arc");
        out_[u].reset(v);
        in_[v].reset(u);
        --m_;
    }

    const bitset& out_nbrs(Vertex v) const { return out_[v]; }
    const bitset& in_nbrs(Vertex v) const { return in_[v]; }

    int out_deg(Vertex v) const { return out_[v].count(); }
    int in_deg(Vertex v) const { return in_[v].count(); }

    ArcList arcs() const {
        ArcList a;
        a.reserve(m_);
        for (Vertex u = 0; u < n_; ++u)
            for_each_bit(out_[u], [&](int v) { a.push_back({u, v}); });
        return a;
    }

    std::vector<Vertex> vertices_of_class(int c) const {
        std::vector<Vertex> vs;
        for (Vertex v = 0; v < n_; ++v)
            if (class_of_[v] == c) vs.push_back(v);
        return vs;
    }

private:
    int n_ = 0;
    int m_ = 0;
    int num_classes_ = 0;
    bool tournament_ = false;
    std::vector<bitset> out_, in_;
    std::vector<int> class_of_;
};

// Numeric thresholds like "degree > gamma*n" come from decimal parameters, so
// products are snapped to the nearest integer before comparing. This keeps
// e.g. 0.3 * 10 meaning exactly 3.
inline double snapped(double x) {
    double r = std::round(x);
    return (std::abs(x - r) < 1e-9) ? r : x;
}

inline bool gt_threshold(int value, double threshold) { return double(value) > snapped(threshold); }
inline bool ge_threshold(int value, double threshold) { return double(value) >= snapped(threshold); }
inline bool le_threshold(int value, double threshold) { return double(value) <= snapped(threshold); }

// "at least x" with x real becomes an integral ceiling.
inline int ceil_threshold(double x) { return int(std::ceil(snapped(x))); }

struct Params {
    double eps = 0.1;
    double eps_prime = 0.2;
    double gamma = 0.25;
    double nu = 0.05;
    double nu_prime = 0.01;
    double tau = 0.3;

    void validate() const {
        require_arg(eps > 0 && eps_prime < 1 && eps <= eps_prime, "params: need 0 < eps <= eps_prime < 1");
        require_arg(nu_prime > 0 && nu_prime <= nu && nu <= tau && tau < 1,
                    "params: need 0 < nu_prime <= nu <= tau < 1");
        require_arg(gamma > 0 && gamma <= 0.5, "params: need 0 < gamma <= 1/2");
    }
};

// Complete blow-up C_K on vertex classes of size n: class i is the id block
// [i*n, (i+1)*n) and every arc goes from class i to class i+1 (mod K).
inline Digraph make_blowup_cycle(int K, int n) {
    require_arg(K >= 3, "make_blowup_cycle: K >= 3 required");
    require_arg(n >= 1, "make_blowup_cycle: n >= 1 required");
    Digraph d(K * n, K);
    for (int c = 0; c < K; ++c)
        for (int i = 0; i < n; ++i) d.set_class(c * n + i, c);
    for (int c = 0; c < K; ++c) {
        int cn = (c + 1) % K;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) d.add_arc(c * n + i, cn * n + j);
    }
    if (K % 2 == 0) d.set_tournament_flag(true);
    return d;
}

// Reverse each arc of `which`; rejects reversals that would create a
// parallel pair. Classes and tournament flag carry over.
inline Digraph flip_edges(const Digraph& d, const ArcList& which) {
    for (const Arc& a : which) {
        require_arg(d.has_arc(a.from, a.to), "flip_edges: arc not present");
        require_arg(!d.has_arc(a.to, a.from), "flip_edges: reversal would create a parallel pair");
    }
    Digraph r = d;
    for (const Arc& a : which) r.remove_arc(a.from, a.to);
    for (const Arc& a : which) r.add_arc(a.to, a.from);
    return r;
}

// The regular tripartite tournament with no Hamilton decomposition: the
// n-fold blow-up of C_3 with one transversal triangle reversed.
inline Digraph tripartite_counterexample(int n) {
    require_arg(n >= 2, "tripartite_counterexample: n >= 2 required");
    Digraph d = make_blowup_cycle(3, n);
    Vertex u1 = 0, u2 = n, u3 = 2 * n;
    return flip_edges(d, {{u1, u2}, {u2, u3}, {u3, u1}});
}

// Portable uniform draw in [0, k); raw mt19937_64 output is identical across
// platforms, std::uniform_int_distribution is not.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t k) {
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % k);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % k;
}

// Test-instance generator: start from the complete blow-up C4 and reverse
// random directed 4-cycles. Each reversal keeps every in/out degree and the
// tournament property. Two cycle shapes are sampled: transversals
// x1 x2 x3 x4 with one vertex per class, and alternating 4-cycles inside a
// single pair (u, v, u', v' with u,u' in U_i and v,v' in U_{i+1}); the
// within-pair shape only exists once some backward arcs are present, so
// transversals seed the randomness. Failed attempts are skipped, with an
// attempt cap of 100 * flips.
inline Digraph random_regular_bitournament(int n, int flips, std::uint64_t seed) {
    require_arg(n >= 1, "random_regular_bitournament: n >= 1 required");
    require_arg(flips >= 0, "random_regular_bitournament: flips >= 0 required");
    Digraph d = make_blowup_cycle(4, n);
    std::mt19937_64 rng(seed);
    long attempts_left = 100L * flips;
    int done = 0;
    auto vertex_in_class = [&](int c) -> Vertex { return Vertex(c * n + uniform_below(rng, n)); };
    while (done < flips && attempts_left-- > 0) {
        Vertex c0, c1, c2, c3;
        if (uniform_below(rng, 2) == 0) {
            c0 = vertex_in_class(0);
            c1 = vertex_in_class(1);
            c2 = vertex_in_class(2);
            c3 = vertex_in_class(3);
        } else {
            int i = int(uniform_below(rng, 4));
            int j = (i + 1) % 4;
            c0 = vertex_in_class(i);
            c1 = vertex_in_class(j);
            c2 = vertex_in_class(i);
            c3 = vertex_in_class(j);
            if (c0 == c2 || c1 == c3) continue;
        }
        if (d.has_arc(c0, c1) && d.has_arc(c1, c2) && d.has_arc(c2, c3) && d.has_arc(c3, c0)) {
            d = flip_edges(d, {{c0, c1}, {c1, c2}, {c2, c3}, {c3, c0}});
            ++done;
        }
    }
    return d;
}

// r if every vertex has in- and outdegree exactly r, otherwise nothing.
inline std::optional<int> is_regular(const Digraph& d) {
    if (d.order() == 0) return 0;
    int r = d.out_deg(0);
    for (Vertex v = 0; v < d.order(); ++v)
        if (d.out_deg(v) != r || d.in_deg(v) != r) return std::nullopt;
    return r;
}

// Exhaustive check that every cross pair carries exactly one arc and no
// same-side pair carries any, for the given two-coloring of vertices.
inline bool is_bipartite_tournament(const Digraph& d, const std::vector<int>& side) {
    for (Vertex u = 0; u < d.order(); ++u)
        for (Vertex v = u + 1; v < d.order(); ++v) {
            int arcs = int(d.has_arc(u, v)) + int(d.has_arc(v, u));
            if (side[u] == side[v]) {
                if (arcs != 0) return false;
            } else if (arcs != 1) {
                return false;
            }
        }
    return true;
}

}  // namespace bitour

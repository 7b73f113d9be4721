#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bitour/feasible.hpp"
#include "bitour/matchwork.hpp"

namespace bitour {

inline Digraph digraph_from_arcs(int n, const ArcList& arcs) {
    Digraph d(n);
    for (const Arc& a : arcs)
        if (!d.has_arc(a.from, a.to)) d.add_arc(a.from, a.to);
    return d;
}

inline Digraph remove_arcs(Digraph d, const ArcList& arcs) {
    for (const Arc& a : arcs) d.remove_arc(a.from, a.to);
    return d;
}

// ---------------------------------------------------------------------------
// Extending linear forests: each request index i asks to cover S_i^+ with
// out-arcs and S_i^- with in-arcs inside a bipartite host on (A,B), avoiding
// T_i in B, with every B-vertex used by at most N of the outputs.
// ---------------------------------------------------------------------------

struct ExtendRequest {
    const Digraph* host = nullptr;
    std::vector<Vertex> A, B;
    std::vector<std::vector<Vertex>> s_plus, s_minus;  // per index, subsets of A
    std::vector<std::vector<Vertex>> avoid;            // per index, subsets of B
    int cap = 1;                                       // N in [1, 2|A|]

    std::size_t indices() const { return s_plus.size(); }

    // The degree hypothesis: for every (i, diamond, v in S_i^diamond),
    //   d^diamond(v) >= c_{i,diamond,v}            when N = 2|A|
    //   d^diamond(v) >= sum/|_N_| + c_{i,diamond,v} otherwise,
    // where c is the max of the tuple multiplicity of v, 2(|S_i^+|+|S_i^-|+|T_i|),
    // and 2(max_w n_w + N). Throws invalid_argument naming the first failure.
    void validate() const;
};

inline void ExtendRequest::validate() const {
    require_arg(host != nullptr, "extend request: missing host");
    require_arg(s_plus.size() == s_minus.size() && s_plus.size() == avoid.size(),
                "extend request: index count mismatch");
    require_arg(cap >= 1 && cap <= 2 * int(A.size()), "extend request: N out of range");
    std::set<Vertex> a_set(A.begin(), A.end()), b_set(B.begin(), B.end());
    for (Vertex v : A) require_arg(!b_set.count(v), "extend request: A and B intersect");
    long sum_s = 0;
    std::map<Vertex, int> n_w, mult_plus, mult_minus;
    for (std::size_t i = 0; i < indices(); ++i) {
        for (Vertex v : s_plus[i]) {
            require_arg(a_set.count(v), "extend request: S^+ off A");
            ++mult_plus[v];
        }
        for (Vertex v : s_minus[i]) {
            require_arg(a_set.count(v), "extend request: S^- off A");
            ++mult_minus[v];
        }
        for (Vertex w : avoid[i]) {
            require_arg(b_set.count(w), "extend request: T off B");
            ++n_w[w];
        }
        sum_s += long(s_plus[i].size() + s_minus[i].size());
    }
    int max_nw = 0;
    for (const auto& [w, c] : n_w) max_nw = std::max(max_nw, c);
    bool full_cap = (cap == 2 * int(A.size()));
    bitset b_mask(host->order());
    for (Vertex w : B) b_mask.set(w);
    for (std::size_t i = 0; i < indices(); ++i) {
        long base = 2 * long(s_plus[i].size() + s_minus[i].size() + avoid[i].size());
        for (int diamond = 0; diamond < 2; ++diamond) {
            const auto& s = diamond == 0 ? s_plus[i] : s_minus[i];
            auto& mult = diamond == 0 ? mult_plus : mult_minus;
            for (Vertex v : s) {
                long c = std::max({long(mult[v]), base, 2L * (max_nw + cap)});
                long deg = (diamond == 0 ? host->out_nbrs(v) : host->in_nbrs(v)).count_and(b_mask);
                bool ok = full_cap ? deg >= c : (deg - c) * long(cap) >= sum_s;
                require_arg(ok, std::string("extend request: degree hypothesis fails at ") +
                                    (diamond == 0 ? "S^+" : "S^-") + " vertex " + std::to_string(v) +
                                    " of index " + std::to_string(i));
            }
        }
    }
}

// The linear forests Q_1..Q_l of the extension lemma. Conclusions re-verified
// before returning:
//   (a) Q_i is an in-matching of size |S_i^-| plus an out-matching of size
//       |S_i^+|, all B-endpoints off T_i,
//   (b) every B-vertex lies in at most N of the Q_i,
//   (c) every B-vertex has degree at most 1 in each Q_i.
inline std::vector<LinearForest> extend_linear_forests(const ExtendRequest& req,
                                                       const std::vector<LinearForest>& forests) {
    req.validate();
    std::size_t ell = req.indices();
    require_arg(forests.empty() || forests.size() == ell,
                "extend_linear_forests: forest count mismatch");
    bitset b_mask(req.host->order());
    for (Vertex w : req.B) b_mask.set(w);

    std::vector<std::set<Vertex>> t_set(ell);
    for (std::size_t i = 0; i < ell; ++i) t_set[i] = {req.avoid[i].begin(), req.avoid[i].end()};

    if (!forests.empty()) {
        bitset a_mask(req.host->order());
        for (Vertex v : req.A) a_mask.set(v);
        for (std::size_t i = 0; i < ell; ++i) {
            const LinearForest& f = forests[i];
            for (const Arc& a : f.arcs()) {
                bool crosses = (a_mask.test(a.from) && b_mask.test(a.to)) ||
                               (b_mask.test(a.from) && a_mask.test(a.to));
                require_arg(!(crosses && req.host->has_arc(a.from, a.to)),
                            "extend_linear_forests: forest shares an arc with the host");
            }
            for (std::size_t j = i + 1; j < ell; ++j)
                require_arg(arc_disjoint(f, forests[j]),
                            "extend_linear_forests: forests are not edge-disjoint");
            std::set<Vertex> ends(f.ends().begin(), f.ends().end());
            std::set<Vertex> starts(f.starts().begin(), f.starts().end());
            std::set<Vertex> covered(f.covered_vertices().begin(), f.covered_vertices().end());
            for (Vertex v : req.s_plus[i])
                require_arg(!covered.count(v) || ends.count(v),
                            "extend_linear_forests: S^+ vertex already has an out-arc in its forest");
            for (Vertex v : req.s_minus[i])
                require_arg(!covered.count(v) || starts.count(v),
                            "extend_linear_forests: S^- vertex already has an in-arc in its forest");
            for (Vertex v : covered)
                if (b_mask.test(v))
                    require_arg(t_set[i].count(v),
                                "extend_linear_forests: forest touches B outside its avoid set");
        }
    }

    // Tuple loop: all (+, v) in ascending v, then all (-, v).
    std::vector<ArcList> q(ell);
    std::vector<std::set<Vertex>> q_b(ell);  // B-vertices used by Q_i
    std::map<Vertex, int> use_count;
    for (int diamond = 0; diamond < 2; ++diamond) {
        std::set<Vertex> tuple_vs;
        for (std::size_t i = 0; i < ell; ++i)
            for (Vertex v : (diamond == 0 ? req.s_plus[i] : req.s_minus[i])) tuple_vs.insert(v);
        for (Vertex v : tuple_vs) {
            std::vector<int> y;
            for (std::size_t i = 0; i < ell; ++i) {
                const auto& s = diamond == 0 ? req.s_plus[i] : req.s_minus[i];
                if (std::find(s.begin(), s.end(), v) != s.end()) y.push_back(int(i));
            }
            // Candidate arcs at v whose B-endpoint is not yet saturated.
            ArcList z;
            const bitset& nbrs = diamond == 0 ? req.host->out_nbrs(v) : req.host->in_nbrs(v);
            for_each_bit(nbrs, [&](int w) {
                if (!b_mask.test(w)) return;
                auto it = use_count.find(w);
                if (it != use_count.end() && it->second >= req.cap) return;
                z.push_back(diamond == 0 ? Arc{v, w} : Arc{Vertex(w), v});
            });
            BipGraph g(int(y.size()), int(z.size()));
            for (std::size_t yi = 0; yi < y.size(); ++yi) {
                int i = y[yi];
                for (std::size_t zi = 0; zi < z.size(); ++zi) {
                    Vertex w = diamond == 0 ? z[zi].to : z[zi].from;
                    if (!q_b[i].count(w) && !t_set[i].count(w)) g.add_edge(int(yi), int(zi));
                }
            }
            g.finish();
            std::vector<int> match;
            try {
                match = hall_cover(g);
            } catch (const invalid_argument& e) {
                throw invariant_violation(std::string("extend_linear_forests: internal Hall step failed (") +
                                          e.what() + ")");
            }
            for (std::size_t yi = 0; yi < y.size(); ++yi) {
                int i = y[yi];
                const Arc& arc = z[match[yi]];
                Vertex w = diamond == 0 ? arc.to : arc.from;
                q[i].push_back(arc);
                q_b[i].insert(w);
                ++use_count[w];
            }
        }
    }

    // Recount conclusions (a)-(c).
    std::vector<LinearForest> out;
    for (std::size_t i = 0; i < ell; ++i) {
        std::set<Vertex> in_b, out_b;
        std::size_t out_arcs = 0, in_arcs = 0;
        std::set<Vertex> covered_plus, covered_minus;
        for (const Arc& a : q[i]) {
            if (b_mask.test(a.to)) {
                ++out_arcs;
                ensure(out_b.insert(a.to).second, "extend_linear_forests: (a) out-part not a matching");
                ensure(!t_set[i].count(a.to), "extend_linear_forests: (a) avoid set violated");
                covered_plus.insert(a.from);
            } else {
                ++in_arcs;
                ensure(in_b.insert(a.from).second, "extend_linear_forests: (a) in-part not a matching");
                ensure(!t_set[i].count(a.from), "extend_linear_forests: (a) avoid set violated");
                covered_minus.insert(a.to);
            }
        }
        ensure(out_arcs == req.s_plus[i].size() && covered_plus.size() == req.s_plus[i].size(),
               "extend_linear_forests: (a) out-matching size mismatch");
        ensure(in_arcs == req.s_minus[i].size() && covered_minus.size() == req.s_minus[i].size(),
               "extend_linear_forests: (a) in-matching size mismatch");
        for (Vertex w : in_b)
            ensure(!out_b.count(w), "extend_linear_forests: (c) matchings meet in B");
        LinearForest lf(q[i]);
        ensure(lf.valid(), "extend_linear_forests: output is not a linear forest");
        if (!forests.empty()) {
            ensure(arc_disjoint(lf, forests[i]), "extend_linear_forests: output overlaps its forest");
            ensure(forest_union(lf, forests[i]).valid(),
                   "extend_linear_forests: union with forest is not a linear forest");
        }
        out.push_back(std::move(lf));
    }
    for (const auto& [w, c] : use_count)
        ensure(c <= req.cap, "extend_linear_forests: (b) B-vertex used by more than N outputs");
    for (std::size_t i = 0; i < ell; ++i)
        for (std::size_t j = i + 1; j < ell; ++j)
            ensure(arc_disjoint(out[i], out[j]), "extend_linear_forests: outputs not edge-disjoint");
    return out;
}

// ---------------------------------------------------------------------------
// Moving degree-2 vertices between paired matchings. Vertices are plain
// (copy 0) or the first/second copy of a split vertex (copy 1/2).
// ---------------------------------------------------------------------------

struct SplitVertex {
    Vertex v = -1;
    int copy = 0;
    friend auto operator<=>(const SplitVertex&, const SplitVertex&) = default;
};

struct SplitEdge {
    SplitVertex x, y;
    friend auto operator<=>(const SplitEdge&, const SplitEdge&) = default;
};

using SplitMatching = std::vector<SplitEdge>;

namespace detail {

inline bool covers(const SplitMatching& m, const SplitVertex& sv) {
    for (const SplitEdge& e : m)
        if (e.x == sv || e.y == sv) return true;
    return false;
}

inline SplitEdge edge_at(const SplitMatching& m, const SplitVertex& sv) {
    for (const SplitEdge& e : m)
        if (e.x == sv || e.y == sv) return e;
    throw invariant_violation("move_degree2: expected edge missing");
}

inline void erase_edge(SplitMatching& m, const SplitEdge& e) {
    m.erase(std::remove(m.begin(), m.end(), e), m.end());
}

inline int copies_covered(const SplitMatching& m, Vertex w) {
    int c = 0;
    for (const SplitEdge& e : m) {
        c += (e.x.v == w && e.x.copy > 0);
        c += (e.y.v == w && e.y.copy > 0);
    }
    return c;
}

}  // namespace detail

// Subsets M1' <= M1 and M2' <= M2 with |M1'| = |M2'|, one of them touching
// only second copies, and each of M_i', M_i \ M_i' covering at most one copy
// of every split vertex. Follows the inductive case analysis exactly.
inline std::pair<SplitMatching, SplitMatching> move_degree2(const SplitMatching& m1_in,
                                                            const SplitMatching& m2_in) {
    require_arg(m1_in.size() == m2_in.size(), "move_degree2: |M1| != |M2|");
    for (const SplitMatching* m : {&m1_in, &m2_in}) {
        std::set<SplitVertex> seen;
        for (const SplitEdge& e : *m) {
            require_arg(e.x.copy >= 0 && e.x.copy <= 2 && e.y.copy >= 0 && e.y.copy <= 2,
                        "move_degree2: bad copy tag");
            require_arg(seen.insert(e.x).second && seen.insert(e.y).second,
                        "move_degree2: input is not a matching");
            require_arg(!(e.x.copy == 2 && e.y.copy != 0) && !(e.y.copy == 2 && e.x.copy != 0),
                        "move_degree2: an edge joins W^2 to W^1 u W^2");
        }
    }

    auto sorted = [](SplitMatching m) {
        for (auto& e : m)
            if (e.y < e.x) std::swap(e.x, e.y);
        std::sort(m.begin(), m.end());
        return m;
    };

    auto run = [&](auto&& self, SplitMatching m1, SplitMatching m2)
        -> std::pair<SplitMatching, SplitMatching> {
        std::size_t m = m1.size();
        if (m <= 1) return {{}, {}};
        std::array<SplitMatching*, 2> ms{&m1, &m2};
        std::array<std::vector<Vertex>, 2> x, y, z;
        for (int i = 0; i < 2; ++i) {
            std::set<Vertex> first, second;
            for (const SplitEdge& e : *ms[i]) {
                for (const SplitVertex& sv : {e.x, e.y}) {
                    if (sv.copy == 1) first.insert(sv.v);
                    if (sv.copy == 2) second.insert(sv.v);
                }
            }
            for (Vertex w : first)
                if (second.count(w)) x[i].push_back(w);
            for (Vertex w : x[i]) {
                SplitEdge e = detail::edge_at(*ms[i], {w, 1});
                SplitVertex other = (e.x == SplitVertex{w, 1}) ? e.y : e.x;
                bool in_x = other.copy == 1 &&
                            std::find(x[i].begin(), x[i].end(), other.v) != x[i].end();
                (in_x ? y[i] : z[i]).push_back(w);
            }
        }
        if (x[0].empty() && x[1].empty()) return {{}, {}};

        if (!y[0].empty() && !y[1].empty()) {
            // Case 1: both sides hold an edge matched inside X^1; detach it and
            // the two edges at the second copies, recurse, put the latter back.
            std::array<SplitMatching, 2> primed;
            std::array<SplitMatching, 2> reduced{*ms[0], *ms[1]};
            std::array<std::vector<SplitEdge>, 2> back;
            for (int i = 0; i < 2; ++i) {
                SplitEdge y_edge{};
                bool found = false;
                for (const SplitEdge& e : sorted(*ms[i])) {
                    if (e.x.copy == 1 && e.y.copy == 1 &&
                        std::find(y[i].begin(), y[i].end(), e.x.v) != y[i].end() &&
                        std::find(y[i].begin(), y[i].end(), e.y.v) != y[i].end()) {
                        y_edge = e;
                        found = true;
                        break;
                    }
                }
                ensure(found, "move_degree2: Y-side edge missing");
                SplitEdge e2 = detail::edge_at(*ms[i], {y_edge.x.v, 2});
                SplitEdge e2p = detail::edge_at(*ms[i], {y_edge.y.v, 2});
                detail::erase_edge(reduced[i], y_edge);
                detail::erase_edge(reduced[i], e2);
                detail::erase_edge(reduced[i], e2p);
                back[i] = {e2, e2p};
            }
            auto [r1, r2] = self(self, reduced[0], reduced[1]);
            primed[0] = r1;
            primed[1] = r2;
            for (int i = 0; i < 2; ++i)
                primed[i].insert(primed[i].end(), back[i].begin(), back[i].end());
            return {primed[0], primed[1]};
        }

        if (!z[0].empty() && !z[1].empty()) {
            // Case 2: both sides hold a Z-vertex; detach its two edges,
            // recurse, put the second-copy edge back.
            std::array<SplitMatching, 2> reduced{*ms[0], *ms[1]};
            std::array<SplitEdge, 2> back;
            for (int i = 0; i < 2; ++i) {
                Vertex w = *std::min_element(z[i].begin(), z[i].end());
                SplitEdge e1 = detail::edge_at(*ms[i], {w, 1});
                SplitEdge e2 = detail::edge_at(*ms[i], {w, 2});
                detail::erase_edge(reduced[i], e1);
                detail::erase_edge(reduced[i], e2);
                back[i] = e2;
            }
            auto [r1, r2] = self(self, reduced[0], reduced[1]);
            r1.push_back(back[0]);
            r2.push_back(back[1]);
            return {r1, r2};
        }

        // Case 3: min(|Y1|,|Y2|) = 0 = min(|Z1|,|Z2|).
        auto edges_at_second = [&](int i, const std::set<Vertex>& skip = {}) {
            SplitMatching sel;
            for (const SplitEdge& e : sorted(*ms[i]))
                if ((e.x.copy == 2 && !skip.count(e.x.v)) || (e.y.copy == 2 && !skip.count(e.y.v)))
                    sel.push_back(e);
            return sel;
        };
        auto edges_off_x = [&](int i, std::size_t take) {
            SplitMatching sel;
            std::set<Vertex> xs(x[i].begin(), x[i].end());
            for (const SplitEdge& e : sorted(*ms[i])) {
                bool touches = (e.x.copy > 0 && xs.count(e.x.v)) || (e.y.copy > 0 && xs.count(e.y.v));
                if (!touches && sel.size() < take) sel.push_back(e);
            }
            ensure(sel.size() == take, "move_degree2: not enough edges off X");
            return sel;
        };

        std::size_t yy = std::max(y[0].size(), y[1].size());
        std::size_t zz = std::max(z[0].size(), z[1].size());
        std::array<SplitMatching, 2> primed;
        if (x[0].empty() || x[1].empty()) {
            // Case 3.1: one side has no problematic vertex at all.
            int j = x[0].empty() ? 1 : 0;
            int i = 1 - j;
            primed[j] = edges_at_second(j);
            primed[i] = edges_off_x(i, yy + zz);
        } else {
            // One side is all-Y, the other all-Z.
            int a = z[0].empty() ? 0 : 1;  // Y-side
            int b = 1 - a;                 // Z-side
            ensure(z[a].empty() && y[b].empty(), "move_degree2: case analysis out of sync");
            if (zz >= yy) {
                primed[a] = edges_at_second(a);
                SplitMatching extra = edges_off_x(a, zz - yy);
                primed[a].insert(primed[a].end(), extra.begin(), extra.end());
                primed[b] = edges_at_second(b);
            } else if (yy >= 2 * zz) {
                primed[a] = edges_at_second(a);
                primed[b] = edges_at_second(b);
                SplitMatching extra = edges_off_x(b, yy - zz);
                primed[b].insert(primed[b].end(), extra.begin(), extra.end());
            } else {
                // 2z > y > z: take y-z edges of M_a[Y^1] plus the second-copy
                // edges away from their twins.
                SplitMatching s1;
                std::set<Vertex> s2;
                for (const SplitEdge& e : sorted(*ms[a])) {
                    if (s1.size() == yy - zz) break;
                    if (e.x.copy == 1 && e.y.copy == 1 &&
                        std::find(y[a].begin(), y[a].end(), e.x.v) != y[a].end() &&
                        std::find(y[a].begin(), y[a].end(), e.y.v) != y[a].end()) {
                        s1.push_back(e);
                        s2.insert(e.x.v);
                        s2.insert(e.y.v);
                    }
                }
                ensure(s1.size() == yy - zz, "move_degree2: case 3.4 ran out of Y-edges");
                primed[a] = s1;
                SplitMatching at2 = edges_at_second(a, s2);
                primed[a].insert(primed[a].end(), at2.begin(), at2.end());
                primed[b] = edges_at_second(b);
            }
        }
        return {primed[0], primed[1]};
    };

    auto [p1, p2] = run(run, m1_in, m2_in);

    // Conclusions (a)-(c), recounted.
    ensure(p1.size() == p2.size(), "move_degree2: (a) sizes differ");
    auto is_subset = [](const SplitMatching& sub, const SplitMatching& sup) {
        for (const SplitEdge& e : sub) {
            bool found = false;
            for (const SplitEdge& f : sup)
                found |= (e == f) || (e.x == f.y && e.y == f.x);
            if (!found) return false;
        }
        return true;
    };
    ensure(is_subset(p1, m1_in) && is_subset(p2, m2_in), "move_degree2: output not a subset");
    auto all_second = [](const SplitMatching& m) {
        for (const SplitEdge& e : m)
            if (e.x.copy != 2 && e.y.copy != 2) return false;
        return true;
    };
    ensure(p1.empty() || p2.empty() || all_second(p1) || all_second(p2),
           "move_degree2: (b) neither side confined to W^2");
    for (int i = 0; i < 2; ++i) {
        const SplitMatching& prime = i == 0 ? p1 : p2;
        const SplitMatching& whole = i == 0 ? m1_in : m2_in;
        SplitMatching rest;
        for (const SplitEdge& e : whole) {
            bool in_prime = false;
            for (const SplitEdge& f : prime)
                in_prime |= (e == f) || (e.x == f.y && e.y == f.x);
            if (!in_prime) rest.push_back(e);
        }
        std::set<Vertex> ws;
        for (const SplitEdge& e : whole) {
            if (e.x.copy > 0) ws.insert(e.x.v);
            if (e.y.copy > 0) ws.insert(e.y.v);
        }
        for (Vertex w : ws) {
            ensure(detail::copies_covered(prime, w) <= 1, "move_degree2: (c) two copies in M'");
            ensure(detail::copies_covered(rest, w) <= 1, "move_degree2: (c) two copies in M \\ M'");
        }
    }
    return {p1, p2};
}

}  // namespace bitour

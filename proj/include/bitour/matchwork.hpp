#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "bitour/digraph.hpp"
#include "bitour/linear_forest.hpp"

namespace bitour {

// Bipartite graph on local left/right indices; matching algorithms work on
// this and callers translate to global vertex ids.
struct BipGraph {
    int nl = 0, nr = 0;
    std::vector<std::vector<int>> adj;  // left -> sorted right neighbors

    BipGraph() = default;
    BipGraph(int l, int r) : nl(l), nr(r), adj(l) {}

    void add_edge(int l, int r) { adj[l].push_back(r); }

    void finish() {
        for (auto& a : adj) {
            std::sort(a.begin(), a.end());
            a.erase(std::unique(a.begin(), a.end()), a.end());
        }
    }

    long edge_count() const {
        long e = 0;
        for (const auto& a : adj) e += long(a.size());
        return e;
    }
};

// Hopcroft-Karp maximum matching; returns match_l (right partner of each
// left vertex, -1 if unmatched). Deterministic for a fixed adjacency order.
inline std::vector<int> max_matching(const BipGraph& g) {
    std::vector<int> match_l(g.nl, -1), match_r(g.nr, -1), dist(g.nl);
    const int INF = 1 << 29;

    auto bfs = [&]() {
        std::queue<int> q;
        for (int u = 0; u < g.nl; ++u) {
            if (match_l[u] < 0) {
                dist[u] = 0;
                q.push(u);
            } else {
                dist[u] = INF;
            }
        }
        bool found = false;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int v : g.adj[u]) {
                int w = match_r[v];
                if (w < 0) {
                    found = true;
                } else if (dist[w] == INF) {
                    dist[w] = dist[u] + 1;
                    q.push(w);
                }
            }
        }
        return found;
    };

    std::vector<int> it(g.nl);
    auto dfs = [&](auto&& self, int u) -> bool {
        for (int& i = it[u]; i < int(g.adj[u].size()); ++i) {
            int v = g.adj[u][i];
            int w = match_r[v];
            if (w < 0 || (dist[w] == dist[u] + 1 && self(self, w))) {
                match_l[u] = v;
                match_r[v] = u;
                return true;
            }
        }
        return false;
    };

    while (bfs()) {
        std::fill(it.begin(), it.end(), 0);
        for (int u = 0; u < g.nl; ++u)
            if (match_l[u] < 0) dfs(dfs, u);
    }
    return match_l;
}

inline int matching_size(const std::vector<int>& match_l) {
    int s = 0;
    for (int v : match_l) s += (v >= 0);
    return s;
}

// Matching covering the whole left class, guaranteed under the Hall-type
// degree conditions d(a) >= |B|/2 and d(b) >= |A| - |B|/2.
inline std::vector<int> hall_cover(const BipGraph& g) {
    require_arg(g.nl <= g.nr, "hall_cover: requires |A| <= |B|");
    std::vector<int> rdeg(g.nr, 0);
    for (int u = 0; u < g.nl; ++u) {
        require_arg(2 * int(g.adj[u].size()) >= g.nr,
                    "hall_cover: left degree below |B|/2 at index " + std::to_string(u));
        for (int v : g.adj[u]) ++rdeg[v];
    }
    for (int v = 0; v < g.nr; ++v)
        require_arg(2 * rdeg[v] >= 2 * g.nl - g.nr,
                    "hall_cover: right degree below |A| - |B|/2 at index " + std::to_string(v));
    std::vector<int> m = max_matching(g);
    ensure(matching_size(m) == g.nl, "hall_cover: degree conditions hold but the cover is short");
    return m;
}

// Edge of a bipartite multigraph in local indices. Edges are distinct
// objects even when parallel.
struct BipEdge {
    int l = 0, r = 0;
};

// Proper Delta-edge-coloring of a bipartite multigraph by alternating-path
// recoloring, then a size-equalization pass moving edges between the largest
// and smallest color classes along maximal two-colored paths. Output:
// color[e] in [0, Delta) with classes forming matchings of sizes within 1.
inline std::vector<int> konig_equal_split_colors(const std::vector<BipEdge>& edges, int nl, int nr,
                                                 int delta) {
    require_arg(delta >= 0, "konig_equal_split: negative Delta");
    std::vector<int> ldeg(nl, 0), rdeg(nr, 0);
    for (const BipEdge& e : edges) {
        ++ldeg[e.l];
        ++rdeg[e.r];
    }
    for (int d : ldeg) require_arg(d <= delta, "konig_equal_split: left degree exceeds Delta");
    for (int d : rdeg) require_arg(d <= delta, "konig_equal_split: right degree exceeds Delta");
    if (edges.empty()) return {};

    // used_l[u][c] / used_r[v][c]: edge of color c at that vertex, or -1.
    std::vector<std::vector<int>> used_l(nl, std::vector<int>(delta, -1));
    std::vector<std::vector<int>> used_r(nr, std::vector<int>(delta, -1));
    std::vector<int> color(edges.size(), -1);

    auto free_color = [&](const std::vector<int>& used) {
        for (int c = 0; c < delta; ++c)
            if (used[c] < 0) return c;
        return -1;
    };

    for (int e = 0; e < int(edges.size()); ++e) {
        int u = edges[e].l, v = edges[e].r;
        int a = free_color(used_l[u]);
        int b = free_color(used_r[v]);
        ensure(a >= 0 && b >= 0, "konig_equal_split: no free color despite degree bound");
        if (a != b) {
            // Swap colors a and b along the maximal (a,b)-alternating path
            // from v. The path cannot reach u: left vertices on it are entered
            // via color-a edges and u has none.
            std::vector<int> chain;
            int w = v;
            bool right = true;
            int want = a;
            while (true) {
                int f = right ? used_r[w][want] : used_l[w][want];
                if (f < 0) break;
                chain.push_back(f);
                w = right ? edges[f].l : edges[f].r;
                right = !right;
                want = (want == a) ? b : a;
            }
            for (int f : chain) {
                used_l[edges[f].l][color[f]] = -1;
                used_r[edges[f].r][color[f]] = -1;
                color[f] = (color[f] == a) ? b : a;
            }
            for (int f : chain) {
                used_l[edges[f].l][color[f]] = f;
                used_r[edges[f].r][color[f]] = f;
            }
            ensure(used_r[v][a] < 0, "konig_equal_split: recoloring failed to free the color");
        }
        color[e] = a;
        used_l[u][a] = e;
        used_r[v][a] = e;
    }

    // Equalize class sizes.
    std::vector<int> size(delta, 0);
    for (int c : color) ++size[c];
    while (true) {
        int cmax = int(std::max_element(size.begin(), size.end()) - size.begin());
        int cmin = int(std::min_element(size.begin(), size.end()) - size.begin());
        if (size[cmax] - size[cmin] <= 1) break;
        // Components of the (cmax, cmin)-union are alternating paths/cycles;
        // some path has one more cmax edge than cmin edges. Swap it.
        std::vector<int> nxt_l(nl, -1), nxt_r(nr, -1), alt_l(nl, -1), alt_r(nr, -1);
        for (int e = 0; e < int(edges.size()); ++e) {
            if (color[e] == cmax) {
                nxt_l[edges[e].l] = e;
                nxt_r[edges[e].r] = e;
            } else if (color[e] == cmin) {
                alt_l[edges[e].l] = e;
                alt_r[edges[e].r] = e;
            }
        }
        // Path endpoints on the left side: vertex with a cmax edge but no cmin
        // edge starts a path whose first edge is cmax.
        bool swapped = false;
        auto try_swap_from = [&](int start, bool left_side) {
            // Walk the alternating component, flipping colors; count first.
            int plus = 0, minus = 0;
            bool side = left_side, want_max = true;
            int w = start;
            std::vector<int> chain;
            while (true) {
                int e = side ? (want_max ? nxt_l[w] : alt_l[w]) : (want_max ? nxt_r[w] : alt_r[w]);
                if (e < 0) break;
                chain.push_back(e);
                want_max ? ++plus : ++minus;
                w = side ? edges[e].r : edges[e].l;
                side = !side;
                want_max = !want_max;
            }
            if (plus != minus + 1) return false;
            for (int e : chain) color[e] = (color[e] == cmax) ? cmin : cmax;
            size[cmax] -= 1;
            size[cmin] += 1;
            return true;
        };
        for (int u = 0; u < nl && !swapped; ++u)
            if (nxt_l[u] >= 0 && alt_l[u] < 0) swapped = try_swap_from(u, true);
        for (int v = 0; v < nr && !swapped; ++v)
            if (nxt_r[v] >= 0 && alt_r[v] < 0) swapped = try_swap_from(v, false);
        ensure(swapped, "konig_equal_split: equalization found no augmenting path");
    }
    return color;
}

// Delta edge-disjoint matchings partitioning the edge multiset, pairwise
// sizes differing by at most 1.
inline std::vector<std::vector<BipEdge>> konig_equal_split(const std::vector<BipEdge>& edges, int nl,
                                                           int nr, int delta) {
    if (edges.empty()) return std::vector<std::vector<BipEdge>>(std::max(delta, 0));
    std::vector<int> color = konig_equal_split_colors(edges, nl, nr, delta);
    std::vector<std::vector<BipEdge>> out(delta);
    for (int e = 0; e < int(edges.size()); ++e) out[color[e]].push_back(edges[e]);
    return out;
}

// Matching of size at least e(G)/Delta(G): the largest Koenig color class.
inline std::vector<BipEdge> konig_large(const std::vector<BipEdge>& edges, int nl, int nr) {
    if (edges.empty()) return {};
    std::vector<int> ldeg(nl, 0), rdeg(nr, 0);
    int delta = 0;
    for (const BipEdge& e : edges) {
        delta = std::max({delta, ++ldeg[e.l], ++rdeg[e.r]});
    }
    auto classes = konig_equal_split(edges, nl, nr, delta);
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes.size(); ++c)
        if (classes[c].size() > classes[best].size()) best = c;
    long need = (long(edges.size()) + delta - 1) / delta;
    ensure(long(classes[best].size()) >= need, "konig_large: class below e/Delta");
    return classes[best];
}

// Greedy proper list edge-coloring; valid whenever every list has size at
// least d(u) + d(v) + 1. Colors are whatever integers the lists carry.
inline std::map<Arc, int> greedy_list_color(const ArcList& arcs,
                                            const std::map<Arc, std::vector<int>>& lists) {
    std::map<Vertex, int> deg;
    for (const Arc& a : arcs) {
        ++deg[a.from];
        ++deg[a.to];
    }
    ArcList order = arcs;
    std::sort(order.begin(), order.end());
    for (const Arc& a : order) {
        auto it = lists.find(a);
        require_arg(it != lists.end(), "greedy_list_color: missing list");
        require_arg(int(it->second.size()) >= deg[a.from] + deg[a.to] + 1,
                    "greedy_list_color: list smaller than d(u)+d(v)+1");
    }
    std::map<Arc, int> coloring;
    for (const Arc& a : order) {
        std::set<int> banned;
        for (const auto& [e, c] : coloring)
            if (e.from == a.from || e.from == a.to || e.to == a.from || e.to == a.to)
                banned.insert(c);
        std::vector<int> list = lists.at(a);
        std::sort(list.begin(), list.end());
        int chosen = -1;
        for (int c : list)
            if (!banned.count(c)) {
                chosen = c;
                break;
            }
        ensure(chosen != -1, "greedy_list_color: no free color despite list size");
        coloring[a] = chosen;
    }
    return coloring;
}

// Directed perfect matching from B to A, stored as the partner bijection.
// Contraction identifies each b with its partner a; expansion is the inverse
// minus the matching's own underlying edges.
struct ContractionMap {
    std::vector<Vertex> A, B;            // sorted
    std::map<Vertex, Vertex> a_of_b;     // b -> a along the matching arc b->a
    std::map<Vertex, Vertex> b_of_a;

    static ContractionMap from_arcs(const ArcList& matching, const std::vector<Vertex>& a_side,
                                    const std::vector<Vertex>& b_side) {
        ContractionMap m;
        m.A = a_side;
        m.B = b_side;
        std::sort(m.A.begin(), m.A.end());
        std::sort(m.B.begin(), m.B.end());
        require_arg(m.A.size() == m.B.size(), "contraction map: |A| != |B|");
        for (const Arc& a : matching) {
            require_arg(std::binary_search(m.B.begin(), m.B.end(), a.from) &&
                            std::binary_search(m.A.begin(), m.A.end(), a.to),
                        "contraction map: arc not directed from B to A");
            require_arg(!m.a_of_b.count(a.from) && !m.b_of_a.count(a.to),
                        "contraction map: arcs share an endpoint");
            m.a_of_b[a.from] = a.to;
            m.b_of_a[a.to] = a.from;
        }
        require_arg(m.a_of_b.size() == m.B.size(), "contraction map: matching is not perfect");
        return m;
    }

    ArcList arcs() const {
        ArcList out;
        for (const auto& [b, a] : a_of_b) out.push_back({b, a});
        std::sort(out.begin(), out.end());
        return out;
    }
};

// Undirected bipartite edge between a in A and b in B, in global ids.
struct ABEdge {
    Vertex a = -1, b = -1;
    friend auto operator<=>(const ABEdge&, const ABEdge&) = default;
};

// M-contraction of G: a'a is an arc iff a'b is an edge of G where b is a's
// matching partner and a' != a. Edges lying along M are lost, so the result
// is loop-free.
struct ContractedDigraph {
    Digraph local;                 // on |A| nodes
    std::vector<Vertex> a_ids;     // local index -> global id, sorted
    std::map<Vertex, int> index;   // global id -> local index

    Vertex global(int i) const { return a_ids[i]; }
};

inline ContractedDigraph contract(const std::vector<ABEdge>& g, const ContractionMap& m) {
    ContractedDigraph cd;
    cd.a_ids = m.A;
    cd.local = Digraph(int(cd.a_ids.size()));
    for (int i = 0; i < int(cd.a_ids.size()); ++i) cd.index[cd.a_ids[i]] = i;
    for (const ABEdge& e : g) {
        require_arg(cd.index.count(e.a) && m.a_of_b.count(e.b), "contract: edge off the declared classes");
        Vertex a = m.a_of_b.at(e.b);
        if (e.a != a) {
            int from = cd.index.at(e.a), to = cd.index.at(a);
            if (!cd.local.has_arc(from, to)) cd.local.add_arc(from, to);
        }
    }
    return cd;
}

// M-expansion of a digraph on A: for b with partner a, a'b is an edge iff
// a'a is an arc. |E| equals e(D).
inline std::vector<ABEdge> expand(const ContractedDigraph& d, const ContractionMap& m) {
    std::vector<ABEdge> out;
    for (const Arc& arc : d.local.arcs()) {
        Vertex a_from = d.a_ids[arc.from], a_to = d.a_ids[arc.to];
        out.push_back({a_from, m.b_of_a.at(a_to)});
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline bool is_hamilton_cycle_on(const ArcList& arcs, const std::vector<Vertex>& vertex_set) {
    if (arcs.size() != vertex_set.size() || arcs.empty()) return false;
    std::map<Vertex, Vertex> next;
    std::set<Vertex> seen_to;
    std::set<Vertex> vs(vertex_set.begin(), vertex_set.end());
    for (const Arc& a : arcs) {
        if (!vs.count(a.from) || !vs.count(a.to)) return false;
        if (next.count(a.from) || !seen_to.insert(a.to).second) return false;
        next[a.from] = a.to;
    }
    Vertex start = *vs.begin();
    Vertex w = start;
    std::size_t steps = 0;
    do {
        auto it = next.find(w);
        if (it == next.end()) return false;
        w = it->second;
        ++steps;
    } while (w != start && steps <= vs.size());
    return w == start && steps == vs.size();
}

// Close a Hamilton cycle on A into one on A u B: orient the M-expansion of
// the cycle from A to B and add the matching arcs.
inline ArcList close_hamilton(const std::vector<Vertex>& cycle_on_a, const ContractionMap& m) {
    require_arg(cycle_on_a.size() == m.A.size(), "close_hamilton: cycle does not span A");
    {
        std::set<Vertex> seen(cycle_on_a.begin(), cycle_on_a.end());
        require_arg(seen.size() == cycle_on_a.size() &&
                        std::all_of(cycle_on_a.begin(), cycle_on_a.end(),
                                    [&](Vertex v) { return m.b_of_a.count(v) > 0; }),
                    "close_hamilton: sequence is not a Hamilton cycle on A");
    }
    ArcList out;
    for (std::size_t i = 0; i < cycle_on_a.size(); ++i) {
        Vertex from = cycle_on_a[i];
        Vertex to = cycle_on_a[(i + 1) % cycle_on_a.size()];
        out.push_back({from, m.b_of_a.at(to)});  // A -> B leg of the expansion
    }
    for (const auto& [b, a] : m.a_of_b) out.push_back({b, a});
    std::vector<Vertex> all = m.A;
    all.insert(all.end(), m.B.begin(), m.B.end());
    ensure(is_hamilton_cycle_on(out, all), "close_hamilton: closure is not a Hamilton cycle on A u B");
    std::sort(out.begin(), out.end());
    return out;
}

// Contraction of a bipartite linear forest whose (B,A)-arcs form a perfect
// matching. Endpoint sets follow the isolated-vertex convention: a vertex
// with no arc is both a start and an end.
struct ForestContraction {
    LinearForest forest_on_a;
    std::vector<Vertex> starts, ends, internals;  // w.r.t. vertex set A
};

inline ForestContraction contract_linear_forest(const LinearForest& f,
                                                const std::vector<Vertex>& a_side,
                                                const std::vector<Vertex>& b_side) {
    std::set<Vertex> a_set(a_side.begin(), a_side.end()), b_set(b_side.begin(), b_side.end());
    ArcList m_arcs;
    std::vector<ABEdge> ab_edges;
    for (const Arc& arc : f.arcs()) {
        bool ba = b_set.count(arc.from) && a_set.count(arc.to);
        bool ab = a_set.count(arc.from) && b_set.count(arc.to);
        require_arg(ba || ab, "contract_linear_forest: arc off the bipartition");
        if (ba)
            m_arcs.push_back(arc);
        else
            ab_edges.push_back({arc.from, arc.to});
    }
    ContractionMap m = ContractionMap::from_arcs(m_arcs, a_side, b_side);  // rejects non-perfect F[B,A]
    ContractedDigraph d = contract(ab_edges, m);

    ForestContraction out;
    out.forest_on_a = LinearForest([&] {
        ArcList arcs;
        for (const Arc& a : d.local.arcs()) arcs.push_back({d.a_ids[a.from], d.a_ids[a.to]});
        return arcs;
    }());
    ensure(out.forest_on_a.valid(), "contract_linear_forest: contraction is not a linear forest");

    for (Vertex v : m.A) {
        int li = d.index.at(v);
        bool has_in = d.local.in_deg(li) > 0, has_out = d.local.out_deg(li) > 0;
        if (!has_in) out.starts.push_back(v);
        if (!has_out) out.ends.push_back(v);
        if (has_in && has_out) out.internals.push_back(v);
    }

    // The three endpoint identities of the contraction.
    auto f_in = [&](Vertex v) { return f.in_deg(v); };
    auto f_out = [&](Vertex v) { return f.out_deg(v); };
    std::vector<Vertex> nm_vplus, vminus, expect_internal;
    for (Vertex b : m.B)
        if (f_in(b) == 0) nm_vplus.push_back(m.a_of_b.at(b));
    for (Vertex a : a_side)
        if (f_out(a) == 0) vminus.push_back(a);
    {
        std::set<Vertex> nmv(nm_vplus.begin(), nm_vplus.end());
        for (Vertex a : a_side)
            if (f_in(a) > 0 && f_out(a) > 0 && !nmv.count(a)) expect_internal.push_back(a);
    }
    std::sort(nm_vplus.begin(), nm_vplus.end());
    std::sort(vminus.begin(), vminus.end());
    std::sort(expect_internal.begin(), expect_internal.end());
    ensure(out.starts == nm_vplus, "contract_linear_forest: V+ identity fails");
    ensure(out.ends == vminus, "contract_linear_forest: V- identity fails");
    ensure(out.internals == expect_internal, "contract_linear_forest: V0 identity fails");
    return out;
}

}  // namespace bitour

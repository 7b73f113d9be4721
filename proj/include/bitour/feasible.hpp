#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bitour/digraph.hpp"
#include "bitour/linear_forest.hpp"
#include "bitour/matchwork.hpp"
#include "bitour/partition.hpp"

namespace bitour {

// An edge-disjoint collection of arcs forming one (pseudo-)feasible system.
// Canonical form: sorted, duplicate-free.
using System = ArcList;

inline System canonical(System s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

// The frame against which feasible / pseudo-feasible / placeholder predicates
// are evaluated: tournament, quad partition, exceptional set, threshold gamma.
struct FeasibilityContext {
    const Digraph* t = nullptr;
    QuadPartition u;
    ExceptionalSet ustar;
    double gamma = 0.25;

    FeasibilityContext() = default;
    FeasibilityContext(const Digraph& tt, QuadPartition uu, ExceptionalSet es, double g)
        : t(&tt), u(std::move(uu)), ustar(std::move(es)), gamma(g) {
        require_arg(gamma > 0 && gamma <= 0.5, "feasibility context: gamma must lie in (0, 1/2]");
        for (int i = 0; i < 4; ++i) {
            require_arg(ustar.per_class[i].size() == ustar.per_class[0].size(),
                        "feasibility context: exceptional slices must have equal size");
            for (Vertex v : ustar.per_class[i])
                require_arg(u.index_of(v) == i, "feasibility context: exceptional slice off its class");
        }
    }

    int n() const { return u.class_size(); }
    bool in_ustar(Vertex v) const { return ustar.contains(v); }
};

// An edge with exactly one endpoint in U* for which the tournament carries
// many same-type edges, making it swappable.
inline bool is_placeholder(const Arc& e, const FeasibilityContext& ctx) {
    const Digraph& t = *ctx.t;
    bool from_star = ctx.in_ustar(e.from), to_star = ctx.in_ustar(e.to);
    double bound = ctx.gamma * ctx.n();
    if (from_star && !to_star)
        return gt_threshold(t.out_nbrs(e.from).count_and(ctx.u.mask(ctx.u.index_of(e.to))), bound);
    if (!from_star && to_star)
        return gt_threshold(t.in_nbrs(e.to).count_and(ctx.u.mask(ctx.u.index_of(e.from))), bound);
    return false;
}

struct FeasibilityCheck {
    bool ok = true;
    std::string violation;
};

namespace detail {

inline std::array<long, 4> backward_pair_counts(const System& f, const QuadPartition& u) {
    std::array<long, 4> c{0, 0, 0, 0};
    for (const Arc& a : f)
        if (u.is_backward(a)) ++c[u.index_of(a.to)];  // arc U_{i+1} -> U_i keyed by i
    return c;
}

// (F1): e(U1,U4) = e(U3,U2) and e(U4,U3) = e(U2,U1).
inline bool backward_balance(const System& f, const QuadPartition& u, std::string& why) {
    auto c = backward_pair_counts(f, u);
    if (c[3] != c[1]) {
        why = "backward balance fails: e(U1,U4)=" + std::to_string(c[3]) +
              " but e(U3,U2)=" + std::to_string(c[1]);
        return false;
    }
    if (c[2] != c[0]) {
        why = "backward balance fails: e(U4,U3)=" + std::to_string(c[2]) +
              " but e(U2,U1)=" + std::to_string(c[0]);
        return false;
    }
    return true;
}

}  // namespace detail

// def of a feasible system: (F1) balanced backward pair counts, (F2) every
// exceptional vertex covered by exactly one in- and one out-arc, (F3) a
// linear forest. Subset of E(T) is also verified.
inline FeasibilityCheck check_feasible(const System& f, const FeasibilityContext& ctx) {
    FeasibilityCheck r;
    for (const Arc& a : f)
        if (!ctx.t->has_arc(a.from, a.to)) {
            r.ok = false;
            r.violation = "arc (" + std::to_string(a.from) + "," + std::to_string(a.to) + ") not in T";
            return r;
        }
    std::string why;
    if (!detail::backward_balance(f, ctx.u, why)) {
        r.ok = false;
        r.violation = "(F1) " + why;
        return r;
    }
    std::map<Vertex, int> outd, ind;
    for (const Arc& a : f) {
        ++outd[a.from];
        ++ind[a.to];
    }
    for (Vertex v : ctx.ustar.all()) {
        if (outd[v] != 1 || ind[v] != 1) {
            r.ok = false;
            r.violation = "(F2) exceptional vertex " + std::to_string(v) + " has degrees (" +
                          std::to_string(outd[v]) + "," + std::to_string(ind[v]) + ")";
            return r;
        }
    }
    if (!LinearForest(f).valid()) {
        r.ok = false;
        r.violation = "(F3) not a linear forest";
        return r;
    }
    return r;
}

inline bool is_feasible(const System& f, const FeasibilityContext& ctx) {
    return check_feasible(f, ctx).ok;
}

// Pseudo-feasible system: (F1) plus
//   (F2') U* degrees at most 1, exactly 1 on U^{1-gamma}(T),
//   (F3') at most one non-placeholder out-arc and in-arc per non-U* vertex,
//   (F4') every cycle contains a placeholder.
// (F4') is checked as acyclicity of F minus its placeholders, which is
// equivalent; the diagnostic names a witness cycle when it fails.
inline FeasibilityCheck check_pseudo_feasible(const System& f, const FeasibilityContext& ctx) {
    FeasibilityCheck r;
    for (const Arc& a : f)
        if (!ctx.t->has_arc(a.from, a.to)) {
            r.ok = false;
            r.violation = "arc (" + std::to_string(a.from) + "," + std::to_string(a.to) + ") not in T";
            return r;
        }
    std::string why;
    if (!detail::backward_balance(f, ctx.u, why)) {
        r.ok = false;
        r.violation = "(F1) " + why;
        return r;
    }
    std::map<Vertex, int> outd, ind, out_np, in_np;
    for (const Arc& a : f) {
        ++outd[a.from];
        ++ind[a.to];
        if (!is_placeholder(a, ctx)) {
            ++out_np[a.from];
            ++in_np[a.to];
        }
    }
    ThresholdSets hi = gamma_sets(*ctx.t, ctx.u, 1 - ctx.gamma);
    for (Vertex v : ctx.ustar.all()) {
        if (outd[v] > 1 || ind[v] > 1) {
            r.ok = false;
            r.violation = "(F2') exceptional vertex " + std::to_string(v) + " has degree above 1";
            return r;
        }
        if (hi.contains(v) && (outd[v] != 1 || ind[v] != 1)) {
            r.ok = false;
            r.violation = "(F2') high-backward vertex " + std::to_string(v) + " not fully covered";
            return r;
        }
    }
    for (Vertex v = 0; v < ctx.t->order(); ++v) {
        if (ctx.in_ustar(v)) continue;
        if (out_np[v] > 1 || in_np[v] > 1) {
            r.ok = false;
            r.violation = "(F3') vertex " + std::to_string(v) + " has two non-placeholder arcs on one side";
            return r;
        }
    }
    // F minus placeholders must be acyclic.
    std::map<Vertex, std::vector<Vertex>> succ;
    for (const Arc& a : f)
        if (!is_placeholder(a, ctx)) succ[a.from].push_back(a.to);
    std::map<Vertex, int> state;  // 0 unseen, 1 on stack, 2 done
    std::vector<Vertex> stack;
    auto dfs = [&](auto&& self, Vertex v) -> bool {
        state[v] = 1;
        stack.push_back(v);
        for (Vertex w : succ[v]) {
            if (state[w] == 1) {
                std::string cyc;
                for (auto it = std::find(stack.begin(), stack.end(), w); it != stack.end(); ++it)
                    cyc += std::to_string(*it) + " ";
                r.ok = false;
                r.violation = "(F4') placeholder-free cycle: " + cyc;
                return false;
            }
            if (state[w] == 0 && !self(self, w)) return false;
        }
        stack.pop_back();
        state[v] = 2;
        return true;
    };
    for (const auto& [v, _] : succ)
        if (state[v] == 0 && !dfs(dfs, v)) return r;
    return r;
}

inline bool is_pseudo_feasible(const System& f, const FeasibilityContext& ctx) {
    return check_pseudo_feasible(f, ctx).ok;
}

// The unique integer l with |U_i n V(C)| = l + e_C(U_{i+1},U_i) + e_C(U_i,U_{i-1})
// for every i, for a bipartite cycle C on sides U1 u U3 and U2 u U4.
inline int cycle_ell(const ArcList& cycle, const QuadPartition& u) {
    std::set<Vertex> verts;
    for (const Arc& a : cycle) {
        verts.insert(a.from);
        verts.insert(a.to);
        require_arg(u.side_of(a.from) != u.side_of(a.to), "cycle_ell: arc inside one bipartition side");
    }
    require_arg(is_hamilton_cycle_on(cycle, {verts.begin(), verts.end()}), "cycle_ell: arcs are not a single cycle");
    std::array<long, 4> in_class{0, 0, 0, 0}, down{0, 0, 0, 0};
    for (Vertex v : verts) ++in_class[u.index_of(v)];
    for (const Arc& a : cycle)
        if (u.is_backward(a)) ++down[u.index_of(a.to)];
    // e_C(U_i, U_{i-1}) keyed 0-based by to-class: down[k] = e_C(U_{k+1}, U_k).
    long ell = in_class[0] - down[0] - down[3];
    for (int i = 0; i < 4; ++i)
        ensure(in_class[i] == ell + down[i] + down[(i + 3) % 4],
               "cycle_ell: class-count identities are inconsistent");
    return int(ell);
}

// Counts of non-trivial components starting / ending in each class.
struct ComponentEndpoints {
    std::array<int, 4> starts{0, 0, 0, 0};
    std::array<int, 4> ends{0, 0, 0, 0};
};

inline ComponentEndpoints component_endpoints(const System& f, const QuadPartition& u) {
    LinearForest lf(f);
    require_arg(lf.valid(), "component_endpoints: not a linear forest");
    ComponentEndpoints ce;
    for (const auto& p : lf.paths()) {
        ++ce.starts[u.index_of(p.front())];
        ++ce.ends[u.index_of(p.back())];
    }
    return ce;
}

// A feasible system whose internal vertices are exactly U* is a U-balanced
// special cover: the number of non-trivial components starting in U_i equals
// the number ending in U_{i+1}. Verified by independent recount.
inline bool balanced_special_cover_check(const System& f, const FeasibilityContext& ctx) {
    require_arg(is_feasible(f, ctx), "balanced_special_cover_check: system is not feasible");
    {
        LinearForest lf(f);
        std::vector<Vertex> internal = lf.internals();
        std::vector<Vertex> star = ctx.ustar.all();
        require_arg(internal == star, "balanced_special_cover_check: V0(F) != U*");
    }
    ComponentEndpoints ce = component_endpoints(f, ctx.u);
    for (int i = 0; i < 4; ++i)
        ensure(ce.starts[i] == ce.ends[(i + 1) % 4],
               "balanced_special_cover_check: n" + std::to_string(i + 1) + "^+ != n" +
                   std::to_string(i + 2) + "^-");
    return true;
}

}  // namespace bitour

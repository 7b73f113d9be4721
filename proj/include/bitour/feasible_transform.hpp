#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bitour/feasible_pipeline.hpp"

namespace bitour {

namespace detail {

inline System union_of(const std::vector<System>& systems) {
    System all;
    for (const System& s : systems) all.insert(all.end(), s.begin(), s.end());
    return canonical(all);
}

inline std::set<Arc> arc_set_of(const std::vector<System>& systems) {
    std::set<Arc> s;
    for (const System& f : systems) s.insert(f.begin(), f.end());
    return s;
}

inline std::array<long, 4> pair_counts_by_from(const System& f, const QuadPartition& u) {
    std::array<long, 4> c{0, 0, 0, 0};
    for (const Arc& a : f)
        if (u.is_backward(a)) ++c[u.index_of(a.from)];
    return c;
}

}  // namespace detail

// Stage 1 of the transformation: pull every placeholder out and hand each
// back to a system that needs an arc of that type at the same exceptional
// vertex, breaking all cycles and excess degrees. Preserves per-system sizes
// and per-pair backward counts.
inline std::vector<System> redistribute_placeholders(const std::vector<System>& systems,
                                                     const FeasibilityContext& ctx) {
    for (const System& f : systems)
        for (const Arc& a : f)
            if (ctx.u.is_forward(a))
                require_arg(!is_placeholder(a, ctx) &&
                                (ctx.in_ustar(a.from) || ctx.in_ustar(a.to)),
                            "redistribute_placeholders: forward arc violates the cleanup precondition");

    std::size_t r = systems.size();
    std::vector<ArcList> removed(r);
    std::vector<System> stripped(r);
    ArcList pool;
    for (std::size_t i = 0; i < r; ++i) {
        for (const Arc& a : systems[i]) {
            if (is_placeholder(a, ctx)) {
                removed[i].push_back(a);
                pool.push_back(a);
            } else {
                stripped[i].push_back(a);
            }
        }
    }
    std::vector<System> out(r);
    if (pool.empty()) {
        for (std::size_t i = 0; i < r; ++i) {
            out[i] = canonical(systems[i]);
            ensure(LinearForest(out[i]).valid(),
                   "redistribute_placeholders: placeholder-free system is not a linear forest");
        }
        return out;
    }

    Digraph host = digraph_from_arcs(ctx.t->order(), pool);
    std::vector<Vertex> a_side = ctx.ustar.all(), b_side;
    for (Vertex v = 0; v < ctx.t->order(); ++v)
        if (!ctx.in_ustar(v)) b_side.push_back(v);

    ExtendRequest req;
    req.host = &host;
    req.A = a_side;
    req.B = b_side;
    req.cap = std::max(1, 2 * int(a_side.size()));
    req.s_plus.resize(r);
    req.s_minus.resize(r);
    req.avoid.resize(r);
    std::vector<LinearForest> stubs;
    for (std::size_t i = 0; i < r; ++i) {
        std::set<Vertex> sp, sm, tv;
        for (const Arc& a : removed[i]) {
            if (ctx.in_ustar(a.from))
                sp.insert(a.from);
            else
                sm.insert(a.to);
        }
        for (const Arc& a : stripped[i]) {
            if (!ctx.in_ustar(a.from)) tv.insert(a.from);
            if (!ctx.in_ustar(a.to)) tv.insert(a.to);
        }
        req.s_plus[i] = {sp.begin(), sp.end()};
        req.s_minus[i] = {sm.begin(), sm.end()};
        req.avoid[i] = {tv.begin(), tv.end()};
        stubs.push_back(LinearForest(stripped[i]));
    }
    std::vector<LinearForest> ext = extend_linear_forests(req, stubs);
    for (std::size_t i = 0; i < r; ++i) {
        ArcList arcs = stripped[i];
        arcs.insert(arcs.end(), ext[i].arcs().begin(), ext[i].arcs().end());
        out[i] = canonical(arcs);
        ensure(out[i].size() == systems[i].size(), "redistribute_placeholders: size changed");
        ensure(detail::pair_counts_by_from(out[i], ctx.u) == detail::pair_counts_by_from(systems[i], ctx.u),
               "redistribute_placeholders: per-pair backward counts changed");
        ensure(LinearForest(out[i]).valid(), "redistribute_placeholders: output is not a linear forest");
        FeasibilityCheck c = check_pseudo_feasible(out[i], ctx);
        ensure(c.ok, "redistribute_placeholders: output not pseudo-feasible: " + c.violation);
    }
    ensure(detail::union_of(out) == detail::union_of(systems),
           "redistribute_placeholders: arc union changed");
    return out;
}

// Stage 2: cover the still-uncovered exceptional vertices with forward
// placeholders, turning pseudo-feasible linear forests into feasible systems.
inline std::vector<System> cover_exceptional_vertices(const std::vector<System>& systems,
                                                      const FeasibilityContext& ctx,
                                                      const Digraph& host_d) {
    std::size_t r = systems.size();
    std::vector<System> out(r);
    if (ctx.ustar.all().empty()) {
        for (std::size_t i = 0; i < r; ++i) {
            out[i] = canonical(systems[i]);
            FeasibilityCheck c = check_feasible(out[i], ctx);
            ensure(c.ok, "cover_exceptional_vertices: system not feasible with empty U*: " + c.violation);
        }
        return out;
    }
    ThresholdSets hi = gamma_sets(*ctx.t, ctx.u, 1 - ctx.gamma);
    bitset hi_mask(ctx.t->order());
    for (Vertex v : hi.all()) hi_mask.set(v);

    std::set<Arc> in_use = detail::arc_set_of(systems);
    ArcList pool;
    for (const Arc& a : host_d.arcs()) {
        if (!ctx.u.is_forward(a)) continue;
        if (hi_mask.test(a.from) || hi_mask.test(a.to)) continue;
        if (ctx.in_ustar(a.from) == ctx.in_ustar(a.to)) continue;
        if (in_use.count(a)) continue;
        if (is_placeholder(a, ctx)) pool.push_back(a);
    }
    Digraph host = digraph_from_arcs(ctx.t->order(), pool);
    std::vector<Vertex> a_side = ctx.ustar.all(), b_side;
    for (Vertex v = 0; v < ctx.t->order(); ++v)
        if (!ctx.in_ustar(v)) b_side.push_back(v);

    ExtendRequest req;
    req.host = &host;
    req.A = a_side;
    req.B = b_side;
    req.cap = 2 * int(a_side.size());
    req.s_plus.resize(r);
    req.s_minus.resize(r);
    req.avoid.resize(r);
    std::vector<LinearForest> stubs;
    for (std::size_t i = 0; i < r; ++i) {
        std::map<Vertex, int> outd, ind;
        std::set<Vertex> tv;
        for (const Arc& a : systems[i]) {
            ++outd[a.from];
            ++ind[a.to];
            if (!ctx.in_ustar(a.from)) tv.insert(a.from);
            if (!ctx.in_ustar(a.to)) tv.insert(a.to);
        }
        for (Vertex v : a_side) {
            if (outd[v] == 0) req.s_plus[i].push_back(v);
            if (ind[v] == 0) req.s_minus[i].push_back(v);
        }
        req.avoid[i] = {tv.begin(), tv.end()};
        stubs.push_back(LinearForest(systems[i]));
    }
    std::vector<LinearForest> ext = extend_linear_forests(req, stubs);
    for (std::size_t i = 0; i < r; ++i) {
        ArcList arcs = systems[i];
        arcs.insert(arcs.end(), ext[i].arcs().begin(), ext[i].arcs().end());
        out[i] = canonical(arcs);
        FeasibilityCheck c = check_feasible(out[i], ctx);
        ensure(c.ok, "cover_exceptional_vertices: output not feasible: " + c.violation);
        ensure(out[i].size() <= systems[i].size() + 2 * ctx.ustar.all().size(),
               "cover_exceptional_vertices: size grew past e + 2|U*|");
    }
    return out;
}

// Stage 3: distribute a prescribed matching-like set of forward edges across
// the systems, one blow-up pair per group of systems, five slots per system.
inline std::vector<System> incorporate_forward_edges(const std::vector<System>& systems,
                                                     const FeasibilityContext& ctx,
                                                     const ArcList& prescribed) {
    std::size_t r = systems.size();
    std::set<Arc> in_use = detail::arc_set_of(systems);
    std::array<ArcList, 4> groups;
    for (const Arc& a : prescribed) {
        require_arg(ctx.u.is_forward(a) && !ctx.in_ustar(a.from) && !ctx.in_ustar(a.to),
                    "incorporate_forward_edges: prescribed arc must be forward and off U*");
        if (!in_use.count(a)) groups[ctx.u.index_of(a.from)].push_back(a);
    }
    std::vector<System> out = systems;
    bool any = false;
    for (const auto& g : groups) any |= !g.empty();
    if (!any) {
        for (System& s : out) s = canonical(s);
        return out;
    }

    std::vector<std::set<Vertex>> touched(r);
    for (std::size_t i = 0; i < r; ++i)
        for (const Arc& a : systems[i]) {
            touched[i].insert(a.from);
            touched[i].insert(a.to);
        }
    for (int c = 0; c < 4; ++c) {
        if (groups[c].empty()) continue;
        std::sort(groups[c].begin(), groups[c].end());
        std::vector<int> members;
        for (std::size_t j = 0; j < r; ++j)
            if (int(j % 4) == c) members.push_back(int(j));
        require_hypothesis(!members.empty(), "incorporate_forward_edges: no systems in group " +
                                                 std::to_string(c + 1));
        BipGraph g(int(groups[c].size()), int(members.size()) * 5);
        for (std::size_t e = 0; e < groups[c].size(); ++e)
            for (std::size_t m = 0; m < members.size(); ++m) {
                int j = members[m];
                if (!touched[j].count(groups[c][e].from) && !touched[j].count(groups[c][e].to))
                    for (int copy = 0; copy < 5; ++copy) g.add_edge(int(e), int(m * 5 + copy));
            }
        g.finish();
        std::vector<int> match;
        try {
            match = hall_cover(g);
        } catch (const invalid_argument& err) {
            throw hypothesis_unmet(std::string("incorporate_forward_edges: Hall step infeasible (") +
                                   err.what() + ")");
        }
        for (std::size_t e = 0; e < groups[c].size(); ++e) {
            int j = members[match[e] / 5];
            out[j].push_back(groups[c][e]);
            touched[j].insert(groups[c][e].from);
            touched[j].insert(groups[c][e].to);
        }
    }
    for (std::size_t i = 0; i < r; ++i) {
        out[i] = canonical(out[i]);
        ensure(out[i].size() <= systems[i].size() + 5, "incorporate_forward_edges: more than 5 arcs added");
        FeasibilityCheck c = check_feasible(out[i], ctx);
        ensure(c.ok, "incorporate_forward_edges: output not feasible: " + c.violation);
    }
    System expect = detail::union_of(systems);
    for (const Arc& a : prescribed) expect.push_back(a);
    ensure(detail::union_of(out) == canonical(expect), "incorporate_forward_edges: union mismatch");
    return out;
}

// Stages 4 and 5: walk every component's ending point forward into U4, then
// every starting point backward into U1, three pair-steps each way.
inline std::vector<System> extend_component_endpoints(const std::vector<System>& systems,
                                                      const FeasibilityContext& ctx,
                                                      const Digraph& host_d, int cap_n,
                                                      bool fix_endings) {
    std::size_t r = systems.size();
    std::vector<System> cur = systems;
    for (int step = 0; step < 3; ++step) {
        int a_class = fix_endings ? step : 3 - step;
        int b_class = fix_endings ? step + 1 : 2 - step;
        std::vector<Vertex> a_side, b_side;
        for (Vertex v : ctx.u.cls(a_class))
            if (!ctx.in_ustar(v)) a_side.push_back(v);
        for (Vertex v : ctx.u.cls(b_class))
            if (!ctx.in_ustar(v)) b_side.push_back(v);
        std::sort(a_side.begin(), a_side.end());
        std::sort(b_side.begin(), b_side.end());

        std::set<Arc> in_use = detail::arc_set_of(cur);
        ArcList pool;
        int from_class = fix_endings ? a_class : b_class;
        for (const Arc& a : host_d.arcs()) {
            if (!ctx.u.is_forward(a) || ctx.u.index_of(a.from) != from_class) continue;
            if (ctx.in_ustar(a.from) || ctx.in_ustar(a.to)) continue;
            if (in_use.count(a)) continue;
            pool.push_back(a);
        }
        Digraph host = digraph_from_arcs(ctx.t->order(), pool);

        ExtendRequest req;
        req.host = &host;
        req.A = a_side;
        req.B = b_side;
        req.cap = std::max(1, std::min(cap_n, 2 * int(a_side.size())));
        req.s_plus.resize(r);
        req.s_minus.resize(r);
        req.avoid.resize(r);
        std::vector<LinearForest> stubs;
        bool nothing_to_do = true;
        for (std::size_t i = 0; i < r; ++i) {
            LinearForest lf(cur[i]);
            std::set<Vertex> a_set(a_side.begin(), a_side.end());
            for (Vertex v : fix_endings ? lf.ends() : lf.starts())
                if (a_set.count(v)) (fix_endings ? req.s_plus[i] : req.s_minus[i]).push_back(v);
            std::set<Vertex> b_set(b_side.begin(), b_side.end());
            std::set<Vertex> tv;
            for (Vertex v : lf.covered_vertices())
                if (b_set.count(v)) tv.insert(v);
            req.avoid[i] = {tv.begin(), tv.end()};
            nothing_to_do &= req.s_plus[i].empty() && req.s_minus[i].empty();
            stubs.push_back(std::move(lf));
        }
        if (nothing_to_do) continue;
        std::vector<LinearForest> ext = extend_linear_forests(req, stubs);
        for (std::size_t i = 0; i < r; ++i) {
            ArcList arcs = cur[i];
            arcs.insert(arcs.end(), ext[i].arcs().begin(), ext[i].arcs().end());
            cur[i] = canonical(arcs);
        }
    }
    for (std::size_t i = 0; i < r; ++i) {
        FeasibilityCheck c = check_feasible(cur[i], ctx);
        ensure(c.ok, "extend_component_endpoints: output not feasible: " + c.violation);
        LinearForest lf(cur[i]);
        for (Vertex v : fix_endings ? lf.ends() : lf.starts())
            ensure(ctx.u.index_of(v) == (fix_endings ? 3 : 0),
                   std::string("extend_component_endpoints: ") +
                       (fix_endings ? "an ending point missed U4" : "a starting point missed U1"));
    }
    return cur;
}

// The full pseudo-to-feasible transformation. `size_hypothesis` plays the
// paper's eps*n: every input system must fit under it. Stage names decorate
// any desk-scale infeasibility that surfaces inside.
inline std::vector<System> pseudo_to_feasible(const std::vector<System>& systems_in,
                                              const FeasibilityContext& ctx, const Digraph& host,
                                              const ArcList& prescribed, long size_hypothesis) {
    std::size_t r = systems_in.size();
    const Digraph& t = *ctx.t;
    require_arg(host.order() == t.order(), "pseudo_to_feasible: host order mismatch");
    for (Vertex v = 0; v < host.order(); ++v)
        require_hypothesis(host.out_deg(v) >= int(r) && host.in_deg(v) >= int(r),
                           "pseudo_to_feasible: (i) host min semidegree below r");
    std::set<Arc> in_systems;
    for (const System& f : systems_in) {
        for (const Arc& a : f) {
            require_arg(host.has_arc(a.from, a.to), "pseudo_to_feasible: system arc off the host");
            require_arg(in_systems.insert(a).second, "pseudo_to_feasible: systems are not edge-disjoint");
        }
        require_hypothesis(long(f.size()) <= size_hypothesis,
                           "pseudo_to_feasible: (iii) a system exceeds the size hypothesis");
        FeasibilityCheck c = check_pseudo_feasible(f, ctx);
        require_arg(c.ok, "pseudo_to_feasible: input not pseudo-feasible: " + c.violation);
    }
    for (const Arc& a : host.arcs())
        if (ctx.u.is_backward(a) || (ctx.in_ustar(a.from) && ctx.in_ustar(a.to)))
            require_hypothesis(in_systems.count(a),
                               "pseudo_to_feasible: (ii) backward or exceptional host arc uncovered");
    std::map<Vertex, int> eo, ei;
    for (const Arc& a : prescribed) {
        require_hypothesis(host.has_arc(a.from, a.to) && ctx.u.is_forward(a) &&
                               !ctx.in_ustar(a.from) && !ctx.in_ustar(a.to),
                           "pseudo_to_feasible: (iv) prescribed arc must be a forward host arc off U*");
        require_hypothesis(++eo[a.from] <= 1 && ++ei[a.to] <= 1,
                           "pseudo_to_feasible: (iv) prescribed degrees exceed 1");
    }

    // Cleanup: forward arcs that are placeholders or U*-disjoint play no role
    // in a pseudo-feasible system and would block the redistribution stage.
    std::vector<System> work(r);
    for (std::size_t i = 0; i < r; ++i)
        for (const Arc& a : systems_in[i]) {
            if (ctx.u.is_forward(a) &&
                ((!ctx.in_ustar(a.from) && !ctx.in_ustar(a.to)) || is_placeholder(a, ctx)))
                continue;
            work[i].push_back(a);
        }

    int n = ctx.n();
    int cap_n = std::max(1, int(std::ceil(std::sqrt(double(size_hypothesis) * double(n)))));
    auto staged = [&](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const invalid_argument& e) {
            throw hypothesis_unmet(std::string("pseudo_to_feasible stage '") + name + "': " + e.what());
        }
    };
    work = staged("redistribute", [&] { return redistribute_placeholders(work, ctx); });
    work = staged("cover-exceptional", [&] { return cover_exceptional_vertices(work, ctx, host); });
    work = staged("incorporate", [&] { return incorporate_forward_edges(work, ctx, prescribed); });
    work = staged("extend-endings", [&] { return extend_component_endpoints(work, ctx, host, cap_n, true); });
    work = staged("extend-starts", [&] { return extend_component_endpoints(work, ctx, host, cap_n, false); });

    // Conclusions of the transformation.
    std::set<Arc> covered = detail::arc_set_of(work);
    for (const Arc& a : host.arcs())
        if (ctx.u.is_backward(a)) ensure(covered.count(a), "pseudo_to_feasible: (a) backward arc dropped");
    for (const Arc& a : prescribed)
        ensure(covered.count(a), "pseudo_to_feasible: (a) prescribed arc dropped");
    for (const Arc& a : covered)
        ensure(host.has_arc(a.from, a.to), "pseudo_to_feasible: (a) output leaves the host");
    long star2 = 2 * long(ctx.ustar.all().size());
    for (std::size_t i = 0; i < r; ++i) {
        ensure(long(work[i].size()) <= 7 * (long(systems_in[i].size()) + star2 + 5),
               "pseudo_to_feasible: (b) size bound fails");
        FeasibilityCheck c = check_feasible(work[i], ctx);
        ensure(c.ok, "pseudo_to_feasible: output not feasible: " + c.violation);
    }
    {
        std::set<Arc> seen;
        for (const System& f : work)
            for (const Arc& a : f)
                ensure(seen.insert(a).second, "pseudo_to_feasible: outputs are not edge-disjoint");
    }
    return work;
}

// lm:main at s = 0 = t: decompose all backward and exceptional edges of a
// regular bipartite tournament into n edge-disjoint feasible systems whose
// components run from U1 to U4.
inline std::vector<System> decompose_backward_and_exceptional(const FeasibilityContext& ctx) {
    const Digraph& t = *ctx.t;
    int n = ctx.n();
    require_arg(is_regular(t).has_value(), "decompose_backward_and_exceptional: T must be regular");
    require_arg(is_bipartite_tournament(t, ctx.u.sides()),
                "decompose_backward_and_exceptional: T must be a bipartite tournament on the partition sides");

    int base = int(std::floor(snapped(ctx.gamma * n)));
    int t_prime = ((n - base) % 2 == 0) ? base : base + 1;
    require_hypothesis((n - t_prime) % 2 == 0 && t_prime <= n,
                       "decompose_backward_and_exceptional: no parity-correct t' exists");
    int r = (n - t_prime) / 2;

    std::vector<System> systems = cover_forward_exceptional(ctx, t_prime);

    Digraph rest = t;
    for (const System& s : systems)
        for (const Arc& a : s) rest.remove_arc(a.from, a.to);
    System leftover_backward;
    for (const Arc& a : rest.arcs())
        if (ctx.u.is_backward(a)) leftover_backward.push_back(a);

    if (leftover_backward.empty()) {
        // Nothing left to split; the remaining systems are empty.
        ThresholdSets hi = gamma_sets(t, ctx.u, 1 - ctx.gamma);
        require_hypothesis(hi.empty() || r == 0,
                           "decompose_backward_and_exceptional: high-degree vertices but no backward residue");
        for (int i = 0; i < 2 * r; ++i) systems.push_back({});
    } else {
        std::vector<System> rest_systems = decompose_backward_all(canonical(leftover_backward), ctx, r);
        systems.insert(systems.end(), rest_systems.begin(), rest_systems.end());
    }
    ensure(int(systems.size()) == n, "decompose_backward_and_exceptional: system count is not n");

    long size_hyp = 1;
    for (const System& s : systems) size_hyp = std::max(size_hyp, long(s.size()));
    std::vector<System> feasible = pseudo_to_feasible(systems, ctx, t, {}, size_hyp);

    std::set<Arc> covered = detail::arc_set_of(feasible);
    for (const Arc& a : backward_edges(t, ctx.u))
        ensure(covered.count(a), "decompose_backward_and_exceptional: backward edge uncovered");
    return feasible;
}

}  // namespace bitour

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bitour/hamilton.hpp"

namespace bitour {

namespace detail {

// Perfect matching between two vertex lists inside the given arc pool, with a
// seeded shuffle of the adjacency for restart diversity. Returns arcs
// left[i] -> right[match], or nothing.
inline std::optional<ArcList> perfect_matching_between(const Digraph& pool,
                                                       const std::vector<Vertex>& left,
                                                       const std::vector<Vertex>& right,
                                                       std::uint64_t seed) {
    if (left.size() != right.size()) return std::nullopt;
    if (left.empty()) return ArcList{};
    std::map<Vertex, int> rid;
    for (std::size_t i = 0; i < right.size(); ++i) rid[right[i]] = int(i);
    BipGraph g(int(left.size()), int(right.size()));
    for (std::size_t i = 0; i < left.size(); ++i)
        for_each_bit(pool.out_nbrs(left[i]), [&](int w) {
            auto it = rid.find(w);
            if (it != rid.end()) g.add_edge(int(i), it->second);
        });
    g.finish();
    if (seed != 0) {
        std::mt19937_64 rng(seed);
        for (auto& adj : g.adj)
            for (std::size_t i = adj.size(); i > 1; --i)
                std::swap(adj[i - 1], adj[uniform_below(rng, i)]);
    }
    std::vector<int> m = max_matching(g);
    if (matching_size(m) != int(left.size())) return std::nullopt;
    ArcList arcs;
    for (std::size_t i = 0; i < left.size(); ++i) arcs.push_back({left[i], right[m[i]]});
    return arcs;
}

}  // namespace detail

// One Hamilton cycle of a blow-up C4 that contains a required feasible
// system: perfect matchings in the first three pairs extend the system to a
// spanning U1 -> U4 path family, the paths contract to an auxiliary matching,
// and an exact Hamilton search over the pair (U4, U1) closes the cycle.
// Staged attempts are seeded; when they run out, a complete whole-instance
// search decides, so an absent answer is a proof.
inline std::optional<ArcList> blowup_c4_hamilton(const Digraph& d_forward,
                                                 const FeasibilityContext& ctx, const System& f,
                                                 std::uint64_t seed = 1, int staged_attempts = 8,
                                                 int cap = 40) {
    const QuadPartition& u = ctx.u;
    for (const Arc& a : d_forward.arcs())
        require_arg(u.is_forward(a), "blowup_c4_hamilton: host must contain forward arcs only");
    {
        FeasibilityCheck c = check_feasible(f, ctx);
        require_arg(c.ok, "blowup_c4_hamilton: required system infeasible: " + c.violation);
    }
    for (const Arc& a : f)
        require_arg(u.is_backward(a) || d_forward.has_arc(a.from, a.to) || ctx.t->has_arc(a.from, a.to),
                    "blowup_c4_hamilton: required arc unavailable");

    std::map<Vertex, int> f_out, f_in;
    for (const Arc& a : f) {
        ++f_out[a.from];
        ++f_in[a.to];
    }

    for (int attempt = 0; attempt < staged_attempts; ++attempt) {
        std::uint64_t s = (seed == 0 && attempt == 0)
                              ? 0
                              : seed + std::uint64_t(attempt) * 0x9e3779b97f4a7c15ULL;
        ArcList h = f;
        bool ok = true;
        for (int c = 0; c < 3 && ok; ++c) {
            std::vector<Vertex> need_out, need_in;
            for (Vertex v : u.cls(c))
                if (!f_out.count(v)) need_out.push_back(v);
            for (Vertex v : u.cls(c + 1))
                if (!f_in.count(v)) need_in.push_back(v);
            std::sort(need_out.begin(), need_out.end());
            std::sort(need_in.begin(), need_in.end());
            if (need_out.size() != need_in.size()) return std::nullopt;  // impossible for feasible f
            Digraph pool = d_forward;
            for (const Arc& a : f)
                if (pool.has_arc(a.from, a.to)) pool.remove_arc(a.from, a.to);
            auto m = detail::perfect_matching_between(pool, need_out, need_in, s);
            if (!m) {
                ok = false;
                break;
            }
            h.insert(h.end(), m->begin(), m->end());
        }
        if (!ok) continue;
        LinearForest lf(h);
        if (!lf.valid()) continue;  // a matching closed a cycle through f; retry

        // Every component must now run U1 -> U4 and the family must span.
        auto paths = lf.paths();
        std::set<Vertex> covered;
        bool shape_ok = true;
        for (const auto& p : paths) {
            shape_ok &= (u.index_of(p.front()) == 0 && u.index_of(p.back()) == 3);
            covered.insert(p.begin(), p.end());
        }
        if (!shape_ok || int(covered.size()) != ctx.t->order()) continue;

        // Contract each path to a node; closing arcs live in the pair (U4, U1).
        Digraph pd(int(paths.size()));
        std::map<Vertex, int> path_of_start;
        for (std::size_t i = 0; i < paths.size(); ++i) path_of_start[paths[i].front()] = int(i);
        for (std::size_t i = 0; i < paths.size(); ++i)
            for_each_bit(d_forward.out_nbrs(paths[i].back()), [&](int w) {
                auto it = path_of_start.find(w);
                if (it != path_of_start.end() && int(i) != it->second &&
                    !pd.has_arc(int(i), it->second))
                    pd.add_arc(int(i), it->second);
            });
        std::optional<ArcList> closing;
        if (paths.size() == 1) {
            if (d_forward.has_arc(paths[0].back(), paths[0].front()))
                closing = ArcList{{paths[0].back(), paths[0].front()}};
        } else {
            auto cyc = exact_hamilton(pd, LinearForest{}, int(paths.size()));
            if (cyc) {
                closing = ArcList{};
                for (const Arc& a : *cyc)
                    closing->push_back({paths[a.from].back(), paths[a.to].front()});
            }
        }
        if (!closing) continue;
        ArcList cycle = h;
        cycle.insert(cycle.end(), closing->begin(), closing->end());
        cycle = canonical(cycle);
        std::vector<Vertex> all;
        for (Vertex v = 0; v < ctx.t->order(); ++v) all.push_back(v);
        ensure(is_hamilton_cycle_on(cycle, all), "blowup_c4_hamilton: assembled a non-Hamilton cycle");
        for (const Arc& a : f)
            ensure(std::binary_search(cycle.begin(), cycle.end(), a),
                   "blowup_c4_hamilton: a required arc fell out");
        return cycle;
    }

    // Complete fallback: search the union directly with f forced.
    return exact_hamilton(d_forward, LinearForest(f), cap);
}

// ---------------------------------------------------------------------------
// The full decomposition driver.
// ---------------------------------------------------------------------------

struct DecomposeOptions {
    Params params;
    std::uint64_t seed = 1;
    int cap = 32;            // largest 4n the driver accepts
    int fallback_cap = 16;   // whole-instance exact search up to this order
    long budget = 100000;    // node expansions for cross-cycle backtracking
};

struct DecompositionReport {
    enum class Status { complete, partial, infeasible };
    Status status = Status::infeasible;
    std::string branch;  // "expander", "close", "fallback"
    std::vector<ArcList> cycles;
    ArcList residual;
    std::vector<std::array<long, 4>> balance;
    std::vector<int> ell;
    std::vector<std::string> notes;
};

namespace detail {

// Expander branch: peel Hamilton cycles via B->A matchings and contracted
// exact search; seeded restarts, then give up on this branch.
inline bool peel_expander(const Digraph& t, const std::vector<int>& side, DecomposeOptions opt,
                          std::vector<ArcList>& cycles) {
    int rounds = *is_regular(t);
    std::vector<Vertex> a_side, b_side;
    for (Vertex v = 0; v < t.order(); ++v) (side[v] == 0 ? a_side : b_side).push_back(v);
    for (int restart = 0; restart < 12; ++restart) {
        Digraph rest = t;
        std::vector<ArcList> got;
        std::uint64_t s = (restart == 0) ? 0 : opt.seed + std::uint64_t(restart) * 0x9e3779b9ULL;
        bool ok = true;
        for (int i = 0; i < rounds && ok; ++i) {
            auto m = perfect_matching_between(rest, b_side, a_side, s + i);
            if (!m) {
                ok = false;
                break;
            }
            ContractionMap cm = ContractionMap::from_arcs(*m, a_side, b_side);
            std::vector<ABEdge> ab;
            for (Vertex a : a_side)
                for_each_bit(rest.out_nbrs(a), [&](int b) { ab.push_back({a, Vertex(b)}); });
            ContractedDigraph cd = contract(ab, cm);
            auto cyc = exact_hamilton(cd.local, LinearForest{}, cd.local.order());
            if (!cyc) {
                ok = false;
                break;
            }
            // Recover the vertex sequence of the contracted cycle.
            std::map<Vertex, Vertex> next;
            for (const Arc& a : *cyc) next[cd.a_ids[a.from]] = cd.a_ids[a.to];
            std::vector<Vertex> seq{cd.a_ids[0]};
            while (seq.size() < next.size()) seq.push_back(next.at(seq.back()));
            ArcList ham = close_hamilton(seq, cm);
            for (const Arc& a : ham) rest.remove_arc(a.from, a.to);
            got.push_back(ham);
        }
        if (ok && rest.size() == 0) {
            cycles = got;
            return true;
        }
    }
    return false;
}

// Close branch assembly: one cycle per feasible system, forward edges split
// between the systems' cycles, chronological backtracking across positions.
inline bool assemble_close(const Digraph& t, const FeasibilityContext& ctx,
                           const std::vector<System>& systems, DecomposeOptions opt,
                           std::vector<ArcList>& cycles) {
    int n = int(systems.size());
    Digraph forward_pool = digraph_from_arcs(t.order(), forward_edges(t, ctx.u));
    std::vector<std::set<Arc>> reserved(n);
    for (int i = 0; i < n; ++i)
        for (const Arc& a : systems[i])
            if (ctx.u.is_forward(a)) reserved[i].insert(a);

    std::vector<ArcList> got;
    std::vector<int> attempt(n, 0);
    const int max_attempts = 10;
    Digraph avail = forward_pool;
    long steps_left = opt.budget;
    std::uint64_t tick = 0;
    int i = 0;
    while (i < n) {
        if (steps_left-- <= 0) return false;
        Digraph host = avail;
        for (int j = 0; j < n; ++j)
            if (j != i)
                for (const Arc& a : reserved[j])
                    if (host.has_arc(a.from, a.to)) host.remove_arc(a.from, a.to);
        std::optional<ArcList> cyc;
        std::uint64_t pos_seed = attempt[i] == 0 && tick == 0
                                     ? 0
                                     : opt.seed + std::uint64_t(i) * 131 +
                                           std::uint64_t(attempt[i]) * 7919 + (tick << 20);
        try {
            cyc = blowup_c4_hamilton(host, ctx, systems[i], pos_seed, 6, t.order());
        } catch (const size_limit&) {
            return false;
        }
        if (cyc) {
            for (const Arc& a : *cyc)
                if (ctx.u.is_forward(a)) avail.remove_arc(a.from, a.to);
            got.push_back(*cyc);
            ++i;
            continue;
        }
        // Position i is impossible for this host (the inner search is
        // complete), so back up; a level whose retries are spent resets and
        // pushes the backtrack further down.
        ++tick;
        while (true) {
            if (i == 0) return false;
            --i;
            for (const Arc& a : got.back())
                if (ctx.u.is_forward(a)) avail.add_arc(a.from, a.to);
            got.pop_back();
            if (++attempt[i] <= max_attempts) break;
            attempt[i] = 0;
        }
    }
    cycles = got;
    return true;
}

}  // namespace detail

inline DecompositionReport decompose_tournament(const Digraph& t, const std::vector<int>& side,
                                                const DecomposeOptions& opt = {}) {
    if (t.order() > opt.cap) throw size_limit("decompose_tournament: order exceeds the cap");
    require_arg(is_bipartite_tournament(t, side), "decompose_tournament: not a bipartite tournament");
    require_arg(is_regular(t).has_value(), "decompose_tournament: not regular");
    opt.params.validate();

    DecompositionReport rep;
    ExpansionCertificate cert;
    bool have_cert = false;
    try {
        cert = classify_two_cases(t, side, opt.params.nu_prime, opt.params.tau);
        have_cert = true;
    } catch (const size_limit& e) {
        rep.notes.push_back(e.what());
    }

    std::optional<QuadPartition> diag_u;
    if (have_cert && cert.kind == ExpansionCertificate::Kind::expander) {
        rep.branch = "expander";
        std::vector<ArcList> cycles;
        if (detail::peel_expander(t, side, opt, cycles)) {
            rep.cycles = cycles;
            rep.status = DecompositionReport::Status::complete;
        }
    } else if (have_cert) {
        rep.branch = "close";
        diag_u = cert.partition;
        try {
            int m = int(std::count(side.begin(), side.end(), 0));
            QuadPartition u = optimal_partition(
                t, side, m <= 12 ? PartitionMode::exact : PartitionMode::local);
            diag_u = u;
            ExceptionalSet es = exceptional_set(t, u, opt.params.eps_prime);
            FeasibilityContext ctx(t, u, es, opt.params.gamma);
            std::vector<System> systems = decompose_backward_and_exceptional(ctx);
            std::vector<ArcList> cycles;
            if (detail::assemble_close(t, ctx, systems, opt, cycles)) {
                rep.cycles = cycles;
                rep.status = DecompositionReport::Status::complete;
            } else {
                rep.notes.push_back("close branch: assembly budget exhausted");
            }
        } catch (const hypothesis_unmet& e) {
            rep.notes.push_back(e.what());
        } catch (const invalid_argument& e) {
            rep.notes.push_back(e.what());
        }
    }

    if (rep.status != DecompositionReport::Status::complete && t.order() <= opt.fallback_cap) {
        rep.branch = rep.branch.empty() ? "fallback" : rep.branch + "+fallback";
        auto full = exhaustive_decomposition(t, opt.fallback_cap);
        if (full) {
            rep.cycles = *full;
            rep.status = DecompositionReport::Status::complete;
        } else {
            rep.status = DecompositionReport::Status::infeasible;
            rep.notes.push_back("exhaustive search proves no Hamilton decomposition exists");
        }
    }

    if (rep.status == DecompositionReport::Status::complete) {
        VerifyReport v = verify_decomposition(t, rep.cycles, diag_u ? &*diag_u : nullptr);
        ensure(v.ok, "decompose_tournament: produced cycles failed verification: " +
                         (v.violations.empty() ? "" : v.violations.front()));
        rep.balance = v.balance;
        rep.ell = v.ell;
    } else {
        if (!rep.cycles.empty()) rep.status = DecompositionReport::Status::partial;
        std::set<Arc> used;
        for (const ArcList& c : rep.cycles) used.insert(c.begin(), c.end());
        for (const Arc& a : t.arcs())
            if (!used.count(a)) rep.residual.push_back(a);
    }
    return rep;
}

}  // namespace bitour

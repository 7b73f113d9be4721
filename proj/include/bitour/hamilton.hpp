#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bitour/feasible_transform.hpp"

namespace bitour {

// Vertices with at least ceil(nu * scale) in-neighbours in S; `scale` is the
// bipartition class size for bipartite hosts and the order otherwise.
inline std::vector<Vertex> robust_out_nbhd(const Digraph& d, const std::vector<Vertex>& s, double nu,
                                           int scale) {
    bitset mask(d.order());
    for (Vertex v : s) mask.set(v);
    int need = ceil_threshold(nu * scale);
    std::vector<Vertex> out;
    for (Vertex v = 0; v < d.order(); ++v)
        if (d.in_nbrs(v).count_and(mask) >= need) out.push_back(v);
    return out;
}

struct ExpanderProbe {
    bool is_expander = true;
    bool exhaustive = false;          // sampled verdicts never certify
    std::vector<Vertex> witness;      // failing S when !is_expander
};

// Bipartite robust (nu,tau)-outexpansion test. Exhaustive mode walks every
// subset of each side with tau*m <= |S| <= (1-tau)*m (side size m <= 20) in
// ascending mask order; sampled mode only reports "no witness found".
inline ExpanderProbe is_bip_robust_outexpander(const Digraph& d, const std::vector<int>& side,
                                               double nu, double tau, bool exhaustive,
                                               int samples = 2000, std::uint64_t seed = 0) {
    std::vector<Vertex> side_v[2];
    for (Vertex v = 0; v < d.order(); ++v) side_v[side[v]].push_back(v);
    require_arg(side_v[0].size() == side_v[1].size(), "expander test: sides must be balanced");
    int m = int(side_v[0].size());
    ExpanderProbe probe;
    probe.exhaustive = exhaustive;
    double lo = snapped(tau * m), hi = snapped((1 - tau) * m);
    int need_in = ceil_threshold(nu * m);
    double demand_gap = snapped(nu * m);

    auto fails = [&](const std::vector<Vertex>& s) {
        bitset mask(d.order());
        for (Vertex v : s) mask.set(v);
        int rn = 0;
        for (Vertex v = 0; v < d.order(); ++v)
            if (d.in_nbrs(v).count_and(mask) >= need_in) ++rn;
        return double(rn) < double(s.size()) + demand_gap - 1e-9;
    };

    if (exhaustive) {
        require_arg(m <= 20, "expander test: exhaustive mode capped at class size 20");
        for (int cls = 0; cls < 2; ++cls) {
            for (std::uint64_t bits = 1; bits < (std::uint64_t{1} << m); ++bits) {
                int k = std::popcount(bits);
                if (double(k) < lo - 1e-9 || double(k) > hi + 1e-9) continue;
                std::vector<Vertex> s;
                for (int i = 0; i < m; ++i)
                    if ((bits >> i) & 1) s.push_back(side_v[cls][i]);
                if (fails(s)) {
                    probe.is_expander = false;
                    probe.witness = s;
                    return probe;
                }
            }
        }
        return probe;
    }

    std::mt19937_64 rng(seed);
    int klo = int(std::ceil(lo - 1e-9)), khi = int(std::floor(hi + 1e-9));
    if (klo > khi) return probe;
    for (int it = 0; it < samples; ++it) {
        int cls = int(uniform_below(rng, 2));
        int k = klo + int(uniform_below(rng, std::uint64_t(khi - klo + 1)));
        std::vector<Vertex> pool = side_v[cls];
        for (int i = 0; i < k; ++i) {
            std::size_t j = i + uniform_below(rng, pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        std::vector<Vertex> s(pool.begin(), pool.begin() + k);
        std::sort(s.begin(), s.end());
        if (fails(s)) {
            probe.is_expander = false;
            probe.witness = s;
            return probe;
        }
    }
    return probe;
}

struct ExpansionCertificate {
    enum class Kind { expander, close };
    Kind kind = Kind::expander;
    bool exhaustive = false;
    double nu = 0, tau = 0;
    std::vector<Vertex> witness;  // failing S for the close kind
    QuadPartition partition;      // derived quad partition (close kind)
    long backward_count = 0;      // total backward edges of the derived partition
};

// The two-cases classifier: either an exhaustively certified bipartite robust
// (nu',tau)-outexpander, or a quad partition witnessing closeness to the
// complete blow-up C4 with at most 4*sqrt(nu')*n^2 backward edges.
inline ExpansionCertificate classify_two_cases(const Digraph& t, const std::vector<int>& side,
                                               double nu_prime, double tau) {
    require_arg(is_bipartite_tournament(t, side), "classify_two_cases: not a bipartite tournament");
    require_arg(is_regular(t).has_value(), "classify_two_cases: not regular");
    std::vector<Vertex> side_v[2];
    for (Vertex v = 0; v < t.order(); ++v) side_v[side[v]].push_back(v);
    int m = int(side_v[0].size());
    if (m > 20) throw size_limit("classify_two_cases: exhaustive witness search capped at class size 20");
    require_arg(m % 2 == 0, "classify_two_cases: class size must be even");
    int n = m / 2;

    ExpansionCertificate cert;
    cert.nu = nu_prime;
    cert.tau = tau;
    ExpanderProbe probe = is_bip_robust_outexpander(t, side, nu_prime, tau, true);
    if (probe.is_expander) {
        cert.kind = ExpansionCertificate::Kind::expander;
        cert.exhaustive = true;
        return cert;
    }

    cert.kind = ExpansionCertificate::Kind::close;
    cert.witness = probe.witness;
    int wside = side[probe.witness.front()];
    const std::vector<Vertex>& a_all = side_v[wside];
    const std::vector<Vertex>& b_all = side_v[1 - wside];
    std::vector<Vertex> b_prime = robust_out_nbhd(t, probe.witness, nu_prime, m);

    // Balanced truncation/extension of a set inside its side, preferring the
    // set's own vertices, ascending id.
    auto balance = [&](const std::vector<Vertex>& pref, const std::vector<Vertex>& all) {
        std::set<Vertex> chosen;
        for (Vertex v : pref) {
            if (int(chosen.size()) == n) break;
            chosen.insert(v);
        }
        for (Vertex v : all) {
            if (int(chosen.size()) == n) break;
            chosen.insert(v);
        }
        return std::vector<Vertex>(chosen.begin(), chosen.end());
    };
    std::vector<Vertex> u1 = balance(probe.witness, a_all);
    std::vector<Vertex> u2 = balance(b_prime, b_all);
    std::array<std::vector<Vertex>, 4> cls;
    cls[0] = u1;
    cls[1] = u2;
    std::set<Vertex> in1(u1.begin(), u1.end()), in2(u2.begin(), u2.end());
    for (Vertex v : a_all)
        if (!in1.count(v)) cls[2].push_back(v);
    for (Vertex v : b_all)
        if (!in2.count(v)) cls[3].push_back(v);
    cert.partition = QuadPartition(t.order(), cls);
    cert.backward_count = total_backward(t, cert.partition);
    double bound = snapped(4.0 * std::sqrt(nu_prime) * double(n) * double(n));
    if (double(cert.backward_count) > bound + 1e-9)
        throw size_limit("classify_two_cases: derived partition misses the closeness bound at this size");
    return cert;
}

// ---------------------------------------------------------------------------
// Exact Hamilton search with required arcs. Required paths are pre-contracted
// to supernodes; the search is complete backtracking with forced-move
// propagation and reachability pruning.
// ---------------------------------------------------------------------------

namespace detail {

// Enumerates Hamilton cycles of `d` as node sequences; the callback returns
// false to keep enumerating, true to stop. When a node budget is supplied and
// runs out, *exhausted is set: the enumeration is then incomplete and absence
// of a result proves nothing.
inline bool enumerate_hamilton(const Digraph& d, const std::function<bool(const std::vector<int>&)>& cb,
                               long* budget = nullptr, bool* exhausted = nullptr) {
    int n = d.order();
    if (n == 0) return false;
    if (n == 1) return false;  // loop-free
    std::vector<int> path{0};
    bitset visited(n);
    visited.set(0);

    std::function<bool()> dfs = [&]() -> bool {
        if (budget) {
            if (*budget <= 0) {
                if (exhausted) *exhausted = true;
                return false;
            }
            --*budget;
        }
        int cur = path.back();
        if (int(path.size()) == n) return d.has_arc(cur, 0) ? cb(path) : false;

        // Dead-end and forced-move scan.
        int forced = -1;
        for (int u = 0; u < n; ++u) {
            if (visited.test(u)) continue;
            int avail_in = 0, via_cur = 0;
            for_each_bit(d.in_nbrs(u), [&](int w) {
                if (w == cur) {
                    ++avail_in;
                    ++via_cur;
                } else if (!visited.test(w)) {
                    ++avail_in;
                }
            });
            if (avail_in == 0) return false;
            int avail_out = 0;
            for_each_bit(d.out_nbrs(u), [&](int w) {
                if (w == 0 || !visited.test(w)) ++avail_out;
            });
            if (avail_out == 0) return false;
            if (avail_in == 1 && via_cur == 1) {
                if (forced >= 0) return false;  // two vertices demand the same move
                forced = u;
            }
        }
        // Reachability: every unvisited vertex and the start must be reachable
        // from cur through unvisited vertices.
        {
            bitset reach(n);
            std::vector<int> stack{cur};
            reach.set(cur);
            bool start_ok = false;
            while (!stack.empty()) {
                int w = stack.back();
                stack.pop_back();
                for_each_bit(d.out_nbrs(w), [&](int x) {
                    if (x == 0) start_ok = true;
                    if (!visited.test(x) && !reach.test(x)) {
                        reach.set(x);
                        stack.push_back(x);
                    }
                });
            }
            if (!start_ok) return false;
            for (int u = 0; u < n; ++u)
                if (!visited.test(u) && !reach.test(u)) return false;
        }

        std::vector<int> cands;
        if (forced >= 0 && d.has_arc(cur, forced)) {
            cands.push_back(forced);
        } else if (forced >= 0) {
            // the forced vertex is fed only by cur, but no arc exists
            return false;
        } else {
            for_each_bit(d.out_nbrs(cur), [&](int w) {
                if (!visited.test(w)) cands.push_back(w);
            });
        }
        for (int w : cands) {
            path.push_back(w);
            visited.set(w);
            if (dfs()) return true;
            visited.reset(w);
            path.pop_back();
        }
        return false;
    };
    return dfs();
}

struct MergedGraph {
    Digraph d;
    std::vector<std::vector<Vertex>> expansion;  // node -> the path it stands for
};

// Contract the maximal paths of `required` into single nodes of a search
// digraph; arcs enter a path at its start and leave at its end.
inline std::optional<MergedGraph> merge_required(const Digraph& host, const LinearForest& required) {
    std::map<Vertex, int> node_of;
    MergedGraph mg;
    std::set<Vertex> in_path;
    for (const auto& p : required.paths())
        for (Vertex v : p) in_path.insert(v);
    for (const auto& p : required.paths()) {
        mg.expansion.push_back(p);
    }
    for (Vertex v = 0; v < host.order(); ++v)
        if (!in_path.count(v)) mg.expansion.push_back({v});
    std::sort(mg.expansion.begin(), mg.expansion.end());
    std::map<Vertex, int> start_node, end_node;
    for (int i = 0; i < int(mg.expansion.size()); ++i) {
        start_node[mg.expansion[i].front()] = i;
        end_node[mg.expansion[i].back()] = i;
    }
    mg.d = Digraph(int(mg.expansion.size()));
    for (const Arc& a : host.arcs()) {
        auto from_it = end_node.find(a.from);
        auto to_it = start_node.find(a.to);
        if (from_it == end_node.end() || to_it == start_node.end()) continue;  // enters or exits mid-path
        if (required.contains(a)) continue;
        if (from_it->second == to_it->second) continue;
        if (!mg.d.has_arc(from_it->second, to_it->second)) mg.d.add_arc(from_it->second, to_it->second);
    }
    return mg;
}

}  // namespace detail

// A Hamilton cycle of D (plus the required arcs, which may extend D)
// containing every required arc, or nothing if none exists. The search is
// complete unless a budget is supplied and runs out, which *exhausted flags.
inline std::optional<ArcList> exact_hamilton(const Digraph& d_in, const LinearForest& required,
                                             int cap = 40, long* budget = nullptr,
                                             bool* exhausted = nullptr) {
    if (d_in.order() > cap) throw size_limit("exact_hamilton: order exceeds the cap");
    Digraph host = d_in;
    for (const Arc& a : required.arcs())
        if (!host.has_arc(a.from, a.to)) host.add_arc(a.from, a.to);

    std::vector<Vertex> all_vertices;
    for (Vertex v = 0; v < host.order(); ++v) all_vertices.push_back(v);
    if (!required.valid()) {
        ArcList arcs = required.arcs();
        if (is_hamilton_cycle_on(arcs, all_vertices)) return canonical(arcs);
        return std::nullopt;
    }
    if (host.order() == 1) return std::nullopt;

    auto merged = detail::merge_required(host, required);
    if (!merged) return std::nullopt;
    const auto& mg = *merged;
    if (mg.d.order() == 1) {
        // One spanning required path; it closes iff the host has the back arc.
        const auto& p = mg.expansion[0];
        if (p.size() >= 2 && host.has_arc(p.back(), p.front())) {
            ArcList arcs = required.arcs();
            arcs.push_back({p.back(), p.front()});
            return canonical(arcs);
        }
        return std::nullopt;
    }

    std::optional<ArcList> result;
    detail::enumerate_hamilton(
        mg.d,
        [&](const std::vector<int>& nodes) {
            ArcList arcs;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                const auto& p = mg.expansion[nodes[i]];
                for (std::size_t k = 0; k + 1 < p.size(); ++k) arcs.push_back({p[k], p[k + 1]});
                const auto& q = mg.expansion[nodes[(i + 1) % nodes.size()]];
                arcs.push_back({p.back(), q.front()});
            }
            result = canonical(arcs);
            return true;
        },
        budget, exhausted);
    if (result) {
        ensure(is_hamilton_cycle_on(*result, all_vertices), "exact_hamilton: produced a non-Hamilton cycle");
        for (const Arc& a : required.arcs())
            ensure(std::binary_search(result->begin(), result->end(), a),
                   "exact_hamilton: required arc missing from the cycle");
        for (const Arc& a : *result)
            ensure(host.has_arc(a.from, a.to), "exact_hamilton: cycle uses a foreign arc");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Exhaustive Hamilton-decomposition search: enumerate the Hamilton cycles
// through a pivot arc, recurse on the residual regular digraph. An absent
// result proves there is no decomposition.
// ---------------------------------------------------------------------------

inline std::optional<std::vector<ArcList>> exhaustive_decomposition(const Digraph& d_in, int cap = 14) {
    if (d_in.order() > cap) throw size_limit("exhaustive_decomposition: order exceeds the cap");

    std::function<std::optional<std::vector<ArcList>>(Digraph&)> rec =
        [&](Digraph& d) -> std::optional<std::vector<ArcList>> {
        if (d.size() == 0) return std::vector<ArcList>{};
        auto reg = is_regular(d);
        if (!reg || *reg == 0) return std::nullopt;
        Arc pivot = d.arcs().front();

        // Enumerate Hamilton cycles through the pivot: paths from pivot.to
        // back to pivot.from covering everything.
        int n = d.order();
        std::vector<Vertex> path{pivot.from, pivot.to};
        bitset visited(n);
        visited.set(pivot.from);
        visited.set(pivot.to);
        std::optional<std::vector<ArcList>> found;

        std::function<bool()> dfs = [&]() -> bool {
            Vertex cur = path.back();
            if (int(path.size()) == n) {
                if (!d.has_arc(cur, pivot.from)) return false;
                ArcList cycle;
                for (std::size_t i = 0; i < path.size(); ++i)
                    cycle.push_back({path[i], path[(i + 1) % path.size()]});
                cycle = canonical(cycle);
                Digraph rest = d;
                for (const Arc& a : cycle) rest.remove_arc(a.from, a.to);
                auto sub = rec(rest);
                if (sub) {
                    sub->insert(sub->begin(), cycle);
                    found = std::move(sub);
                    return true;
                }
                return false;
            }
            // dead-end pruning
            for (int u = 0; u < n; ++u) {
                if (visited.test(u)) continue;
                bool has_in = false, has_out = false;
                for_each_bit(d.in_nbrs(u), [&](int w) {
                    if (w == cur || !visited.test(w)) has_in = true;
                });
                for_each_bit(d.out_nbrs(u), [&](int w) {
                    if (w == pivot.from || !visited.test(w)) has_out = true;
                });
                if (!has_in || !has_out) return false;
            }
            bool stop = false;
            for_each_bit(d.out_nbrs(cur), [&](int w) {
                if (stop || visited.test(w)) return;
                path.push_back(w);
                visited.set(w);
                if (dfs()) stop = true;
                if (!stop) {
                    visited.reset(w);
                    path.pop_back();
                }
            });
            return stop;
        };
        dfs();
        return found;
    };

    Digraph d = d_in;
    return rec(d);
}

// ---------------------------------------------------------------------------
// Verification of decompositions.
// ---------------------------------------------------------------------------

struct VerifyReport {
    bool ok = true;
    std::vector<std::string> violations;
    std::vector<std::array<long, 4>> balance;  // per-cycle e_C(U_i, U_{i-1}) when U given
    std::vector<int> ell;                      // per-cycle class-count constant when U given
};

inline VerifyReport verify_decomposition(const Digraph& t, const std::vector<ArcList>& cycles,
                                         const QuadPartition* u = nullptr) {
    VerifyReport rep;
    auto complain = [&](const std::string& s) {
        rep.ok = false;
        rep.violations.push_back(s);
    };
    std::set<Arc> seen;
    for (std::size_t i = 0; i < cycles.size(); ++i) {
        std::vector<Vertex> all;
        for (Vertex v = 0; v < t.order(); ++v) all.push_back(v);
        if (!is_hamilton_cycle_on(cycles[i], all))
            complain("cycle " + std::to_string(i + 1) + " is not a Hamilton cycle");
        for (const Arc& a : cycles[i]) {
            if (!t.has_arc(a.from, a.to))
                complain("cycle " + std::to_string(i + 1) + " uses arc (" + std::to_string(a.from) +
                         "," + std::to_string(a.to) + ") not in T");
            if (!seen.insert(a).second)
                complain("arc (" + std::to_string(a.from) + "," + std::to_string(a.to) +
                         ") used twice");
        }
    }
    if (long(seen.size()) != long(t.size()))
        complain("cycles cover " + std::to_string(seen.size()) + " arcs, T has " +
                 std::to_string(t.size()));
    if (u) {
        for (std::size_t i = 0; i < cycles.size(); ++i) {
            std::array<long, 4> down{0, 0, 0, 0};
            for (const Arc& a : cycles[i])
                if (u->is_backward(a)) ++down[u->index_of(a.from)];
            rep.balance.push_back(down);
            if (down[0] != down[2] || down[1] != down[3])
                complain("cycle " + std::to_string(i + 1) + " violates the backward balance law");
            try {
                rep.ell.push_back(cycle_ell(cycles[i], *u));
            } catch (const std::exception& e) {
                complain("cycle " + std::to_string(i + 1) + ": " + e.what());
                rep.ell.push_back(0);
            }
        }
    }
    return rep;
}

}  // namespace bitour

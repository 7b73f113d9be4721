#pragma once

#include <array>
#include <string>
#include <vector>

#include "bitour/digraph.hpp"

namespace bitour {

// Ordered 4-tuple (U1..U4) of equal-size vertex sets partitioning V(T).
// Pair indices are mod 4: forward arcs go U_i -> U_{i+1}, backward arcs
// U_{i+1} -> U_i. U1 u U3 and U2 u U4 are the bipartition sides.
class QuadPartition {
public:
    QuadPartition() = default;

    QuadPartition(int n_vertices, const std::array<std::vector<Vertex>, 4>& classes)
        : classes_(classes), index_of_(n_vertices, -1), masks_{} {
        int total = 0;
        for (int i = 0; i < 4; ++i) total += int(classes_[i].size());
        require_arg(total == n_vertices, "quad partition: classes must cover all vertices");
        require_arg(classes_[0].size() == classes_[1].size() &&
                        classes_[1].size() == classes_[2].size() &&
                        classes_[2].size() == classes_[3].size(),
                    "quad partition: classes must have equal size");
        for (int i = 0; i < 4; ++i) {
            masks_[i] = bitset(n_vertices);
            for (Vertex v : classes_[i]) {
                require_arg(index_of_[v] == -1, "quad partition: classes must be disjoint");
                index_of_[v] = i;
                masks_[i].set(v);
            }
        }
    }

    // Native partition of a 4-classed digraph (blow-up generators, files).
    static QuadPartition native(const Digraph& d) {
        require_arg(d.num_classes() == 4, "quad partition: digraph does not carry 4 classes");
        std::array<std::vector<Vertex>, 4> cls;
        for (Vertex v = 0; v < d.order(); ++v) cls[d.class_of(v)].push_back(v);
        return QuadPartition(d.order(), cls);
    }

    int class_size() const { return int(classes_[0].size()); }
    int n_vertices() const { return int(index_of_.size()); }

    // 0-based class index of v.
    int index_of(Vertex v) const { return index_of_[v]; }

    // 0-based access; `cls(i)` sorted ascending is not guaranteed, use members.
    const std::vector<Vertex>& cls(int i) const { return classes_[(i % 4 + 4) % 4]; }
    const bitset& mask(int i) const { return masks_[(i % 4 + 4) % 4]; }

    bool is_forward(const Arc& a) const { return index_of_[a.to] == (index_of_[a.from] + 1) % 4; }
    bool is_backward(const Arc& a) const { return index_of_[a.from] == (index_of_[a.to] + 1) % 4; }

    QuadPartition rotated(int k) const {
        std::array<std::vector<Vertex>, 4> cls;
        for (int i = 0; i < 4; ++i) cls[i] = classes_[(i + k) % 4];
        return QuadPartition(n_vertices(), cls);
    }

    // Bipartition side of v: 0 for U1 u U3, 1 for U2 u U4.
    int side_of(Vertex v) const { return index_of_[v] % 2; }

    std::vector<int> sides() const {
        std::vector<int> s(index_of_.size());
        for (Vertex v = 0; v < n_vertices(); ++v) s[v] = side_of(v);
        return s;
    }

private:
    std::array<std::vector<Vertex>, 4> classes_;
    std::vector<int> index_of_;
    std::array<bitset, 4> masks_;
};

inline ArcList backward_edges(const Digraph& t, const QuadPartition& u) {
    ArcList out;
    for (const Arc& a : t.arcs())
        if (u.is_backward(a)) out.push_back(a);
    return out;
}

inline ArcList forward_edges(const Digraph& t, const QuadPartition& u) {
    ArcList out;
    for (const Arc& a : t.arcs())
        if (u.is_forward(a)) out.push_back(a);
    return out;
}

// e_T(U_{i+1}, U_i) for 0-based pair index i: arcs from class i+1 into class i.
inline long backward_pair_count(const Digraph& t, const QuadPartition& u, int i) {
    long c = 0;
    for (Vertex v : u.cls(i + 1)) c += t.out_nbrs(v).count_and(u.mask(i));
    return c;
}

inline long forward_pair_count(const Digraph& t, const QuadPartition& u, int i) {
    long c = 0;
    for (Vertex v : u.cls(i)) c += t.out_nbrs(v).count_and(u.mask(i + 1));
    return c;
}

inline long total_backward(const Digraph& t, const QuadPartition& u) {
    long c = 0;
    for (int i = 0; i < 4; ++i) c += backward_pair_count(t, u, i);
    return c;
}

inline int backward_out_deg(const Digraph& t, const QuadPartition& u, Vertex v) {
    return t.out_nbrs(v).count_and(u.mask(u.index_of(v) - 1));
}

inline int backward_in_deg(const Digraph& t, const QuadPartition& u, Vertex v) {
    return t.in_nbrs(v).count_and(u.mask(u.index_of(v) + 1));
}

inline int forward_out_deg(const Digraph& t, const QuadPartition& u, Vertex v) {
    return t.out_nbrs(v).count_and(u.mask(u.index_of(v) + 1));
}

inline int forward_in_deg(const Digraph& t, const QuadPartition& u, Vertex v) {
    return t.in_nbrs(v).count_and(u.mask(u.index_of(v) - 1));
}

struct BalanceReport {
    bool ok = true;
    long common_backward = 0;  // the shared per-pair backward count b
    std::string violation;     // names the offending vertex or pair
};

// Per-vertex forward/backward degree symmetry plus equality of the four
// forward pair-counts and of the four backward pair-counts. Violations name
// their witness; they signal a non-regular tournament or mislabeled classes.
inline BalanceReport check_regular_balance(const Digraph& t, const QuadPartition& u) {
    BalanceReport rep;
    for (Vertex v = 0; v < t.order(); ++v) {
        if (forward_out_deg(t, u, v) != forward_in_deg(t, u, v)) {
            rep.ok = false;
            rep.violation = "forward degree asymmetry at vertex " + std::to_string(v);
            return rep;
        }
        if (backward_out_deg(t, u, v) != backward_in_deg(t, u, v)) {
            rep.ok = false;
            rep.violation = "backward degree asymmetry at vertex " + std::to_string(v);
            return rep;
        }
    }
    for (int i = 1; i < 4; ++i) {
        if (forward_pair_count(t, u, i) != forward_pair_count(t, u, 0)) {
            rep.ok = false;
            rep.violation = "forward pair count mismatch at pair " + std::to_string(i + 1);
            return rep;
        }
        if (backward_pair_count(t, u, i) != backward_pair_count(t, u, 0)) {
            rep.ok = false;
            rep.violation = "backward pair count mismatch at pair " + std::to_string(i + 1);
            return rep;
        }
    }
    rep.common_backward = backward_pair_count(t, u, 0);
    return rep;
}

// Whether every backward pair count is at most eps * n^2.
inline bool eps4_check(const Digraph& t, const QuadPartition& u, double eps) {
    double bound = snapped(eps * u.class_size() * u.class_size());
    for (int i = 0; i < 4; ++i)
        if (double(backward_pair_count(t, u, i)) > bound) return false;
    return true;
}

namespace detail {

// Enumerates the size-k subsets of `pool` as sorted index vectors.
template <typename F>
void for_each_subset(int pool, int k, F&& f) {
    std::vector<int> pick(k);
    for (int i = 0; i < k; ++i) pick[i] = i;
    while (true) {
        f(pick);
        int i = k - 1;
        while (i >= 0 && pick[i] == pool - k + i) --i;
        if (i < 0) return;
        ++pick[i];
        for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
}

inline QuadPartition assemble(int n_vertices, const std::vector<Vertex>& side_a,
                              const std::vector<Vertex>& side_b, const std::vector<int>& a_pick,
                              const std::vector<int>& b_pick) {
    int n = int(a_pick.size());
    std::array<std::vector<Vertex>, 4> cls;
    std::vector<char> in_a(side_a.size(), 0), in_b(side_b.size(), 0);
    for (int i : a_pick) in_a[i] = 1;
    for (int i : b_pick) in_b[i] = 1;
    for (std::size_t i = 0; i < side_a.size(); ++i) (in_a[i] ? cls[0] : cls[2]).push_back(side_a[i]);
    for (std::size_t i = 0; i < side_b.size(); ++i) (in_b[i] ? cls[1] : cls[3]).push_back(side_b[i]);
    require_arg(int(cls[0].size()) == n, "assemble: unbalanced pick");
    return QuadPartition(n_vertices, cls);
}

}  // namespace detail

enum class PartitionMode { exact, local };

// A quad partition of the regular bipartite tournament T minimizing the
// number of backward edges. Exact mode exhausts all balanced re-splits of
// both bipartition sides (side size <= 12). Local mode hill-climbs over
// single swaps u <-> v between opposite classes of a side, first-improvement
// in ascending id order, restarted from the 4 rotations of the initial split.
inline QuadPartition optimal_partition(const Digraph& t, const std::vector<int>& side,
                                       PartitionMode mode) {
    require_arg(t.order() % 4 == 0, "optimal_partition: order must be 4n");
    require_arg(is_bipartite_tournament(t, side), "optimal_partition: not a bipartite tournament on the given sides");
    require_arg(is_regular(t).has_value(), "optimal_partition: tournament must be regular");

    std::vector<Vertex> side_a, side_b;
    for (Vertex v = 0; v < t.order(); ++v) (side[v] == 0 ? side_a : side_b).push_back(v);
    require_arg(side_a.size() == side_b.size(), "optimal_partition: sides must be balanced");
    int n = int(side_a.size()) / 2;
    require_arg(int(side_a.size()) == 2 * n, "optimal_partition: side size must be even");

    if (mode == PartitionMode::exact) {
        require_arg(2 * n <= 12, "optimal_partition: exact mode capped at side size 12");
        QuadPartition best;
        long best_cost = -1;
        detail::for_each_subset(2 * n, n, [&](const std::vector<int>& a_pick) {
            detail::for_each_subset(2 * n, n, [&](const std::vector<int>& b_pick) {
                QuadPartition cand = detail::assemble(t.order(), side_a, side_b, a_pick, b_pick);
                long cost = total_backward(t, cand);
                if (best_cost < 0 || cost < best_cost) {
                    best_cost = cost;
                    best = cand;
                }
            });
        });
        return best;
    }

    std::vector<int> all(n), rest(n);
    for (int i = 0; i < n; ++i) all[i] = i, rest[i] = n + i;
    QuadPartition best;
    long best_cost = -1;
    for (int rot = 0; rot < 4; ++rot) {
        QuadPartition cur = detail::assemble(t.order(), side_a, side_b, all, rest).rotated(rot);
        long cost = total_backward(t, cur);
        bool improved = true;
        while (improved) {
            improved = false;
            // Swap candidates: u in U3 with v in U1, then u in U4 with v in U2.
            for (int base : {0, 1}) {
                std::vector<Vertex> lo = cur.cls(base), hi = cur.cls(base + 2);
                std::sort(lo.begin(), lo.end());
                std::sort(hi.begin(), hi.end());
                for (Vertex v : lo) {
                    for (Vertex u : hi) {
                        std::array<std::vector<Vertex>, 4> cls;
                        for (int i = 0; i < 4; ++i) cls[i] = cur.cls(i);
                        auto swap_in = [&](std::vector<Vertex>& c, Vertex old_v, Vertex new_v) {
                            for (auto& x : c)
                                if (x == old_v) x = new_v;
                        };
                        swap_in(cls[base], v, u);
                        swap_in(cls[base + 2], u, v);
                        QuadPartition cand(t.order(), cls);
                        long cand_cost = total_backward(t, cand);
                        if (cand_cost < cost) {
                            cur = cand;
                            cost = cand_cost;
                            improved = true;
                            break;
                        }
                    }
                    if (improved) break;
                }
                if (improved) break;
            }
        }
        if (best_cost < 0 || cost < best_cost) {
            best_cost = cost;
            best = cur;
        }
    }
    return best;
}

// U_i^gamma(T): vertices of U_i whose backward out-degree (equivalently
// in-degree, in a regular tournament) exceeds gamma * n.
struct ThresholdSets {
    double gamma = 0;
    std::array<std::vector<Vertex>, 4> per_class;

    std::vector<Vertex> all() const {
        std::vector<Vertex> v;
        for (const auto& c : per_class) v.insert(v.end(), c.begin(), c.end());
        std::sort(v.begin(), v.end());
        return v;
    }

    bool contains(Vertex v) const {
        for (const auto& c : per_class)
            for (Vertex w : c)
                if (w == v) return true;
        return false;
    }

    bool empty() const {
        for (const auto& c : per_class)
            if (!c.empty()) return false;
        return true;
    }
};

inline ThresholdSets gamma_sets(const Digraph& t, const QuadPartition& u, double gamma) {
    ThresholdSets ts;
    ts.gamma = gamma;
    double bound = gamma * u.class_size();
    for (int i = 0; i < 4; ++i) {
        std::vector<Vertex> cls = u.cls(i);
        std::sort(cls.begin(), cls.end());
        for (Vertex v : cls)
            if (gt_threshold(backward_out_deg(t, u, v), bound)) ts.per_class[i].push_back(v);
    }
    return ts;
}

// Exceptional set U*: contains U^{eps'}(T), one equal-size slice per class,
// each slice of size at most eps' * n. Padding picks the highest-backward-
// degree vertices first, ties broken by smallest id; the paper only asks for
// existence, so the policy is ours.
struct ExceptionalSet {
    std::array<std::vector<Vertex>, 4> per_class;
    bitset members;

    bool contains(Vertex v) const { return members.capacity() > 0 && members.test(v); }
    int slice_size() const { return int(per_class[0].size()); }

    std::vector<Vertex> all() const {
        std::vector<Vertex> v;
        for (const auto& c : per_class) v.insert(v.end(), c.begin(), c.end());
        std::sort(v.begin(), v.end());
        return v;
    }
};

inline ExceptionalSet exceptional_set(const Digraph& t, const QuadPartition& u, double eps_prime) {
    ThresholdSets core = gamma_sets(t, u, eps_prime);
    int n = u.class_size();
    double cap = eps_prime * n;
    std::size_t want = 0;
    for (int i = 0; i < 4; ++i) {
        require_hypothesis(le_threshold(int(core.per_class[i].size()), cap),
                           "exceptional_set: |U_" + std::to_string(i + 1) +
                               "^{eps'}| exceeds eps'*n, no valid exceptional set exists");
        want = std::max(want, core.per_class[i].size());
    }
    ExceptionalSet es;
    es.members = bitset(t.order());
    for (int i = 0; i < 4; ++i) {
        es.per_class[i] = core.per_class[i];
        std::vector<Vertex> pool;
        for (Vertex v : u.cls(i)) {
            bool in_core = false;
            for (Vertex w : core.per_class[i]) in_core |= (w == v);
            if (!in_core) pool.push_back(v);
        }
        std::sort(pool.begin(), pool.end(), [&](Vertex a, Vertex b) {
            int da = backward_out_deg(t, u, a), db = backward_out_deg(t, u, b);
            return da != db ? da > db : a < b;
        });
        for (Vertex v : pool) {
            if (es.per_class[i].size() >= want) break;
            es.per_class[i].push_back(v);
        }
        ensure(es.per_class[i].size() == want, "exceptional_set: padding fell short");
        std::sort(es.per_class[i].begin(), es.per_class[i].end());
        for (Vertex v : es.per_class[i]) es.members.set(v);
    }
    return es;
}

// The balancing backward subgraph H of an optimal partition, built after
// rotating U so that U3^{1-gamma} and U4^{1-gamma} are empty. The result
// satisfies, with respect to the rotated ordering:
//   (i)   max semidegree of H at most gamma * n,
//   (ii)  H misses U^{1-gamma}(T) entirely,
//   (iii) e_{H}(U_i, U_{i-1}) >= (1-2*gamma) * n * |U_{i-2}^{1-g} u U_{i-3}^{1-g}|.
// Each E_v takes the required number of lexicographically smallest eligible
// arcs; the construction only ever fixes their sizes.
struct OptimalHResult {
    ArcList edges;
    int rotation = 0;          // U was rotated by this much before building
    QuadPartition rotated_u;   // the ordering properties (i)-(iii) refer to
};

inline OptimalHResult build_optimal_H(const Digraph& t, const QuadPartition& u, double gamma) {
    require_arg(gamma > 0 && gamma <= 0.5, "build_optimal_H: gamma must lie in (0, 1/2]");
    int n = u.class_size();
    int rotation = -1;
    for (int k = 0; k < 4 && rotation < 0; ++k) {
        ThresholdSets hi = gamma_sets(t, u.rotated(k), 1 - gamma);
        if (hi.per_class[2].empty() && hi.per_class[3].empty()) rotation = k;
    }
    require_arg(rotation >= 0,
                "build_optimal_H: no rotation clears U3^{1-gamma} and U4^{1-gamma}; partition is not optimal");
    QuadPartition w = u.rotated(rotation);
    ThresholdSets hi = gamma_sets(t, w, 1 - gamma);
    ThresholdSets lo = gamma_sets(t, w, gamma);
    for (int i = 0; i < 2; ++i) {
        bool both_empty = hi.per_class[i].empty() && hi.per_class[i + 2].empty();
        require_arg(both_empty || lo.per_class[i + 2].empty(),
                    "build_optimal_H: gamma-optimality conclusion fails for class pair " +
                        std::to_string(i + 1) + "/" + std::to_string(i + 3) +
                        "; partition is not optimal");
    }

    bitset hi_mask(t.order());
    for (Vertex v : hi.all()) hi_mask.set(v);
    std::array<bitset, 4> hi_class_mask;
    for (int i = 0; i < 4; ++i) {
        hi_class_mask[i] = bitset(t.order());
        for (Vertex v : hi.per_class[i]) hi_class_mask[i].set(v);
    }

    ArcList edges;
    // E_v for v in U1 \ U^{1-g}: out-arcs into U4, |E_v| = |N^-(v) n U2^{1-g}|.
    auto take_out = [&](Vertex v, int target_class, int count) {
        bitset cand = t.out_nbrs(v);
        cand &= w.mask(target_class);
        int taken = 0;
        for (int x = cand.next(0); x >= 0 && taken < count; x = cand.next(x + 1), ++taken)
            edges.push_back({v, x});
        ensure(taken == count, "build_optimal_H: not enough eligible out-arcs at vertex " + std::to_string(v));
    };
    auto take_in = [&](Vertex v, int source_class, int count) {
        bitset cand = t.in_nbrs(v);
        cand &= w.mask(source_class);
        int taken = 0;
        for (int x = cand.next(0); x >= 0 && taken < count; x = cand.next(x + 1), ++taken)
            edges.push_back({x, v});
        ensure(taken == count, "build_optimal_H: not enough eligible in-arcs at vertex " + std::to_string(v));
    };

    for (Vertex v : w.cls(0))
        if (!hi_mask.test(v)) take_out(v, 3, t.in_nbrs(v).count_and(hi_class_mask[1]));
    for (Vertex v : w.cls(1))
        if (!hi_mask.test(v)) take_in(v, 2, t.out_nbrs(v).count_and(hi_class_mask[0]));

    bool hi1 = !hi.per_class[0].empty(), hi2 = !hi.per_class[1].empty();
    if (hi1 && hi2) {
        for (Vertex v : w.cls(3))
            for_each_bit(t.out_nbrs(v), [&](int x) {
                if (w.index_of(x) == 2) edges.push_back({v, Vertex(x)});
            });
    } else if (hi1 && !hi2) {
        for (Vertex v : w.cls(3))
            if (!hi_mask.test(v)) take_out(v, 2, t.in_nbrs(v).count_and(hi_class_mask[0]));
    } else if (!hi1 && hi2) {
        for (Vertex v : w.cls(2))
            if (!hi_mask.test(v)) take_in(v, 3, t.out_nbrs(v).count_and(hi_class_mask[1]));
    }

    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    // Re-verify (i)-(iii) by recount before returning.
    std::vector<int> outd(t.order(), 0), ind(t.order(), 0);
    std::array<long, 4> pair_count{0, 0, 0, 0};
    for (const Arc& a : edges) {
        ensure(w.is_backward(a), "build_optimal_H: non-backward arc selected");
        ++outd[a.from];
        ++ind[a.to];
        pair_count[w.index_of(a.to)] += 1;  // arc U_{i+1} -> U_i counts for pair i+1 downward
    }
    double cap = gamma * n;
    for (Vertex v = 0; v < t.order(); ++v) {
        ensure(le_threshold(std::max(outd[v], ind[v]), cap), "build_optimal_H: (i) semidegree bound fails");
        if (hi_mask.test(v)) ensure(outd[v] + ind[v] == 0, "build_optimal_H: (ii) high-degree vertex touched");
    }
    for (int i = 0; i < 4; ++i) {
        // pair i+1 downward is e_H(U_{i+1}, U_i); compare with classes i-1, i-2 (0-based i+3, i+2).
        long have = pair_count[i];
        std::size_t weight = hi.per_class[(i + 3) % 4].size() + hi.per_class[(i + 2) % 4].size();
        double need = snapped((1 - 2 * gamma) * n) * double(weight);
        ensure(double(have) >= need - 1e-9, "build_optimal_H: (iii) pair volume bound fails");
    }

    OptimalHResult res;
    res.edges = std::move(edges);
    res.rotation = rotation;
    res.rotated_u = w;
    return res;
}

}  // namespace bitour

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "bitour/digraph.hpp"

namespace bitour {

// A set of arcs with max in/out degree 1 and no directed cycle: vertex-disjoint
// directed paths. V+ are path starts, V- path ends, V0 internal vertices.
// Carried isolated vertices are representation-irrelevant; all predicates here
// work on the arc set alone.
class LinearForest {
public:
    LinearForest() = default;
    explicit LinearForest(ArcList arcs) : arcs_(std::move(arcs)) {
        std::sort(arcs_.begin(), arcs_.end());
        arcs_.erase(std::unique(arcs_.begin(), arcs_.end()), arcs_.end());
    }

    const ArcList& arcs() const { return arcs_; }
    std::size_t size() const { return arcs_.size(); }
    bool empty() const { return arcs_.empty(); }

    bool contains(const Arc& a) const { return std::binary_search(arcs_.begin(), arcs_.end(), a); }

    // Max in/out degree 1 and acyclic.
    bool valid() const {
        std::map<Vertex, Vertex> next;
        std::set<Vertex> has_in;
        for (const Arc& a : arcs_) {
            if (next.count(a.from) || has_in.count(a.to)) return false;
            next[a.from] = a.to;
            has_in.insert(a.to);
        }
        // cycle check: walk from every start-capable vertex, then ensure all arcs reached
        std::set<Vertex> seen;
        for (const auto& [u, v] : next) {
            if (has_in.count(u)) continue;
            Vertex w = u;
            while (next.count(w)) {
                if (!seen.insert(w).second) return false;
                w = next.at(w);
            }
        }
        return seen.size() == next.size();
    }

    std::vector<Vertex> starts() const {
        std::set<Vertex> has_in, out;
        for (const Arc& a : arcs_) has_in.insert(a.to);
        std::vector<Vertex> s;
        for (const Arc& a : arcs_)
            if (!has_in.count(a.from) && out.insert(a.from).second) s.push_back(a.from);
        std::sort(s.begin(), s.end());
        return s;
    }

    std::vector<Vertex> ends() const {
        std::set<Vertex> has_out, in;
        for (const Arc& a : arcs_) has_out.insert(a.from);
        std::vector<Vertex> e;
        for (const Arc& a : arcs_)
            if (!has_out.count(a.to) && in.insert(a.to).second) e.push_back(a.to);
        std::sort(e.begin(), e.end());
        return e;
    }

    std::vector<Vertex> internals() const {
        std::set<Vertex> has_in, has_out;
        for (const Arc& a : arcs_) {
            has_in.insert(a.to);
            has_out.insert(a.from);
        }
        std::vector<Vertex> m;
        for (Vertex v : has_in)
            if (has_out.count(v)) m.push_back(v);
        return m;
    }

    std::vector<Vertex> covered_vertices() const {
        std::set<Vertex> vs;
        for (const Arc& a : arcs_) {
            vs.insert(a.from);
            vs.insert(a.to);
        }
        return {vs.begin(), vs.end()};
    }

    int out_deg(Vertex v) const {
        int d = 0;
        for (const Arc& a : arcs_) d += (a.from == v);
        return d;
    }

    int in_deg(Vertex v) const {
        int d = 0;
        for (const Arc& a : arcs_) d += (a.to == v);
        return d;
    }

    // Maximal paths as vertex sequences, ordered by smallest start id.
    std::vector<std::vector<Vertex>> paths() const {
        std::map<Vertex, Vertex> next;
        std::set<Vertex> has_in;
        for (const Arc& a : arcs_) {
            next[a.from] = a.to;
            has_in.insert(a.to);
        }
        std::vector<std::vector<Vertex>> out;
        for (Vertex s : starts()) {
            std::vector<Vertex> p{s};
            Vertex w = s;
            while (next.count(w)) {
                w = next.at(w);
                p.push_back(w);
            }
            out.push_back(std::move(p));
        }
        return out;
    }

private:
    ArcList arcs_;
};

inline LinearForest forest_union(const LinearForest& a, const LinearForest& b) {
    ArcList arcs = a.arcs();
    arcs.insert(arcs.end(), b.arcs().begin(), b.arcs().end());
    return LinearForest(std::move(arcs));
}

inline bool arc_disjoint(const LinearForest& a, const LinearForest& b) {
    for (const Arc& x : a.arcs())
        if (b.contains(x)) return false;
    return true;
}

}  // namespace bitour

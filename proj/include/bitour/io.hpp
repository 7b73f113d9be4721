#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bitour/decompose.hpp"

namespace bitour {

using json = nlohmann::ordered_json;

// Plain-text instance format:
//   bitour <n_vertices> <n_classes>
//   class <vertex_id> <class_index>     one line per vertex, classes 1-based
//   <u> <v>                             one line per arc
// '#' starts a comment. Vertex ids are dense 0..N-1; duplicate arcs and
// loops are rejected.

inline std::string write_edge_list(const Digraph& d) {
    std::ostringstream out;
    out << "bitour " << d.order() << ' ' << std::max(d.num_classes(), 1) << '\n';
    for (Vertex v = 0; v < d.order(); ++v)
        out << "class " << v << ' ' << (d.num_classes() > 0 ? d.class_of(v) + 1 : 1) << '\n';
    ArcList arcs = d.arcs();
    std::sort(arcs.begin(), arcs.end());
    for (const Arc& a : arcs) out << a.from << ' ' << a.to << '\n';
    return out.str();
}

inline Digraph parse_edge_list(std::istream& in) {
    std::string line;
    int n = -1, k = -1;
    Digraph d;
    std::vector<bool> classed;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (first == "bitour") {
            require_arg(n < 0, "edge list: duplicate header");
            require_arg(bool(ls >> n >> k) && n >= 0 && k >= 1, "edge list: bad header");
            d = Digraph(n, k);
            classed.assign(n, false);
        } else if (first == "class") {
            require_arg(n >= 0, "edge list: class line before header");
            int v, c;
            require_arg(bool(ls >> v >> c), "edge list: bad class line");
            require_arg(v >= 0 && v < n, "edge list: vertex id out of range");
            require_arg(c >= 1 && c <= k, "edge list: class index out of range");
            require_arg(!classed[v], "edge list: vertex classed twice");
            classed[v] = true;
            d.set_class(v, c - 1);
        } else {
            require_arg(n >= 0, "edge list: arc line before header");
            int u = -1, v = -1;
            std::istringstream as(line);
            require_arg(bool(as >> u >> v), "edge list: bad arc line");
            require_arg(u >= 0 && u < n && v >= 0 && v < n, "edge list: arc endpoint out of range");
            require_arg(u != v, "edge list: loop rejected");
            require_arg(!d.has_arc(u, v), "edge list: duplicate arc rejected");
            d.add_arc(u, v);
        }
    }
    require_arg(n >= 0, "edge list: missing header");
    for (int v = 0; v < n; ++v) require_arg(classed[v], "edge list: unclassed vertex");
    return d;
}

inline Digraph load_instance(const std::string& path) {
    std::ifstream in(path);
    require_arg(bool(in), "cannot open instance file: " + path);
    return parse_edge_list(in);
}

// Stable 64-bit FNV-1a over the canonical edge-list text.
inline std::uint64_t instance_hash(const Digraph& d) {
    std::string text = write_edge_list(d);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline json arcs_to_json(const ArcList& arcs) {
    json a = json::array();
    ArcList sorted = arcs;
    std::sort(sorted.begin(), sorted.end());
    for (const Arc& arc : sorted) a.push_back(json::array({arc.from, arc.to}));
    return a;
}

inline ArcList arcs_from_json(const json& a) {
    ArcList out;
    for (const auto& e : a) out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    return out;
}

inline json params_to_json(const Params& p) {
    return json{{"eps", p.eps},         {"eps_prime", p.eps_prime}, {"gamma", p.gamma},
                {"nu", p.nu},           {"nu_prime", p.nu_prime},   {"tau", p.tau}};
}

inline json partition_to_json(const QuadPartition& u) {
    json classes = json::array();
    for (int i = 0; i < 4; ++i) {
        std::vector<Vertex> c = u.cls(i);
        std::sort(c.begin(), c.end());
        classes.push_back(c);
    }
    return classes;
}

inline json certificate_to_json(const ExpansionCertificate& cert) {
    json j;
    j["kind"] = cert.kind == ExpansionCertificate::Kind::expander ? "expander" : "close";
    j["nu"] = cert.nu;
    j["tau"] = cert.tau;
    j["exhaustive"] = cert.exhaustive;
    if (cert.kind == ExpansionCertificate::Kind::close) {
        j["witness"] = cert.witness;
        j["partition"] = partition_to_json(cert.partition);
        j["backward_count"] = cert.backward_count;
    }
    return j;
}

}  // namespace bitour

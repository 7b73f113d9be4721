#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bitour/io.hpp"

namespace bitour {

// Exit-code contract: 0 success, 1 verification failed, 2 usage/parse error,
// 3 lemma hypothesis unmet / infeasible / size-limited, 4 internal invariant
// violation (a bug).
enum ExitCode { exit_ok = 0, exit_verify_failed = 1, exit_usage = 2, exit_infeasible = 3, exit_bug = 4 };

struct RunConfig {
    Params params;
    std::uint64_t seed = 1;
    int jobs = 1;
    int cap = 32;
    int fallback_cap = 16;
    std::string mode = "auto";  // partition search: auto | exact | local
};

inline int cmd_gen(const std::string& kind, int n, int flips, std::uint64_t seed,
                   const std::string& out_path) {
    Digraph d;
    if (kind == "blowup") {
        d = make_blowup_cycle(4, n);
    } else if (kind == "flipped") {
        Digraph base = make_blowup_cycle(4, n);
        Vertex u1 = 0, u2 = n, u3 = 2 * n, u4 = 3 * n;
        d = flip_edges(base, {{u1, u2}, {u2, u3}, {u3, u4}, {u4, u1}});
    } else if (kind == "random") {
        d = random_regular_bitournament(n, flips, seed);
    } else if (kind == "tripartite") {
        d = tripartite_counterexample(n);
    } else {
        throw invalid_argument("gen: unknown kind '" + kind + "'");
    }
    std::ofstream out(out_path);
    require_arg(bool(out), "gen: cannot open output file " + out_path);
    out << write_edge_list(d);
    return exit_ok;
}

namespace detail {

inline std::vector<int> sides_of_instance(const Digraph& d) {
    require_arg(d.num_classes() == 2 || d.num_classes() == 4,
                "instance must carry 2 or 4 vertex classes to define a bipartition");
    std::vector<int> side(d.order());
    for (Vertex v = 0; v < d.order(); ++v) side[v] = d.class_of(v) % 2;
    return side;
}

inline QuadPartition partition_for(const Digraph& d, const RunConfig& cfg) {
    std::vector<int> side = sides_of_instance(d);
    PartitionMode mode;
    int half = int(std::count(side.begin(), side.end(), 0));
    if (cfg.mode == "exact")
        mode = PartitionMode::exact;
    else if (cfg.mode == "local")
        mode = PartitionMode::local;
    else
        mode = half <= 12 ? PartitionMode::exact : PartitionMode::local;
    return optimal_partition(d, side, mode);
}

}  // namespace detail

// Runs one task on one instance and returns the report object. Throws the
// library's typed errors; the caller maps them to exit codes.
inline json run_task(const std::string& task, const Digraph& instance, const RunConfig& cfg,
                     const json* prior_report, int* exit_code) {
    json rep;
    rep["instance_hash"] = instance_hash(instance);
    rep["params"] = params_to_json(cfg.params);
    rep["seed"] = cfg.seed;
    rep["task"] = task;
    *exit_code = exit_ok;

    if (task == "partition") {
        QuadPartition u = detail::partition_for(instance, cfg);
        rep["partition"] = partition_to_json(u);
        json stats;
        stats["backward_total"] = total_backward(instance, u);
        json pairs = json::array();
        for (int i = 0; i < 4; ++i) pairs.push_back(backward_pair_count(instance, u, (i + 3) % 4));
        stats["backward_pairs"] = pairs;
        BalanceReport b = check_regular_balance(instance, u);
        stats["balanced"] = b.ok;
        if (!b.ok) stats["violation"] = b.violation;
        rep["diagnostics"] = stats;
        return rep;
    }
    if (task == "classify") {
        std::vector<int> side = detail::sides_of_instance(instance);
        ExpansionCertificate cert = classify_two_cases(instance, side, cfg.params.nu_prime, cfg.params.tau);
        rep["certificate"] = certificate_to_json(cert);
        return rep;
    }
    if (task == "systems") {
        QuadPartition u = detail::partition_for(instance, cfg);
        ExceptionalSet es = exceptional_set(instance, u, cfg.params.eps_prime);
        FeasibilityContext ctx(instance, u, es, cfg.params.gamma);
        std::vector<System> systems = decompose_backward_and_exceptional(ctx);
        rep["partition"] = partition_to_json(u);
        rep["exceptional"] = es.all();
        json sys = json::array();
        for (const System& s : systems) sys.push_back(arcs_to_json(s));
        rep["systems"] = sys;
        return rep;
    }
    if (task == "decompose") {
        DecomposeOptions opt;
        opt.params = cfg.params;
        opt.seed = cfg.seed;
        opt.cap = cfg.cap;
        opt.fallback_cap = cfg.fallback_cap;
        std::vector<int> side = detail::sides_of_instance(instance);
        DecompositionReport dr = decompose_tournament(instance, side, opt);
        rep["status"] = dr.status == DecompositionReport::Status::complete     ? "complete"
                        : dr.status == DecompositionReport::Status::partial    ? "partial"
                                                                               : "infeasible";
        rep["branch"] = dr.branch;
        json cyc = json::array();
        for (const ArcList& c : dr.cycles) cyc.push_back(arcs_to_json(c));
        rep["cycles"] = cyc;
        json diag;
        diag["notes"] = dr.notes;
        if (!dr.balance.empty()) {
            json bal = json::array();
            for (const auto& b : dr.balance) bal.push_back(b);
            diag["balance"] = bal;
            diag["ell"] = dr.ell;
        }
        if (!dr.residual.empty()) diag["residual"] = arcs_to_json(dr.residual);
        rep["diagnostics"] = diag;
        if (dr.status != DecompositionReport::Status::complete) *exit_code = exit_infeasible;
        return rep;
    }
    if (task == "verify") {
        require_arg(prior_report != nullptr, "verify: needs a prior report (--report)");
        const json& prior = *prior_report;
        std::vector<std::string> violations;
        if (prior.contains("instance_hash") &&
            prior["instance_hash"].get<std::uint64_t>() != instance_hash(instance))
            violations.push_back("instance hash mismatch");
        std::vector<ArcList> cycles;
        if (prior.contains("cycles"))
            for (const auto& c : prior["cycles"]) cycles.push_back(arcs_from_json(c));
        if (!cycles.empty()) {
            QuadPartition u;
            const QuadPartition* up = nullptr;
            if (instance.num_classes() == 4) {
                u = QuadPartition::native(instance);
                up = &u;
            }
            VerifyReport v = verify_decomposition(instance, cycles, up);
            violations.insert(violations.end(), v.violations.begin(), v.violations.end());
        }
        if (prior.contains("systems")) {
            QuadPartition u = detail::partition_for(instance, cfg);
            if (prior.contains("partition")) {
                std::array<std::vector<Vertex>, 4> cls;
                for (int i = 0; i < 4; ++i)
                    cls[i] = prior["partition"][i].get<std::vector<Vertex>>();
                u = QuadPartition(instance.order(), cls);
            }
            ExceptionalSet es = exceptional_set(instance, u, cfg.params.eps_prime);
            FeasibilityContext ctx(instance, u, es, cfg.params.gamma);
            std::set<Arc> seen;
            for (const auto& sj : prior["systems"]) {
                System s = canonical(arcs_from_json(sj));
                FeasibilityCheck c = check_feasible(s, ctx);
                if (!c.ok) violations.push_back("system not feasible: " + c.violation);
                for (const Arc& a : s)
                    if (!seen.insert(a).second)
                        violations.push_back("systems share arc (" + std::to_string(a.from) + "," +
                                             std::to_string(a.to) + ")");
            }
        }
        rep["verdict"] = violations.empty() ? "pass" : "fail";
        rep["violations"] = violations;
        if (!violations.empty()) *exit_code = exit_verify_failed;
        return rep;
    }
    throw invalid_argument("run: unknown task '" + task + "'");
}

inline int cmd_run(const std::string& task, const std::vector<std::string>& inputs,
                   const std::string& out_path, const RunConfig& cfg,
                   const std::string& report_path = "") {
    require_arg(!inputs.empty(), "run: no input file");
    json prior;
    bool have_prior = false;
    if (!report_path.empty()) {
        std::ifstream in(report_path);
        require_arg(bool(in), "run: cannot open report " + report_path);
        in >> prior;
        have_prior = true;
    }

    auto run_one = [&](const std::string& in_path, const std::string& path_out) {
        Digraph instance = load_instance(in_path);
        int code = exit_ok;
        json rep = run_task(task, instance, cfg, have_prior ? &prior : nullptr, &code);
        std::ofstream out(path_out);
        require_arg(bool(out), "run: cannot open output file " + path_out);
        out << rep.dump(2) << '\n';
        return code;
    };

    if (inputs.size() == 1) return run_one(inputs[0], out_path);

    // Several instances: out_path is a directory, one report per input.
    std::filesystem::create_directories(out_path);
    std::vector<int> codes(inputs.size(), exit_ok);
    int jobs = std::max(1, cfg.jobs);
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            while (true) {
                std::size_t mine;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= inputs.size()) return;
                    mine = next++;
                }
                std::filesystem::path p(inputs[mine]);
                std::string out_file = (std::filesystem::path(out_path) / p.stem()).string() + ".json";
                codes[mine] = run_one(inputs[mine], out_file);
            }
        });
    for (auto& th : pool) th.join();
    int worst = exit_ok;
    for (int c : codes) worst = std::max(worst, c);
    return worst;
}

}  // namespace bitour

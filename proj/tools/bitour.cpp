#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bitour/cli.hpp"

using namespace bitour;

int main(int argc, char** argv) {
    CLI::App app{"bitour: regular bipartite tournament decomposition toolkit"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate an instance file");
    std::string kind = "blowup", gen_out;
    int gen_n = 2, gen_flips = 0;
    std::uint64_t gen_seed = 1;
    gen->add_option("--kind", kind, "blowup | flipped | random | tripartite")->required();
    gen->add_option("--n", gen_n, "class size")->required();
    gen->add_option("--flips", gen_flips, "random 4-cycle reversals (kind=random)");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output path")->required();

    // run
    auto* run = app.add_subcommand("run", "run a task on an instance");
    std::string task, run_out, report_path, mode = "auto";
    std::vector<std::string> run_in;
    RunConfig cfg;
    run->add_option("--task", task, "partition | classify | systems | decompose | verify")->required();
    run->add_option("--in", run_in, "instance file(s)")->required();
    run->add_option("--out", run_out, "report path (directory when several inputs)")->required();
    run->add_option("--report", report_path, "prior report (task=verify)");
    run->add_option("--eps", cfg.params.eps, "closeness parameter");
    run->add_option("--eps-prime", cfg.params.eps_prime, "exceptional-set parameter");
    run->add_option("--gamma", cfg.params.gamma, "backward-degree threshold");
    run->add_option("--nu", cfg.params.nu, "expansion parameter");
    run->add_option("--nu-prime", cfg.params.nu_prime, "classifier expansion parameter");
    run->add_option("--tau", cfg.params.tau, "expansion subset range");
    run->add_option("--seed", cfg.seed, "search seed");
    run->add_option("--jobs", cfg.jobs, "parallel instances");
    run->add_option("--cap", cfg.cap, "decomposition size cap (vertices)");
    run->add_option("--fallback-cap", cfg.fallback_cap, "whole-instance search cap (vertices)");
    run->add_option("--mode", cfg.mode, "partition search: auto | exact | local");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (gen->parsed()) return cmd_gen(kind, gen_n, gen_flips, gen_seed, gen_out);
        cfg.params.validate();
        return cmd_run(task, run_in, run_out, cfg, report_path);
    } catch (const invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const hypothesis_unmet& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return exit_infeasible;
    } catch (const size_limit& e) {
        std::cerr << "size limit: " << e.what() << '\n';
        return exit_infeasible;
    } catch (const invariant_violation& e) {
        std::cerr << "internal invariant violation: " << e.what() << '\n';
        return exit_bug;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_bug;
    }
}

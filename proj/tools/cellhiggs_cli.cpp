#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cellhiggs/pipeline.hpp"

int main(int argc, char** argv)
{
    cellhiggs::RunConfig cfg;
    CLI::App app{"Harmonic maps, Higgs pairs and holonomy on triangulated 2-complexes"};
    app.set_help_flag("-h,--help", "Print this help and exit");

    std::string commands;
    for (const auto& c : cellhiggs::command_names())
        commands += (commands.empty() ? "" : ", ") + c;
    app.add_option("command", cfg.command, "One of: " + commands)->required();
    app.add_option("name", cfg.fixture, "Fixture name (fixture command only)");

    app.add_option("--complex", cfg.complex_path, "Complex file");
    app.add_option("--rep", cfg.rep_path, "Representation file");
    app.add_option("--refine", cfg.refine, "Refinement level k (0..5)")->capture_default_str();
    app.add_option("--max-sweeps", cfg.solver.max_sweeps, "Solver sweep limit")->capture_default_str();
    app.add_option("--tol", cfg.solver.tol, "Solver stopping tolerance")->capture_default_str();
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Random initialization seed (default: deterministic start)");
    app.add_option("--delta", cfg.deltas, "Weights for the norms, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    app.add_option("--steps-per-edge", cfg.steps_per_edge, "RK4 steps per refined edge")->capture_default_str();
    app.add_option("--maxlen", cfg.maxlen, "Longest word in trace fingerprints")->capture_default_str();
    app.add_option("--transport", cfg.transport, "ode, ode_vertex or combinatorial")->capture_default_str();
    app.add_option("--out", cfg.out_dir, "Output directory (default: report on stdout)");
    app.add_option("--threads", cfg.threads, "Worker threads for holonomy and fingerprints")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << cellhiggs::error_record(cfg, cellhiggs::ErrorKind::Config, e.what());
        return static_cast<int>(cellhiggs::ErrorKind::Config);
    }
    if (*seed_opt)
        cfg.solver.seed = seed;
    return cellhiggs::run(cfg);
}

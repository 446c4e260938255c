#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfuse/cli.hpp"
#include "mfuse/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Fuse external summary estimates with internal M-estimates"};
    app.require_subcommand(1);

    std::string config;
    std::optional<int> replicates;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out_dir;

    auto* fit = app.add_subcommand("fit", "Fit one model and write its summary file");
    auto* fuse = app.add_subcommand("fuse", "Conditional and James-Stein estimates");
    auto* boot = app.add_subcommand("bootstrap-ci", "Multiplier bootstrap percentile intervals");
    auto* sim = app.add_subcommand("simulate", "Run a simulation scenario");
    for (auto* sub : {fit, fuse, boot, sim}) {
        sub->add_option("--config", config, "YAML run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--threads", threads, "Worker threads");
    }
    boot->add_option("--replicates", replicates, "Bootstrap replicates");
    boot->add_option("--seed", seed, "Base seed");
    sim->add_option("--out", out_dir, "Output directory");
    sim->add_option("--seed", seed, "Base seed");

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        mfuse::RunConfig cfg = mfuse::load_config(config, command);
        if (replicates) cfg.bootstrap.replicates = *replicates;
        if (seed) cfg.bootstrap.base_seed = cfg.scenario.base_seed = *seed;
        if (threads) cfg.bootstrap.threads = cfg.scenario.threads = *threads;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        cfg.bootstrap.validate();
        if (command == "simulate") cfg.scenario.validate();
        mfuse::run(cfg);
    } catch (const mfuse::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "Error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

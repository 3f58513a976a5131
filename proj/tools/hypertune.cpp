#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hypertune/cli.hpp"

namespace {

void add_override_flags(CLI::App* cmd, hypertune::CliOverrides& overrides) {
    cmd->add_option("--seed-override", overrides.seed,
                    "Run only this seed, ignoring the config's seed list");
    cmd->add_option("--workers", overrides.workers, "Override worker count");
    cmd->add_option("--budget-seconds", overrides.budget_s, "Override the time budget");
    cmd->add_option("--out", overrides.out_dir, "Override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hypertune: asynchronous multi-fidelity hyper-parameter tuning"};
    app.require_subcommand(1);

    std::string run_config;
    hypertune::CliOverrides run_overrides;
    auto* run = app.add_subcommand("run", "Run the tuner for every seed in a config");
    run->add_option("config", run_config, "Experiment config (JSON)")->required();
    add_override_flags(run, run_overrides);

    std::string compare_config;
    std::vector<std::string> compare_variants;
    hypertune::CliOverrides compare_overrides;
    auto* compare =
        app.add_subcommand("compare", "Run several scheduler variants on one objective");
    compare->add_option("config", compare_config, "Experiment config (JSON)")->required();
    compare->add_option("variants", compare_variants, "Scheduler variants to compare")
        ->required();
    add_override_flags(compare, compare_overrides);

    std::string replay_path;
    auto* replay = app.add_subcommand("replay", "Validate a trajectory file and print stats");
    replay->add_option("trajectory", replay_path, "Trajectory JSONL file")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return hypertune::cmd_run(run_config, run_overrides);
    if (compare->parsed()) return hypertune::cmd_compare(compare_config, compare_variants,
                                                         compare_overrides);
    return hypertune::cmd_replay(replay_path);
}

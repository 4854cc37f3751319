// Experiment runner: single runs, weight-init Monte Carlo studies, policy
// comparisons and partition inspection, all driven by a flat key=value config.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bacsa/experiment.hpp"

namespace {

using bacsa::experiment::ConfigError;
using bacsa::experiment::ExperimentConfig;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string seed;
    std::vector<std::string> policies;
    std::string rounds;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Config file (flat key=value lines)");
    cmd->add_option("--out", flags.out_dir, "Output directory");
    cmd->add_option("--seed", flags.seed, "Run seed (replaces any config seed list)");
    cmd->add_option("--policy", flags.policies, "Selection policy (repeatable for compare)");
    cmd->add_option("--rounds", flags.rounds, "Communication rounds");
}

ExperimentConfig resolve(const CommonFlags& flags) {
    ExperimentConfig cfg = flags.config_path.empty()
                               ? bacsa::experiment::default_config()
                               : bacsa::experiment::parse_config_file(flags.config_path);
    if (!flags.out_dir.empty()) set_key(cfg, "out", flags.out_dir);
    if (!flags.seed.empty()) {
        set_key(cfg, "seed", flags.seed);
        cfg.seeds.clear();
    }
    if (flags.policies.size() == 1) {
        set_key(cfg, "policy", flags.policies.front());
        cfg.policies.clear();
    } else if (flags.policies.size() > 1) {
        std::string joined;
        for (const auto& p : flags.policies) joined += (joined.empty() ? "" : ",") + p;
        set_key(cfg, "policies", joined);
    }
    if (!flags.rounds.empty()) set_key(cfg, "rounds", flags.rounds);
    bacsa::experiment::validate(cfg);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bias-aware client selection experiments for federated learning"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    CommonFlags mc_flags;
    CommonFlags cmp_flags;
    CommonFlags stats_flags;

    CLI::App* run_cmd = app.add_subcommand("run", "Run one federated experiment");
    add_common(run_cmd, run_flags);
    CLI::App* mc_cmd =
        app.add_subcommand("montecarlo", "Weight-init estimation-error study (mc.csv)");
    add_common(mc_cmd, mc_flags);
    CLI::App* cmp_cmd =
        app.add_subcommand("compare", "Run several policies and seeds (comparison.csv)");
    add_common(cmp_cmd, cmp_flags);
    CLI::App* stats_cmd =
        app.add_subcommand("partition-stats", "Write the per-client class composition");
    add_common(stats_cmd, stats_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run_cmd->parsed()) {
            bacsa::experiment::run_experiment(resolve(run_flags));
        } else if (mc_cmd->parsed()) {
            bacsa::experiment::run_montecarlo_init(resolve(mc_flags));
        } else if (cmp_cmd->parsed()) {
            bacsa::experiment::compare_policies(resolve(cmp_flags));
        } else if (stats_cmd->parsed()) {
            bacsa::experiment::partition_stats(resolve(stats_flags));
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}

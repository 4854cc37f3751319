#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bacsa/data.hpp"
#include "bacsa/engine.hpp"

namespace bacsa::experiment {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetSpec {
    enum class Source { synthetic, idx };
    Source source = Source::synthetic;
    int classes = 10;
    int per_class = 500;
    int test_per_class = 200;
    int feature_dim = 32;
    double spread = 10.0;
    std::uint64_t seed = 7;
    std::string idx_images;
    std::string idx_labels;
    std::string idx_test_images;
    std::string idx_test_labels;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    data::PartitionSpec partition;
    engine::FLConfig fl;
    double snr_lo_db = 5.0;
    double snr_hi_db = 20.0;
    std::uint64_t channel_seed = 40;
    std::string out_dir = "out";
    int mc_runs = 0;                        // Monte Carlo repetitions (montecarlo command)
    std::vector<std::uint64_t> seeds;       // empty means {fl.seed}
    std::vector<engine::Policy> policies;   // empty means {fl.policy}
};

ExperimentConfig default_config();

// Flat key=value text; '#' starts a comment, unknown keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string serialize_config(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

// Everything one seeded run needs. Dataset is shared across seeds; partition
// and channel derive from the run seed so repeats are independent but replayable.
struct RunInputs {
    data::LabeledDataset train;
    data::LabeledDataset test;
    data::ClientPartition partition;
    engine::ChannelModel channel;
};
RunInputs make_run_inputs(const ExperimentConfig& cfg, std::uint64_t run_seed);

// Writes rounds.csv, counts.csv, profile.csv and summary.json under out_dir.
void run_experiment(const ExperimentConfig& cfg);

// Writes mc.csv: paired estimation-error runs for both weight initializations.
void run_montecarlo_init(const ExperimentConfig& cfg);

// Writes comparison.csv: one row per (policy, seed) plus a mean row per policy.
void compare_policies(const ExperimentConfig& cfg);

// Writes partition.csv: per-client class composition.
void partition_stats(const ExperimentConfig& cfg);

struct AccuracyStat {
    double mean = 0.0;
    double stddev = 0.0;
};

struct Summary {
    int schema_version = 0;
    std::string policy;
    std::vector<std::uint64_t> seeds;
    AccuracyStat final_accuracy;
    AccuracyStat best_accuracy;
};

// Rejects files whose schema_version this reader does not know.
Summary load_summary(const std::string& path);

// Worker count for comparison jobs; BACSA_THREADS overrides.
int thread_count();

// Locale-independent shortest-round-trip style formatting shared by all writers.
std::string fmt(double v);

} // namespace bacsa::experiment

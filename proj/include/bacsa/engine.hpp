#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bacsa/bias.hpp"
#include "bacsa/data.hpp"
#include "bacsa/matrix.hpp"
#include "bacsa/nn.hpp"
#include "bacsa/selection.hpp"

namespace bacsa::engine {

enum class Policy { random, all_clients, greedy_balance, bacsa, bacsa_fs, bacsa_snr };

enum class InitScheme { bacsa, glorot };

Policy policy_from_string(const std::string& name);
std::string policy_name(Policy policy);

struct FLConfig {
    int clients = 20;
    int n_select = 5;
    int rounds = 150;
    Policy policy = Policy::bacsa;
    nn::TrainConfig train;
    std::vector<int> hidden = {32};
    InitScheme init = InitScheme::bacsa;
    int fixed_sample_size = 0;  // N0 for bacsa_fs; 0 means min client size
    double gamma = 0.05;
    double theta = 1.0;
    int profile_refresh = 0;  // rounds between re-profiling; 0 keeps warm-up frozen
    std::uint64_t seed = 1;
};

struct ChannelModel {
    std::vector<double> snr_linear;  // static per-client SNR, > 0
};

// Per-client SNR uniform in dB over [lo_db, hi_db], stored linear.
ChannelModel assign_snr(int clients, double lo_db, double hi_db, std::uint64_t seed);

struct RoundReport {
    int round = 0;
    std::vector<int> chosen;
    double objective = 0.0;
    double accuracy = 0.0;
    double mean_train_loss = 0.0;
    std::vector<int> selection_counts;  // snapshot after the round
    std::vector<int> train_sizes;       // per chosen client
};

struct RunResult {
    std::vector<RoundReport> rounds;
    nn::NetworkParams model;
    bias::BiasProfile profile;
};

// One profiling pass: every client trains from the same starting model and
// only the returned weights are inspected; the global model is not advanced.
bias::BiasProfile warmup(const nn::NetworkParams& global, const data::LabeledDataset& ds,
                         const data::ClientPartition& partition, const nn::TrainConfig& train,
                         std::uint64_t seed);

// Parameter-wise weighted mean.
nn::NetworkParams aggregate(const std::vector<nn::NetworkParams>& models,
                            const std::vector<double>& weights);

std::pair<nn::NetworkParams, RoundReport> run_round(
    const nn::NetworkParams& global, const data::LabeledDataset& train_ds,
    const data::ClientPartition& partition, const data::LabeledDataset& test_ds,
    const bias::BiasProfile& profile, selection::SelectionState& state, const FLConfig& cfg,
    int round_index);

RunResult run(const FLConfig& cfg, const data::LabeledDataset& train_ds,
              const data::ClientPartition& partition, const data::LabeledDataset& test_ds,
              const ChannelModel& channel);

} // namespace bacsa::engine

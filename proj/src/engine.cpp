#include "bacsa/engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace bacsa::engine {

namespace {

// Stream tags keeping the engine's RNG draws independent of each other.
constexpr std::uint64_t kWarmupTag = 0x01;
constexpr std::uint64_t kRoundTag = 0x02;
constexpr std::uint64_t kPickTag = 0x03;
constexpr std::uint64_t kSubsampleTag = 0x04;

nn::NetworkParams init_global(const FLConfig& cfg, int input_dim, int num_classes) {
    const auto spec = nn::make_layer_specs(input_dim, cfg.hidden, num_classes);
    return cfg.init == InitScheme::bacsa ? nn::init_bacsa(spec, cfg.seed)
                                         : nn::init_glorot(spec, cfg.seed);
}

bool uses_snr(Policy policy) { return policy == Policy::bacsa_snr; }

bool uses_fixed_samples(Policy policy) { return policy == Policy::bacsa_fs; }

selection::SelectionResult pick_clients(const bias::BiasProfile& profile,
                                        selection::SelectionState& state,
                                        const FLConfig& cfg, int round_index) {
    switch (cfg.policy) {
        case Policy::random:
            return selection::select_random(cfg.clients, cfg.n_select,
                                            mix_seed(cfg.seed, kPickTag, round_index));
        case Policy::all_clients: {
            selection::SelectionResult all;
            all.chosen.resize(cfg.clients);
            for (int k = 0; k < cfg.clients; ++k) all.chosen[k] = k;
            return all;
        }
        case Policy::greedy_balance:
            return selection::select_greedy_balance(profile.beta, cfg.n_select);
        case Policy::bacsa:
        case Policy::bacsa_fs:
        case Policy::bacsa_snr:
            if (selection::subset_count(cfg.clients, cfg.n_select) <= 1000000)
                return selection::select_exhaustive(profile.beta, state);
            return selection::select_greedy_swap(profile.beta, state);
    }
    throw std::invalid_argument("pick_clients: unknown policy");
}

} // namespace

Policy policy_from_string(const std::string& name) {
    if (name == "random") return Policy::random;
    if (name == "all_clients") return Policy::all_clients;
    if (name == "greedy_balance") return Policy::greedy_balance;
    if (name == "bacsa") return Policy::bacsa;
    if (name == "bacsa_fs") return Policy::bacsa_fs;
    if (name == "bacsa_snr") return Policy::bacsa_snr;
    throw std::invalid_argument("unknown policy: " + name);
}

std::string policy_name(Policy policy) {
    switch (policy) {
        case Policy::random: return "random";
        case Policy::all_clients: return "all_clients";
        case Policy::greedy_balance: return "greedy_balance";
        case Policy::bacsa: return "bacsa";
        case Policy::bacsa_fs: return "bacsa_fs";
        case Policy::bacsa_snr: return "bacsa_snr";
    }
    return "unknown";
}

ChannelModel assign_snr(int clients, double lo_db, double hi_db, std::uint64_t seed) {
    if (clients < 1) throw std::invalid_argument("assign_snr: clients must be >= 1");
    if (lo_db > hi_db) throw std::invalid_argument("assign_snr: lo_db > hi_db");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(lo_db, hi_db);
    ChannelModel channel;
    channel.snr_linear.resize(clients);
    for (double& s : channel.snr_linear) {
        const double db = lo_db == hi_db ? lo_db : uni(rng);
        s = std::pow(10.0, db / 10.0);
    }
    return channel;
}

bias::BiasProfile warmup(const nn::NetworkParams& global, const data::LabeledDataset& ds,
                         const data::ClientPartition& partition, const nn::TrainConfig& train,
                         std::uint64_t seed) {
    const int clients = partition.clients();
    const int classes = ds.num_classes;

    bias::BiasProfile profile;
    profile.beta = Matrix(classes, clients);
    profile.energy = Matrix(classes, clients);
    profile.present.resize(clients);

    std::vector<std::vector<double>> energies(clients);
    for (int k = 0; k < clients; ++k) {
        const auto& idx = partition.client_indices[k];
        if (idx.empty()) throw std::runtime_error("warmup: client " + std::to_string(k) +
                                                  " has no data");
        data::LabeledDataset local = data::extract(ds, idx);
        nn::NetworkParams trained;
        try {
            trained = nn::train_local(global, local.features, local.labels, train,
                                      mix_seed(seed, kWarmupTag, k));
        } catch (const std::exception& e) {
            throw std::runtime_error("warmup: client " + std::to_string(k) +
                                     " failed to train: " + e.what());
        }
        energies[k] = bias::class_energy(trained);
        const auto p_hat = bias::proportions_from_energy(energies[k]);
        for (int i = 0; i < classes; ++i) {
            profile.beta(i, k) = p_hat[i];
            profile.energy(i, k) = energies[k][i];
        }
        profile.present[k] = bias::sign_profile(trained);
    }
    profile.global_beta = bias::estimate_global_beta(energies);
    return profile;
}

nn::NetworkParams aggregate(const std::vector<nn::NetworkParams>& models,
                            const std::vector<double>& weights) {
    if (models.empty()) throw std::invalid_argument("aggregate: no models");
    if (models.size() != weights.size())
        throw std::invalid_argument("aggregate: weight count mismatch");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0) throw std::invalid_argument("aggregate: negative weight");
        total += w;
    }
    if (total <= 0) throw std::invalid_argument("aggregate: zero weight sum");

    nn::NetworkParams out = models.front();
    for (auto& layer : out.layers) {
        std::fill(layer.weights.data().begin(), layer.weights.data().end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    for (std::size_t m = 0; m < models.size(); ++m) {
        const double w = weights[m] / total;
        if (models[m].layers.size() != out.layers.size())
            throw std::invalid_argument("aggregate: model shape mismatch");
        for (std::size_t li = 0; li < out.layers.size(); ++li) {
            const auto& src = models[m].layers[li];
            auto& dst = out.layers[li];
            if (!dst.weights.same_shape(src.weights) || dst.bias.size() != src.bias.size())
                throw std::invalid_argument("aggregate: model shape mismatch");
            for (std::size_t i = 0; i < dst.weights.data().size(); ++i)
                dst.weights.data()[i] += w * src.weights.data()[i];
            for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += w * src.bias[i];
        }
    }
    for (const auto& layer : out.layers) {
        for (const double v : layer.weights.data())
            if (!std::isfinite(v)) throw std::runtime_error("aggregate: non-finite weight");
        for (const double v : layer.bias)
            if (!std::isfinite(v)) throw std::runtime_error("aggregate: non-finite bias");
    }
    return out;
}

std::pair<nn::NetworkParams, RoundReport> run_round(
    const nn::NetworkParams& global, const data::LabeledDataset& train_ds,
    const data::ClientPartition& partition, const data::LabeledDataset& test_ds,
    const bias::BiasProfile& profile, selection::SelectionState& state,
    const FLConfig& cfg, int round_index) {
    const auto picked = pick_clients(profile, state, cfg, round_index);
    // Every policy's pick is scored under the live state.
    const double chosen_objective = selection::objective(picked.chosen, profile.beta, state);

    int n0 = cfg.fixed_sample_size;
    if (uses_fixed_samples(cfg.policy) && n0 <= 0) {
        n0 = partition.client_size(0);
        for (int k = 1; k < partition.clients(); ++k)
            n0 = std::min(n0, partition.client_size(k));
    }

    std::vector<nn::NetworkParams> models;
    std::vector<double> weights;
    std::vector<int> train_sizes;
    double loss_sum = 0.0;
    for (int k : picked.chosen) {
        data::LabeledDataset local = data::extract(train_ds, partition.client_indices[k]);
        if (uses_fixed_samples(cfg.policy))
            local = data::subsample_fixed(local, n0,
                                          mix_seed(cfg.seed, kSubsampleTag,
                                                   std::uint64_t(round_index) * 1024 + k));
        nn::NetworkParams trained;
        try {
            trained = nn::train_local(global, local.features, local.labels, cfg.train,
                                      mix_seed(cfg.seed, kRoundTag,
                                               std::uint64_t(round_index) * 1024 + k));
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(round_index) + ": client " +
                                     std::to_string(k) + " failed to train: " + e.what());
        }
        loss_sum += nn::loss_nll(nn::forward(trained, local.features), local.labels);
        train_sizes.push_back(local.size());
        // Fixed-budget mode drops the size weighting entirely.
        weights.push_back(uses_fixed_samples(cfg.policy) ? 1.0 : double(local.size()));
        models.push_back(std::move(trained));
    }

    nn::NetworkParams next = aggregate(models, weights);
    selection::record_selection(state, picked.chosen);

    RoundReport report;
    report.round = round_index;
    report.chosen = picked.chosen;
    report.objective = chosen_objective;
    report.accuracy = nn::evaluate(next, test_ds.features, test_ds.labels);
    report.mean_train_loss = loss_sum / picked.chosen.size();
    report.selection_counts = state.times_selected;
    report.train_sizes = std::move(train_sizes);
    return {std::move(next), std::move(report)};
}

RunResult run(const FLConfig& cfg, const data::LabeledDataset& train_ds,
              const data::ClientPartition& partition, const data::LabeledDataset& test_ds,
              const ChannelModel& channel) {
    if (cfg.rounds < 1) throw std::invalid_argument("run: rounds must be >= 1");
    if (cfg.n_select < 1 || cfg.n_select > cfg.clients)
        throw std::invalid_argument("run: n_select out of range");
    if (partition.clients() != cfg.clients)
        throw std::invalid_argument("run: partition client count does not match config");
    if (static_cast<int>(channel.snr_linear.size()) != cfg.clients)
        throw std::invalid_argument("run: channel size does not match config");

    nn::NetworkParams global = init_global(cfg, train_ds.feature_dim(), train_ds.num_classes);

    RunResult result;
    result.profile = warmup(global, train_ds, partition, cfg.train, cfg.seed);

    selection::SelectionState state =
        selection::make_state(cfg.clients, cfg.n_select, cfg.gamma, cfg.theta);
    if (uses_snr(cfg.policy)) state.snr = channel.snr_linear;

    result.rounds.reserve(cfg.rounds);
    for (int t = 1; t <= cfg.rounds; ++t) {
        if (cfg.profile_refresh > 0 && t > 1 && (t - 1) % cfg.profile_refresh == 0)
            result.profile = warmup(global, train_ds, partition, cfg.train,
                                    mix_seed(cfg.seed, kWarmupTag, t));
        auto [next, report] = run_round(global, train_ds, partition, test_ds, result.profile,
                                        state, cfg, t);
        global = std::move(next);
        result.rounds.push_back(std::move(report));
    }
    result.model = std::move(global);
    return result;
}

} // namespace bacsa::engine

#include "bacsa/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bacsa/bias.hpp"

namespace bacsa::experiment {

namespace {

constexpr int kSummarySchemaVersion = 1;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
    }
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string scheme_name(data::Scheme s) {
    switch (s) {
        case data::Scheme::iid: return "iid";
        case data::Scheme::dirichlet: return "dirichlet";
        case data::Scheme::ccdd: return "ccdd";
    }
    return "unknown";
}

std::string init_name(engine::InitScheme s) {
    return s == engine::InitScheme::bacsa ? "bacsa" : "glorot";
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    return f;
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / v.size();
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / v.size());
}

struct RunOutcome {
    engine::RunResult result;
    RunInputs inputs;
    double final_accuracy = 0.0;
    double best_accuracy = 0.0;
};

RunOutcome execute_run(const ExperimentConfig& cfg, engine::Policy policy,
                       std::uint64_t run_seed) {
    ExperimentConfig local = cfg;
    local.fl.policy = policy;
    local.fl.seed = run_seed;
    RunOutcome out;
    out.inputs = make_run_inputs(local, run_seed);
    out.result = engine::run(local.fl, out.inputs.train, out.inputs.partition, out.inputs.test,
                             out.inputs.channel);
    out.final_accuracy = out.result.rounds.back().accuracy;
    for (const auto& r : out.result.rounds)
        out.best_accuracy = std::max(out.best_accuracy, r.accuracy);
    return out;
}

// Deterministic parallel map: job order fixed, workers only race for job ids.
// The first failure is rethrown on the calling thread after the pool drains.
template <typename Job>
void run_jobs(int count, int workers, Job&& job) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    const int n = std::min(workers, count);
    pool.reserve(n);
    for (int w = 0; w < n; ++w)
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    job(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void write_rounds_csv(std::ofstream& f, const std::string& policy,
                      const std::vector<engine::RoundReport>& rounds) {
    for (const auto& r : rounds)
        f << r.round << ',' << policy << ',' << fmt(r.accuracy) << ',' << fmt(r.mean_train_loss)
          << ',' << fmt(r.objective) << '\n';
}

} // namespace

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

int thread_count() {
    if (const char* env = std::getenv("BACSA_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dataset") {
        if (value == "synthetic") cfg.dataset.source = DatasetSpec::Source::synthetic;
        else if (value == "idx") cfg.dataset.source = DatasetSpec::Source::idx;
        else throw ConfigError("key 'dataset': expected synthetic or idx, got '" + value + "'");
    } else if (key == "classes") {
        cfg.dataset.classes = static_cast<int>(parse_int(key, value));
    } else if (key == "per_class") {
        cfg.dataset.per_class = static_cast<int>(parse_int(key, value));
    } else if (key == "test_per_class") {
        cfg.dataset.test_per_class = static_cast<int>(parse_int(key, value));
    } else if (key == "feature_dim") {
        cfg.dataset.feature_dim = static_cast<int>(parse_int(key, value));
    } else if (key == "spread") {
        cfg.dataset.spread = parse_real(key, value);
    } else if (key == "data_seed") {
        cfg.dataset.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "idx_images") {
        cfg.dataset.idx_images = value;
    } else if (key == "idx_labels") {
        cfg.dataset.idx_labels = value;
    } else if (key == "idx_test_images") {
        cfg.dataset.idx_test_images = value;
    } else if (key == "idx_test_labels") {
        cfg.dataset.idx_test_labels = value;
    } else if (key == "partition") {
        if (value == "iid") cfg.partition.scheme = data::Scheme::iid;
        else if (value == "dirichlet") cfg.partition.scheme = data::Scheme::dirichlet;
        else if (value == "ccdd") cfg.partition.scheme = data::Scheme::ccdd;
        else throw ConfigError("key 'partition': expected iid, dirichlet or ccdd, got '" +
                               value + "'");
    } else if (key == "clients") {
        const int k = static_cast<int>(parse_int(key, value));
        cfg.partition.clients = k;
        cfg.fl.clients = k;
    } else if (key == "alpha") {
        cfg.partition.alpha = parse_real(key, value);
    } else if (key == "phi") {
        cfg.partition.classes_per_client = static_cast<int>(parse_int(key, value));
    } else if (key == "partition_seed") {
        cfg.partition.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "n_select") {
        cfg.fl.n_select = static_cast<int>(parse_int(key, value));
    } else if (key == "rounds") {
        cfg.fl.rounds = static_cast<int>(parse_int(key, value));
    } else if (key == "policy") {
        try {
            cfg.fl.policy = engine::policy_from_string(value);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("key 'policy': ") + e.what());
        }
    } else if (key == "policies") {
        cfg.policies.clear();
        for (const auto& item : split_list(value)) {
            try {
                cfg.policies.push_back(engine::policy_from_string(item));
            } catch (const std::exception& e) {
                throw ConfigError(std::string("key 'policies': ") + e.what());
            }
        }
    } else if (key == "epochs") {
        cfg.fl.train.epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "batch_size") {
        cfg.fl.train.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "learning_rate") {
        cfg.fl.train.learning_rate = parse_real(key, value);
    } else if (key == "weight_decay") {
        cfg.fl.train.weight_decay = parse_real(key, value);
    } else if (key == "n0") {
        cfg.fl.fixed_sample_size = static_cast<int>(parse_int(key, value));
    } else if (key == "gamma") {
        cfg.fl.gamma = parse_real(key, value);
    } else if (key == "theta") {
        cfg.fl.theta = parse_real(key, value);
    } else if (key == "profile_refresh") {
        cfg.fl.profile_refresh = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
        cfg.fl.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& item : split_list(value))
            cfg.seeds.push_back(static_cast<std::uint64_t>(parse_int(key, item)));
        if (cfg.seeds.empty()) throw ConfigError("key 'seeds': list is empty");
    } else if (key == "init") {
        if (value == "bacsa") cfg.fl.init = engine::InitScheme::bacsa;
        else if (value == "glorot") cfg.fl.init = engine::InitScheme::glorot;
        else throw ConfigError("key 'init': expected bacsa or glorot, got '" + value + "'");
    } else if (key == "hidden") {
        cfg.fl.hidden.clear();
        for (const auto& item : split_list(value))
            cfg.fl.hidden.push_back(static_cast<int>(parse_int(key, item)));
        if (cfg.fl.hidden.empty()) throw ConfigError("key 'hidden': list is empty");
    } else if (key == "snr_lo_db") {
        cfg.snr_lo_db = parse_real(key, value);
    } else if (key == "snr_hi_db") {
        cfg.snr_hi_db = parse_real(key, value);
    } else if (key == "channel_seed") {
        cfg.channel_seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "mc_runs") {
        cfg.mc_runs = static_cast<int>(parse_int(key, value));
    } else if (key == "out") {
        cfg.out_dir = value;
    } else {
        throw ConfigError("unknown key '" + key + "'");
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg = default_config();
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            set_key(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "dataset="
        << (cfg.dataset.source == DatasetSpec::Source::synthetic ? "synthetic" : "idx") << '\n';
    out << "classes=" << cfg.dataset.classes << '\n';
    out << "per_class=" << cfg.dataset.per_class << '\n';
    out << "test_per_class=" << cfg.dataset.test_per_class << '\n';
    out << "feature_dim=" << cfg.dataset.feature_dim << '\n';
    out << "spread=" << fmt(cfg.dataset.spread) << '\n';
    out << "data_seed=" << cfg.dataset.seed << '\n';
    if (!cfg.dataset.idx_images.empty()) out << "idx_images=" << cfg.dataset.idx_images << '\n';
    if (!cfg.dataset.idx_labels.empty()) out << "idx_labels=" << cfg.dataset.idx_labels << '\n';
    if (!cfg.dataset.idx_test_images.empty())
        out << "idx_test_images=" << cfg.dataset.idx_test_images << '\n';
    if (!cfg.dataset.idx_test_labels.empty())
        out << "idx_test_labels=" << cfg.dataset.idx_test_labels << '\n';
    out << "partition=" << scheme_name(cfg.partition.scheme) << '\n';
    out << "clients=" << cfg.partition.clients << '\n';
    out << "alpha=" << fmt(cfg.partition.alpha) << '\n';
    out << "phi=" << cfg.partition.classes_per_client << '\n';
    out << "partition_seed=" << cfg.partition.seed << '\n';
    out << "n_select=" << cfg.fl.n_select << '\n';
    out << "rounds=" << cfg.fl.rounds << '\n';
    out << "policy=" << engine::policy_name(cfg.fl.policy) << '\n';
    if (!cfg.policies.empty()) {
        out << "policies=";
        for (std::size_t i = 0; i < cfg.policies.size(); ++i)
            out << (i ? "," : "") << engine::policy_name(cfg.policies[i]);
        out << '\n';
    }
    out << "epochs=" << cfg.fl.train.epochs << '\n';
    out << "batch_size=" << cfg.fl.train.batch_size << '\n';
    out << "learning_rate=" << fmt(cfg.fl.train.learning_rate) << '\n';
    out << "weight_decay=" << fmt(cfg.fl.train.weight_decay) << '\n';
    out << "n0=" << cfg.fl.fixed_sample_size << '\n';
    out << "gamma=" << fmt(cfg.fl.gamma) << '\n';
    out << "theta=" << fmt(cfg.fl.theta) << '\n';
    out << "profile_refresh=" << cfg.fl.profile_refresh << '\n';
    out << "seed=" << cfg.fl.seed << '\n';
    if (!cfg.seeds.empty()) {
        out << "seeds=";
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
        out << '\n';
    }
    out << "init=" << init_name(cfg.fl.init) << '\n';
    out << "hidden=";
    for (std::size_t i = 0; i < cfg.fl.hidden.size(); ++i)
        out << (i ? "," : "") << cfg.fl.hidden[i];
    out << '\n';
    out << "snr_lo_db=" << fmt(cfg.snr_lo_db) << '\n';
    out << "snr_hi_db=" << fmt(cfg.snr_hi_db) << '\n';
    out << "channel_seed=" << cfg.channel_seed << '\n';
    out << "mc_runs=" << cfg.mc_runs << '\n';
    out << "out=" << cfg.out_dir << '\n';
    return out.str();
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.dataset.source == DatasetSpec::Source::synthetic) {
        if (cfg.dataset.classes < 2) throw ConfigError("classes must be >= 2");
        if (cfg.dataset.per_class < 1) throw ConfigError("per_class must be >= 1");
        if (cfg.dataset.test_per_class < 1) throw ConfigError("test_per_class must be >= 1");
        if (cfg.dataset.feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
        if (cfg.dataset.spread <= 0) throw ConfigError("spread must be > 0");
    } else {
        if (cfg.dataset.idx_images.empty() || cfg.dataset.idx_labels.empty() ||
            cfg.dataset.idx_test_images.empty() || cfg.dataset.idx_test_labels.empty())
            throw ConfigError("idx dataset needs idx_images, idx_labels, idx_test_images and "
                              "idx_test_labels");
    }
    if (cfg.partition.clients < 1) throw ConfigError("clients must be >= 1");
    if (cfg.partition.scheme == data::Scheme::dirichlet && cfg.partition.alpha <= 0)
        throw ConfigError("alpha must be > 0");
    if (cfg.partition.scheme == data::Scheme::ccdd) {
        if (cfg.partition.classes_per_client < 1 ||
            cfg.partition.classes_per_client > cfg.dataset.classes)
            throw ConfigError("phi must be in [1, classes]");
        if (static_cast<long long>(cfg.partition.clients) * cfg.partition.classes_per_client <
            cfg.dataset.classes)
            throw ConfigError("clients * phi must cover all classes");
    }
    if (cfg.fl.n_select < 1 || cfg.fl.n_select > cfg.fl.clients)
        throw ConfigError("n_select must be in [1, clients]");
    if (cfg.fl.rounds < 1) throw ConfigError("rounds must be >= 1");
    if (cfg.fl.train.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (cfg.fl.train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.fl.train.learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
    if (cfg.fl.train.weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (cfg.fl.gamma < 0) throw ConfigError("gamma must be >= 0");
    if (cfg.fl.theta <= 0) throw ConfigError("theta must be > 0");
    if (cfg.fl.fixed_sample_size < 0) throw ConfigError("n0 must be >= 0");
    if (cfg.fl.profile_refresh < 0) throw ConfigError("profile_refresh must be >= 0");
    for (int h : cfg.fl.hidden)
        if (h < 1) throw ConfigError("hidden widths must be >= 1");
    if (cfg.snr_lo_db > cfg.snr_hi_db) throw ConfigError("snr_lo_db must be <= snr_hi_db");
    if (cfg.mc_runs < 0) throw ConfigError("mc_runs must be >= 0");
    if (cfg.out_dir.empty()) throw ConfigError("out must not be empty");
}

RunInputs make_run_inputs(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    RunInputs inputs;
    if (cfg.dataset.source == DatasetSpec::Source::synthetic) {
        const int pool = cfg.dataset.per_class + cfg.dataset.test_per_class;
        data::LabeledDataset all = data::gen_synthetic(cfg.dataset.classes, pool,
                                                       cfg.dataset.feature_dim,
                                                       cfg.dataset.spread, cfg.dataset.seed);
        std::vector<int> train_idx;
        std::vector<int> test_idx;
        for (int c = 0; c < cfg.dataset.classes; ++c) {
            const int base = c * pool;
            for (int j = 0; j < cfg.dataset.per_class; ++j) train_idx.push_back(base + j);
            for (int j = cfg.dataset.per_class; j < pool; ++j) test_idx.push_back(base + j);
        }
        inputs.train = data::extract(all, train_idx);
        inputs.test = data::extract(all, test_idx);
    } else {
        inputs.train = data::load_idx(cfg.dataset.idx_images, cfg.dataset.idx_labels);
        inputs.test = data::load_idx(cfg.dataset.idx_test_images, cfg.dataset.idx_test_labels);
        const int classes = std::max(inputs.train.num_classes, inputs.test.num_classes);
        inputs.train.num_classes = classes;
        inputs.test.num_classes = classes;
    }

    data::PartitionSpec part = cfg.partition;
    part.seed = mix_seed(cfg.partition.seed, 0x9a, run_seed);
    inputs.partition = data::make_partition(inputs.train, part);
    inputs.channel = engine::assign_snr(cfg.fl.clients, cfg.snr_lo_db, cfg.snr_hi_db,
                                        mix_seed(cfg.channel_seed, 0xc4, run_seed));
    return inputs;
}

void run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::vector<std::uint64_t> seeds =
        cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.fl.seed} : cfg.seeds;

    std::vector<RunOutcome> outcomes(seeds.size());
    run_jobs(static_cast<int>(seeds.size()), thread_count(), [&](int i) {
        outcomes[i] = execute_run(cfg, cfg.fl.policy, seeds[i]);
    });

    const std::string policy = engine::policy_name(cfg.fl.policy);
    auto rounds_csv = open_out(cfg.out_dir, "rounds.csv");
    rounds_csv << "round,policy,accuracy,loss,objective\n";
    for (const auto& o : outcomes) write_rounds_csv(rounds_csv, policy, o.result.rounds);

    // counts and profile describe a single run; the first seed is the reference.
    const RunOutcome& ref = outcomes.front();
    auto counts_csv = open_out(cfg.out_dir, "counts.csv");
    counts_csv << "client,m,snr_db\n";
    const auto& counts = ref.result.rounds.back().selection_counts;
    for (int k = 0; k < cfg.fl.clients; ++k)
        counts_csv << k << ',' << counts[k] << ','
                   << fmt(10.0 * std::log10(ref.inputs.channel.snr_linear[k])) << '\n';

    auto profile_csv = open_out(cfg.out_dir, "profile.csv");
    profile_csv << "client,class,p_true,p_hat,beta\n";
    const Matrix p_true = data::true_proportions(ref.inputs.partition, ref.inputs.train);
    const auto& prof = ref.result.profile;
    for (int k = 0; k < cfg.fl.clients; ++k)
        for (int c = 0; c < prof.classes(); ++c)
            profile_csv << k << ',' << c << ',' << fmt(p_true(c, k)) << ','
                        << fmt(prof.beta(c, k)) << ',' << fmt(prof.global_beta(c, k)) << '\n';

    std::vector<double> finals;
    std::vector<double> bests;
    for (const auto& o : outcomes) {
        finals.push_back(o.final_accuracy);
        bests.push_back(o.best_accuracy);
    }
    nlohmann::json summary;
    summary["schema_version"] = kSummarySchemaVersion;
    summary["policy"] = policy;
    summary["seeds"] = seeds;
    summary["rounds"] = cfg.fl.rounds;
    summary["final_accuracy"] = {{"mean", mean_of(finals)}, {"std", stddev_of(finals)}};
    summary["best_accuracy"] = {{"mean", mean_of(bests)}, {"std", stddev_of(bests)}};
    auto summary_file = open_out(cfg.out_dir, "summary.json");
    summary_file << summary.dump(2) << '\n';
}

void run_montecarlo_init(const ExperimentConfig& cfg) {
    validate(cfg);
    if (cfg.mc_runs < 2) throw ConfigError("mc_runs must be >= 2 for the init study");

    struct McRow {
        double kappa_bacsa = 0.0;
        double kappa_glorot = 0.0;
    };
    std::vector<McRow> rows(cfg.mc_runs);

    run_jobs(cfg.mc_runs, thread_count(), [&](int i) {
        const int h = i + 1;
        const std::uint64_t run_seed = mix_seed(cfg.fl.seed, 0x30c, h);
        const RunInputs inputs = make_run_inputs(cfg, run_seed);
        const Matrix p_true = data::true_proportions(inputs.partition, inputs.train);
        const auto spec = nn::make_layer_specs(inputs.train.feature_dim(), cfg.fl.hidden,
                                               inputs.train.num_classes);
        for (const auto scheme : {engine::InitScheme::bacsa, engine::InitScheme::glorot}) {
            const nn::NetworkParams global = scheme == engine::InitScheme::bacsa
                                                 ? nn::init_bacsa(spec, run_seed)
                                                 : nn::init_glorot(spec, run_seed);
            const auto profile =
                engine::warmup(global, inputs.train, inputs.partition, cfg.fl.train, run_seed);
            const auto report = bias::estimation_error(p_true, profile.beta);
            (scheme == engine::InitScheme::bacsa ? rows[i].kappa_bacsa : rows[i].kappa_glorot) =
                report.mean_kappa;
        }
    });

    auto mc_csv = open_out(cfg.out_dir, "mc.csv");
    mc_csv << "run,init,mean_kappa\n";
    for (int i = 0; i < cfg.mc_runs; ++i) {
        mc_csv << (i + 1) << ",bacsa," << fmt(rows[i].kappa_bacsa) << '\n';
        mc_csv << (i + 1) << ",glorot," << fmt(rows[i].kappa_glorot) << '\n';
    }
}

void compare_policies(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::vector<engine::Policy> policies =
        cfg.policies.empty() ? std::vector<engine::Policy>{cfg.fl.policy} : cfg.policies;
    if (policies.empty()) throw ConfigError("policy list is empty");
    const std::vector<std::uint64_t> seeds =
        cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.fl.seed} : cfg.seeds;

    struct Cell {
        double final_accuracy = 0.0;
        double best_accuracy = 0.0;
    };
    std::vector<Cell> cells(policies.size() * seeds.size());
    run_jobs(static_cast<int>(cells.size()), thread_count(), [&](int i) {
        const std::size_t p = i / seeds.size();
        const std::size_t s = i % seeds.size();
        const RunOutcome out = execute_run(cfg, policies[p], seeds[s]);
        cells[i] = {out.final_accuracy, out.best_accuracy};
    });

    auto csv = open_out(cfg.out_dir, "comparison.csv");
    csv << "policy,seed,final_accuracy,best_accuracy,final_accuracy_std,best_accuracy_std\n";
    for (std::size_t p = 0; p < policies.size(); ++p) {
        std::vector<double> finals;
        std::vector<double> bests;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const Cell& cell = cells[p * seeds.size() + s];
            csv << engine::policy_name(policies[p]) << ',' << seeds[s] << ','
                << fmt(cell.final_accuracy) << ',' << fmt(cell.best_accuracy) << ",,\n";
            finals.push_back(cell.final_accuracy);
            bests.push_back(cell.best_accuracy);
        }
        csv << engine::policy_name(policies[p]) << ",mean," << fmt(mean_of(finals)) << ','
            << fmt(mean_of(bests)) << ',' << fmt(stddev_of(finals)) << ','
            << fmt(stddev_of(bests)) << '\n';
    }
}

void partition_stats(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::uint64_t run_seed = cfg.seeds.empty() ? cfg.fl.seed : cfg.seeds.front();
    const RunInputs inputs = make_run_inputs(cfg, run_seed);
    const Matrix p = data::true_proportions(inputs.partition, inputs.train);

    auto csv = open_out(cfg.out_dir, "partition.csv");
    csv << "client,class,count,proportion\n";
    for (int k = 0; k < inputs.partition.clients(); ++k) {
        const auto counts = data::class_counts(inputs.train, inputs.partition.client_indices[k]);
        for (int c = 0; c < inputs.train.num_classes; ++c)
            csv << k << ',' << c << ',' << counts[c] << ',' << fmt(p(c, k)) << '\n';
    }
}

Summary load_summary(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open summary: " + path);
    nlohmann::json j;
    f >> j;
    Summary s;
    s.schema_version = j.at("schema_version").get<int>();
    if (s.schema_version != kSummarySchemaVersion)
        throw std::runtime_error("summary schema version " + std::to_string(s.schema_version) +
                                 " is not supported");
    s.policy = j.at("policy").get<std::string>();
    s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    s.final_accuracy = {j.at("final_accuracy").at("mean").get<double>(),
                        j.at("final_accuracy").at("std").get<double>()};
    s.best_accuracy = {j.at("best_accuracy").at("mean").get<double>(),
                       j.at("best_accuracy").at("std").get<double>()};
    return s;
}

} // namespace bacsa::experiment

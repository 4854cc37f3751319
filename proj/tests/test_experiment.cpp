#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bacsa/experiment.hpp"

using namespace bacsa;
using experiment::ConfigError;
using experiment::ExperimentConfig;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;

    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("bacsa_exp_" + std::to_string(::getpid()) + "_" + std::to_string(++counter));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int count_data_rows(const std::string& csv) {
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    return lines - 1;  // header
}

// Small but complete experiment: tiny model, few rounds.
std::string small_config(const std::string& out, const std::string& policy = "bacsa") {
    std::ostringstream cfg;
    cfg << "dataset=synthetic\nclasses=4\nper_class=60\ntest_per_class=20\n"
        << "feature_dim=8\nspread=8\ndata_seed=5\n"
        << "partition=ccdd\nphi=2\nclients=6\npartition_seed=6\n"
        << "n_select=2\nrounds=4\npolicy=" << policy << "\nepochs=2\nbatch_size=16\n"
        << "hidden=12\nseed=9\nout=" << out << "\n";
    return cfg.str();
}

} // namespace

TEST_SUITE_BEGIN("experiment");

TEST_CASE("minimal config picks up the standard defaults") {
    const auto cfg = experiment::parse_config_text("partition=ccdd\nphi=2\n");
    CHECK(cfg.fl.clients == 20);
    CHECK(cfg.fl.n_select == 5);
    CHECK(cfg.fl.rounds == 150);
    CHECK(cfg.fl.train.epochs == 5);
    CHECK(cfg.fl.train.batch_size == 32);
    CHECK(cfg.fl.train.learning_rate == doctest::Approx(0.01));
    CHECK(cfg.fl.train.weight_decay == doctest::Approx(5e-4));
    CHECK(cfg.fl.gamma == doctest::Approx(0.05));
    CHECK(cfg.fl.theta == doctest::Approx(1.0));
    CHECK(cfg.partition.classes_per_client == 2);
}

TEST_CASE("config validation rejects bad combinations") {
    CHECK_THROWS_AS(experiment::parse_config_text("partition=ccdd\nphi=11\nclasses=10\n"),
                    ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("bogus_key=3\n"), ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("rounds=zero\n"), ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("rounds\n"), ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("n_select=25\nclients=20\n"), ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("policy=fancy\n"), ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("alpha=-1\npartition=dirichlet\n"),
                    ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("dataset=idx\n"), ConfigError);
}

TEST_CASE("config errors carry the line number") {
    try {
        experiment::parse_config_text("seed=1\nwhat=ever\n");
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("parse-serialize-parse is the identity") {
    const std::string text =
        "partition=dirichlet\nalpha=0.3\nclients=8\nseeds=3,5,7\npolicies=bacsa,random\n"
        "hidden=24,12\ngamma=0.07\nrounds=12\n";
    const auto cfg = experiment::parse_config_text(text);
    const std::string canon = experiment::serialize_config(cfg);
    const auto cfg2 = experiment::parse_config_text(canon);
    CHECK(experiment::serialize_config(cfg2) == canon);
    CHECK(cfg2.seeds == std::vector<std::uint64_t>{3, 5, 7});
    CHECK(cfg2.fl.hidden == std::vector<int>{24, 12});
}

TEST_CASE("run_experiment writes the four outputs with pinned schemas") {
    TempDir dir;
    const auto cfg = experiment::parse_config_text(small_config(dir.str()));
    experiment::run_experiment(cfg);

    const std::string rounds = slurp(dir.path / "rounds.csv");
    CHECK(rounds.rfind("round,policy,accuracy,loss,objective\n", 0) == 0);
    CHECK(count_data_rows(rounds) == 4);

    const std::string counts = slurp(dir.path / "counts.csv");
    CHECK(counts.rfind("client,m,snr_db\n", 0) == 0);
    CHECK(count_data_rows(counts) == 6);

    const std::string profile = slurp(dir.path / "profile.csv");
    CHECK(profile.rfind("client,class,p_true,p_hat,beta\n", 0) == 0);
    CHECK(count_data_rows(profile) == 6 * 4);

    const auto summary = experiment::load_summary((dir.path / "summary.json").string());
    CHECK(summary.schema_version == 1);
    CHECK(summary.policy == "bacsa");
    CHECK(summary.seeds == std::vector<std::uint64_t>{9});
    CHECK(summary.final_accuracy.stddev == 0.0);
    CHECK(summary.final_accuracy.mean > 0.0);
}

TEST_CASE("unknown summary schema versions are rejected") {
    TempDir dir;
    const auto path = dir.path / "summary.json";
    {
        std::ofstream f(path);
        f << "{\"schema_version\": 99, \"policy\": \"x\", \"seeds\": [1],\n"
          << " \"final_accuracy\": {\"mean\": 0, \"std\": 0},\n"
          << " \"best_accuracy\": {\"mean\": 0, \"std\": 0}}\n";
    }
    CHECK_THROWS(experiment::load_summary(path.string()));
}

TEST_CASE("same config and seed produce byte-identical outputs") {
    TempDir a;
    TempDir b;
    experiment::run_experiment(experiment::parse_config_text(small_config(a.str())));
    experiment::run_experiment(experiment::parse_config_text(small_config(b.str())));
    for (const char* name : {"rounds.csv", "counts.csv", "profile.csv", "summary.json"})
        CHECK(slurp(a.path / name) == slurp(b.path / name));

    TempDir c;
    auto other = experiment::parse_config_text(small_config(c.str()));
    other.fl.seed = 10;
    experiment::run_experiment(other);
    CHECK(slurp(a.path / "rounds.csv") != slurp(c.path / "rounds.csv"));
}

TEST_CASE("multi-seed runs concatenate rounds and aggregate the summary") {
    TempDir dir;
    auto cfg = experiment::parse_config_text(small_config(dir.str()));
    cfg.seeds = {9, 10, 11};
    experiment::run_experiment(cfg);
    CHECK(count_data_rows(slurp(dir.path / "rounds.csv")) == 3 * 4);
    const auto summary = experiment::load_summary((dir.path / "summary.json").string());
    CHECK(summary.seeds.size() == 3u);
}

TEST_CASE("montecarlo study emits paired rows per run") {
    TempDir dir;
    auto cfg = experiment::parse_config_text(small_config(dir.str()));
    cfg.mc_runs = 2;
    cfg.partition.scheme = data::Scheme::dirichlet;
    cfg.partition.alpha = 0.5;
    experiment::run_montecarlo_init(cfg);

    const std::string mc = slurp(dir.path / "mc.csv");
    CHECK(mc.rfind("run,init,mean_kappa\n", 0) == 0);
    CHECK(count_data_rows(mc) == 4);

    TempDir again;
    cfg.out_dir = again.str();
    experiment::run_montecarlo_init(cfg);
    CHECK(slurp(again.path / "mc.csv") == mc);

    cfg.mc_runs = 1;
    CHECK_THROWS_AS(experiment::run_montecarlo_init(cfg), ConfigError);
}

TEST_CASE("policy comparison emits per-run rows plus a mean row per policy") {
    TempDir dir;
    auto cfg = experiment::parse_config_text(small_config(dir.str()));
    cfg.policies = {engine::Policy::random, engine::Policy::greedy_balance};
    cfg.seeds = {4, 5};
    experiment::compare_policies(cfg);

    const std::string csv = slurp(dir.path / "comparison.csv");
    CHECK(csv.rfind(
              "policy,seed,final_accuracy,best_accuracy,final_accuracy_std,best_accuracy_std\n",
              0) == 0);
    CHECK(count_data_rows(csv) == 2 * (2 + 1));
    CHECK(csv.find("random,mean,") != std::string::npos);
    CHECK(csv.find("greedy_balance,mean,") != std::string::npos);
}

TEST_CASE("single-seed comparison gets a zero std column") {
    TempDir dir;
    auto cfg = experiment::parse_config_text(small_config(dir.str(), "random"));
    cfg.policies = {engine::Policy::random};
    experiment::compare_policies(cfg);
    const std::string csv = slurp(dir.path / "comparison.csv");
    CHECK(count_data_rows(csv) == 2);
    CHECK(csv.find("random,mean,") != std::string::npos);
    const auto mean_row = csv.substr(csv.find("random,mean,"));
    CHECK(mean_row.find(",0,0\n") != std::string::npos);
}

TEST_CASE("comparison output is independent of the worker thread count") {
    TempDir serial;
    TempDir threaded;
    auto cfg = experiment::parse_config_text(small_config(serial.str()));
    cfg.policies = {engine::Policy::random, engine::Policy::bacsa};
    cfg.seeds = {4, 5};

    ::setenv("BACSA_THREADS", "1", 1);
    experiment::compare_policies(cfg);
    CHECK(experiment::thread_count() == 1);

    ::setenv("BACSA_THREADS", "3", 1);
    cfg.out_dir = threaded.str();
    experiment::compare_policies(cfg);
    CHECK(experiment::thread_count() == 3);
    ::unsetenv("BACSA_THREADS");

    CHECK(slurp(serial.path / "comparison.csv") == slurp(threaded.path / "comparison.csv"));
}

TEST_CASE("partition stats describe the ccdd composition") {
    TempDir dir;
    const auto cfg = experiment::parse_config_text(small_config(dir.str()));
    experiment::partition_stats(cfg);
    const std::string csv = slurp(dir.path / "partition.csv");
    CHECK(csv.rfind("client,class,count,proportion\n", 0) == 0);
    CHECK(count_data_rows(csv) == 6 * 4);
}

TEST_SUITE_END();

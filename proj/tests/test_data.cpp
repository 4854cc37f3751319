#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "bacsa/data.hpp"
#include "bacsa/nn.hpp"

using namespace bacsa;

namespace {

void check_disjoint_cover(const data::ClientPartition& part, int parent_size) {
    std::vector<int> seen(parent_size, 0);
    for (const auto& idx : part.client_indices) {
        CHECK_FALSE(idx.empty());
        for (int i : idx) {
            REQUIRE(i >= 0);
            REQUIRE(i < parent_size);
            seen[i] += 1;
        }
    }
    for (int count : seen) CHECK(count == 1);
}

double mean_max_share(const Matrix& p) {
    double acc = 0.0;
    for (int k = 0; k < p.cols(); ++k) {
        double mx = 0.0;
        for (int c = 0; c < p.rows(); ++c) mx = std::max(mx, p(c, k));
        acc += mx;
    }
    return acc / p.cols();
}

void write_be32(std::ofstream& f, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

struct IdxFixture {
    std::filesystem::path images;
    std::filesystem::path labels;

    IdxFixture(int count, int rows, int cols, std::uint32_t image_magic = 0x00000803,
               std::uint32_t label_magic = 0x00000801, int label_count = -1,
               bool truncate_images = false) {
        const auto dir = std::filesystem::temp_directory_path();
        images = dir / ("bacsa_test_images_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter()));
        labels = dir / ("bacsa_test_labels_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter()));
        if (label_count < 0) label_count = count;
        {
            std::ofstream f(images, std::ios::binary);
            write_be32(f, image_magic);
            write_be32(f, count);
            write_be32(f, rows);
            write_be32(f, cols);
            const int payload = truncate_images ? count * rows * cols / 2 : count * rows * cols;
            for (int i = 0; i < payload; ++i) {
                const unsigned char px = static_cast<unsigned char>((i * 37) & 0xff);
                f.write(reinterpret_cast<const char*>(&px), 1);
            }
        }
        {
            std::ofstream f(labels, std::ios::binary);
            write_be32(f, label_magic);
            write_be32(f, label_count);
            for (int i = 0; i < label_count; ++i) {
                const unsigned char y = static_cast<unsigned char>(i % 10);
                f.write(reinterpret_cast<const char*>(&y), 1);
            }
        }
    }

    ~IdxFixture() {
        std::error_code ec;
        std::filesystem::remove(images, ec);
        std::filesystem::remove(labels, ec);
    }

    static int counter() {
        static int n = 0;
        return ++n;
    }
};

} // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("gen_synthetic is balanced and deterministic") {
    const auto ds = data::gen_synthetic(10, 500, 8, 4.0, 12);
    CHECK(ds.size() == 5000);
    CHECK(ds.feature_dim() == 8);
    std::vector<int> counts(10, 0);
    for (int y : ds.labels) counts[y] += 1;
    for (int c : counts) CHECK(c == 500);

    const auto again = data::gen_synthetic(10, 500, 8, 4.0, 12);
    CHECK(ds.features == again.features);
    CHECK(ds.labels == again.labels);
    CHECK_THROWS_AS(data::gen_synthetic(0, 5, 3, 1.0, 1), std::invalid_argument);
}

TEST_CASE("larger spread means more separable data") {
    nn::TrainConfig cfg;
    cfg.epochs = 3;
    auto probe = [&](double spread) {
        const auto ds = data::gen_synthetic(4, 200, 6, spread, 21);
        const auto spec = nn::make_layer_specs(6, {16}, 4);
        const auto trained =
            nn::train_local(nn::init_glorot(spec, 22), ds.features, ds.labels, cfg, 23);
        return nn::evaluate(trained, ds.features, ds.labels);
    };
    CHECK(probe(8.0) > probe(0.5));
}

TEST_CASE("partition_iid deals every class evenly") {
    const auto ds = data::gen_synthetic(10, 500, 4, 3.0, 5);
    const auto part = data::partition_iid(ds, 20, 9);
    check_disjoint_cover(part, ds.size());
    for (int k = 0; k < 20; ++k) {
        const auto counts = data::class_counts(ds, part.client_indices[k]);
        for (int c : counts) CHECK(c == 25);
    }

    const auto solo = data::partition_iid(ds, 1, 9);
    CHECK(solo.client_indices[0].size() == 5000u);
    CHECK_THROWS_AS(data::partition_iid(ds, 5001, 9), std::invalid_argument);
}

TEST_CASE("partition_dirichlet approaches iid for huge alpha") {
    const auto ds = data::gen_synthetic(10, 200, 4, 3.0, 7);
    const auto part = data::partition_dirichlet(ds, 20, 1e6, 3);
    check_disjoint_cover(part, ds.size());
    const auto p = data::true_proportions(part, ds);
    for (int k = 0; k < p.cols(); ++k)
        for (int c = 0; c < p.rows(); ++c) CHECK(std::abs(p(c, k) - 0.1) <= 0.02);
}

TEST_CASE("partition_dirichlet heterogeneity grows as alpha shrinks") {
    const auto ds = data::gen_synthetic(10, 200, 4, 3.0, 7);
    double skew_01 = 0.0;
    double skew_1 = 0.0;
    double skew_10 = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        skew_01 += mean_max_share(data::true_proportions(
            data::partition_dirichlet(ds, 20, 0.1, seed), ds));
        skew_1 += mean_max_share(data::true_proportions(
            data::partition_dirichlet(ds, 20, 1.0, seed), ds));
        skew_10 += mean_max_share(data::true_proportions(
            data::partition_dirichlet(ds, 20, 10.0, seed), ds));
    }
    CHECK(skew_01 > skew_1);
    CHECK(skew_1 > skew_10);
    CHECK_THROWS_AS(data::partition_dirichlet(ds, 20, 0.0, 1), std::invalid_argument);
}

TEST_CASE("partition_dirichlet always covers disjointly") {
    const auto ds = data::gen_synthetic(5, 60, 3, 3.0, 2);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (double alpha : {0.05, 0.5, 5.0})
            check_disjoint_cover(data::partition_dirichlet(ds, 7, alpha, seed), ds.size());
    }
}

TEST_CASE("partition_ccdd assigns exactly the class budget") {
    const auto ds = data::gen_synthetic(10, 400, 4, 3.0, 8);
    const auto part = data::partition_ccdd(ds, 20, 2, 17);
    check_disjoint_cover(part, ds.size());

    std::vector<int> holders(10, 0);
    for (int k = 0; k < 20; ++k) {
        const auto counts = data::class_counts(ds, part.client_indices[k]);
        int distinct = 0;
        for (int c : counts)
            if (c > 0) ++distinct;
        CHECK(distinct == 2);
        for (int c = 0; c < 10; ++c)
            if (counts[c] > 0) holders[c] += 1;
    }
    for (int h : holders) CHECK(h == 4);  // 20 clients * 2 classes / 10 classes
}

TEST_CASE("partition_ccdd with full budget reduces to all classes everywhere") {
    const auto ds = data::gen_synthetic(10, 100, 4, 3.0, 8);
    const auto part = data::partition_ccdd(ds, 5, 10, 3);
    for (int k = 0; k < 5; ++k) {
        const auto counts = data::class_counts(ds, part.client_indices[k]);
        for (int c : counts) CHECK(c > 0);
    }
    CHECK_THROWS_AS(data::partition_ccdd(ds, 4, 2, 3), std::invalid_argument);  // 4*2 < 10
    CHECK_THROWS_AS(data::partition_ccdd(ds, 4, 11, 3), std::invalid_argument);
}

TEST_CASE("true_proportions columns are distributions") {
    const auto ds = data::gen_synthetic(6, 100, 4, 3.0, 4);
    const auto part = data::partition_dirichlet(ds, 8, 0.4, 11);
    const auto p = data::true_proportions(part, ds);
    for (int k = 0; k < p.cols(); ++k) {
        double sum = 0.0;
        for (int c = 0; c < p.rows(); ++c) sum += p(c, k);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }

    const auto iid = data::true_proportions(data::partition_iid(ds, 4, 2), ds);
    for (int k = 0; k < 4; ++k)
        for (int c = 0; c < 6; ++c) CHECK(iid(c, k) == doctest::Approx(1.0 / 6));
}

TEST_CASE("partitions replay identically under a fixed seed") {
    const auto ds = data::gen_synthetic(6, 80, 4, 3.0, 4);
    for (int variant = 0; variant < 3; ++variant) {
        data::PartitionSpec spec;
        spec.scheme = variant == 0 ? data::Scheme::iid
                      : variant == 1 ? data::Scheme::dirichlet
                                     : data::Scheme::ccdd;
        spec.clients = 6;
        spec.alpha = 0.3;
        spec.classes_per_client = 2;
        spec.seed = 99;
        const auto a = data::make_partition(ds, spec);
        const auto b = data::make_partition(ds, spec);
        CHECK(a.client_indices == b.client_indices);
    }
}

TEST_CASE("subsample_fixed respects the budget and keeps supported classes") {
    const auto ds = data::gen_synthetic(5, 80, 4, 3.0, 6);  // 400 samples
    const auto same = data::subsample_fixed(ds, 400, 1);
    CHECK(same.size() == 400);
    const auto more = data::subsample_fixed(ds, 1000, 1);
    CHECK(more.size() == 400);

    const auto cut = data::subsample_fixed(ds, 100, 1);
    CHECK(cut.size() == 100);
    std::vector<int> counts(5, 0);
    for (int y : cut.labels) counts[y] += 1;
    for (int c : counts) CHECK(c == 20);  // balanced input stays balanced

    // skewed client: class 0 has 3 samples, still survives a stratified cut
    std::vector<int> skew_idx;
    for (int i = 0; i < 3; ++i) skew_idx.push_back(i);
    for (int i = 80; i < 280; ++i) skew_idx.push_back(i);
    const auto skew = data::extract(ds, skew_idx);
    const auto skew_cut = data::subsample_fixed(skew, 40, 2);
    CHECK(skew_cut.size() == 40);
    CHECK(std::count(skew_cut.labels.begin(), skew_cut.labels.end(), 0) >= 1);
    CHECK_THROWS_AS(data::subsample_fixed(ds, 0, 1), std::invalid_argument);
}

TEST_CASE("load_idx reads a well-formed pair") {
    IdxFixture fx(40, 4, 3);
    const auto ds = data::load_idx(fx.images.string(), fx.labels.string());
    CHECK(ds.size() == 40);
    CHECK(ds.feature_dim() == 12);
    CHECK(ds.num_classes == 10);
    for (const double v : ds.features.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(ds.labels[3] == 3);
    CHECK(ds.features(0, 1) == doctest::Approx(37.0 / 255.0));
}

TEST_CASE("load_idx failure modes are distinct") {
    {
        IdxFixture fx(10, 2, 2, 0x00000804);
        CHECK_THROWS_AS(data::load_idx(fx.images.string(), fx.labels.string()), data::IdxError);
        try {
            data::load_idx(fx.images.string(), fx.labels.string());
        } catch (const data::IdxError& e) {
            CHECK(e.kind() == data::IdxError::Kind::bad_magic);
        }
    }
    {
        IdxFixture fx(10, 2, 2, 0x00000803, 0x00000801, 8);
        try {
            data::load_idx(fx.images.string(), fx.labels.string());
            CHECK(false);
        } catch (const data::IdxError& e) {
            CHECK(e.kind() == data::IdxError::Kind::count_mismatch);
        }
    }
    {
        IdxFixture fx(10, 2, 2, 0x00000803, 0x00000801, 10, true);
        try {
            data::load_idx(fx.images.string(), fx.labels.string());
            CHECK(false);
        } catch (const data::IdxError& e) {
            CHECK(e.kind() == data::IdxError::Kind::truncated);
        }
    }
    CHECK_THROWS_AS(data::load_idx("/nonexistent/img", "/nonexistent/lab"), data::IdxError);
}

TEST_SUITE_END();

#include "bacsa/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>

namespace bacsa::data {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw IdxError(IdxError::Kind::truncated, path + ": truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::vector<std::vector<int>> indices_by_class(const LabeledDataset& ds) {
    std::vector<std::vector<int>> by_class(ds.num_classes);
    for (int i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
    return by_class;
}

// Largest-remainder split of `total` into weighted integer shares.
std::vector<int> proportional_counts(const std::vector<double>& weights, int total) {
    const int n = static_cast<int>(weights.size());
    double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<int> counts(n, 0);
    std::vector<std::pair<double, int>> remainders;
    remainders.reserve(n);
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        const double quota = wsum > 0 ? weights[i] / wsum * total : double(total) / n;
        counts[i] = static_cast<int>(quota);
        assigned += counts[i];
        remainders.push_back({quota - counts[i], i});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int i = 0; assigned < total; ++i, ++assigned) counts[remainders[i % n].second] += 1;
    return counts;
}

void repair_empty_clients(ClientPartition& part) {
    for (auto& owner : part.client_indices) {
        while (owner.empty()) {
            auto largest = std::max_element(
                part.client_indices.begin(), part.client_indices.end(),
                [](const auto& a, const auto& b) { return a.size() < b.size(); });
            if (largest->size() <= 1) throw std::runtime_error("partition: not enough samples");
            owner.push_back(largest->back());
            largest->pop_back();
        }
    }
}

} // namespace

LabeledDataset gen_synthetic(int num_classes, int per_class, int feature_dim, double spread,
                             std::uint64_t seed) {
    if (num_classes < 1 || per_class < 1 || feature_dim < 1 || spread <= 0)
        throw std::invalid_argument("gen_synthetic: all parameters must be positive");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Matrix means(num_classes, feature_dim);
    for (int c = 0; c < num_classes; ++c) {
        double norm = 0.0;
        for (int d = 0; d < feature_dim; ++d) {
            means(c, d) = gauss(rng);
            norm += means(c, d) * means(c, d);
        }
        norm = std::sqrt(std::max(norm, 1e-30));
        for (int d = 0; d < feature_dim; ++d) means(c, d) = means(c, d) / norm * spread;
    }

    LabeledDataset ds;
    ds.num_classes = num_classes;
    ds.features = Matrix(num_classes * per_class, feature_dim);
    ds.labels.resize(num_classes * per_class);
    int row = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (int j = 0; j < per_class; ++j, ++row) {
            for (int d = 0; d < feature_dim; ++d)
                ds.features(row, d) = means(c, d) + gauss(rng);
            ds.labels[row] = c;
        }
    }
    return ds;
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgf(images_path, std::ios::binary);
    if (!imgf) throw IdxError(IdxError::Kind::io, images_path + ": cannot open");
    std::ifstream labf(labels_path, std::ios::binary);
    if (!labf) throw IdxError(IdxError::Kind::io, labels_path + ": cannot open");

    const std::uint32_t img_magic = read_be32(imgf, images_path);
    if (img_magic != kImagesMagic)
        throw IdxError(IdxError::Kind::bad_magic, images_path + ": bad magic number");
    const std::uint32_t n_images = read_be32(imgf, images_path);
    const std::uint32_t rows = read_be32(imgf, images_path);
    const std::uint32_t cols = read_be32(imgf, images_path);

    const std::uint32_t lab_magic = read_be32(labf, labels_path);
    if (lab_magic != kLabelsMagic)
        throw IdxError(IdxError::Kind::bad_magic, labels_path + ": bad magic number");
    const std::uint32_t n_labels = read_be32(labf, labels_path);

    if (n_images != n_labels)
        throw IdxError(IdxError::Kind::count_mismatch,
                       images_path + ": image count does not match label count");

    const std::size_t pixels = std::size_t(rows) * cols;
    LabeledDataset ds;
    ds.features = Matrix(static_cast<int>(n_images), static_cast<int>(pixels));
    ds.labels.resize(n_images);

    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        imgf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!imgf) throw IdxError(IdxError::Kind::truncated, images_path + ": truncated payload");
        double* out = ds.features.row(static_cast<int>(i));
        for (std::size_t p = 0; p < pixels; ++p) out[p] = buf[p] / 255.0;
    }
    std::vector<unsigned char> labs(n_labels);
    labf.read(reinterpret_cast<char*>(labs.data()), static_cast<std::streamsize>(n_labels));
    if (!labf) throw IdxError(IdxError::Kind::truncated, labels_path + ": truncated payload");

    int max_label = 0;
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        ds.labels[i] = labs[i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

ClientPartition partition_iid(const LabeledDataset& ds, int clients, std::uint64_t seed) {
    if (clients < 1) throw std::invalid_argument("partition_iid: clients must be >= 1");
    if (clients > ds.size()) throw std::invalid_argument("partition_iid: more clients than samples");

    std::mt19937_64 rng(mix_seed(seed, 0x11d));
    ClientPartition part;
    part.client_indices.resize(clients);
    auto by_class = indices_by_class(ds);
    for (int c = 0; c < ds.num_classes; ++c) {
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        const int base = static_cast<int>(idx.size()) / clients;
        int pos = 0;
        for (int k = 0; k < clients; ++k)
            for (int j = 0; j < base; ++j) part.client_indices[k].push_back(idx[pos++]);
        // remainder round-robins, rotating the starting client per class
        for (int j = 0; pos < static_cast<int>(idx.size()); ++j, ++pos)
            part.client_indices[(c + j) % clients].push_back(idx[pos]);
    }
    repair_empty_clients(part);
    return part;
}

ClientPartition partition_dirichlet(const LabeledDataset& ds, int clients, double alpha,
                                    std::uint64_t seed) {
    if (clients < 1) throw std::invalid_argument("partition_dirichlet: clients must be >= 1");
    if (alpha <= 0) throw std::invalid_argument("partition_dirichlet: alpha must be > 0");

    std::mt19937_64 rng(mix_seed(seed, 0xd12));
    std::gamma_distribution<double> gamma(alpha, 1.0);

    ClientPartition part;
    part.client_indices.resize(clients);
    auto by_class = indices_by_class(ds);
    for (int c = 0; c < ds.num_classes; ++c) {
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<double> weights(clients);
        for (double& w : weights) w = std::max(gamma(rng), 1e-300);
        const auto counts = proportional_counts(weights, static_cast<int>(idx.size()));
        int pos = 0;
        for (int k = 0; k < clients; ++k)
            for (int j = 0; j < counts[k]; ++j) part.client_indices[k].push_back(idx[pos++]);
    }
    repair_empty_clients(part);
    return part;
}

ClientPartition partition_ccdd(const LabeledDataset& ds, int clients, int classes_per_client,
                               std::uint64_t seed) {
    const int num_classes = ds.num_classes;
    if (clients < 1) throw std::invalid_argument("partition_ccdd: clients must be >= 1");
    if (classes_per_client < 1 || classes_per_client > num_classes)
        throw std::invalid_argument("partition_ccdd: class budget must be in [1, num_classes]");
    if (static_cast<long long>(clients) * classes_per_client < num_classes)
        throw std::invalid_argument("partition_ccdd: clients * class budget cannot cover all classes");

    std::mt19937_64 rng(mix_seed(seed, 0xccd));
    std::vector<int> order(num_classes);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    // Walk the shuffled class list cyclically, handing each client its budget.
    std::vector<std::vector<int>> holders(num_classes);
    int cursor = 0;
    for (int k = 0; k < clients; ++k) {
        for (int j = 0; j < classes_per_client; ++j) {
            holders[order[cursor % num_classes]].push_back(k);
            ++cursor;
        }
    }

    ClientPartition part;
    part.client_indices.resize(clients);
    auto by_class = indices_by_class(ds);
    for (int c = 0; c < num_classes; ++c) {
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto& owners = holders[c];
        if (owners.empty()) continue;
        const std::vector<double> even(owners.size(), 1.0);
        const auto counts = proportional_counts(even, static_cast<int>(idx.size()));
        int pos = 0;
        for (std::size_t o = 0; o < owners.size(); ++o)
            for (int j = 0; j < counts[o]; ++j) part.client_indices[owners[o]].push_back(idx[pos++]);
    }
    repair_empty_clients(part);
    return part;
}

ClientPartition make_partition(const LabeledDataset& ds, const PartitionSpec& spec) {
    switch (spec.scheme) {
        case Scheme::iid: return partition_iid(ds, spec.clients, spec.seed);
        case Scheme::dirichlet: return partition_dirichlet(ds, spec.clients, spec.alpha, spec.seed);
        case Scheme::ccdd:
            return partition_ccdd(ds, spec.clients, spec.classes_per_client, spec.seed);
    }
    throw std::invalid_argument("make_partition: unknown scheme");
}

Matrix true_proportions(const ClientPartition& partition, const LabeledDataset& ds) {
    Matrix p(ds.num_classes, partition.clients(), 0.0);
    for (int k = 0; k < partition.clients(); ++k) {
        const auto& idx = partition.client_indices[k];
        if (idx.empty()) throw std::invalid_argument("true_proportions: empty client");
        for (int i : idx) p(ds.labels[i], k) += 1.0;
        for (int c = 0; c < ds.num_classes; ++c) p(c, k) /= idx.size();
    }
    return p;
}

LabeledDataset extract(const LabeledDataset& ds, const std::vector<int>& indices) {
    LabeledDataset out;
    out.num_classes = ds.num_classes;
    out.features = Matrix(static_cast<int>(indices.size()), ds.feature_dim());
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int src = indices[i];
        std::copy(ds.features.row(src), ds.features.row(src) + ds.feature_dim(),
                  out.features.row(static_cast<int>(i)));
        out.labels[i] = ds.labels[src];
    }
    return out;
}

LabeledDataset subsample_fixed(const LabeledDataset& ds, int max_samples, std::uint64_t seed) {
    if (max_samples < 1) throw std::invalid_argument("subsample_fixed: max_samples must be >= 1");
    if (ds.size() <= max_samples) return ds;

    std::mt19937_64 rng(mix_seed(seed, 0xf5));
    std::vector<std::vector<int>> by_class(ds.num_classes);
    for (int i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

    std::vector<int> present;
    for (int c = 0; c < ds.num_classes; ++c)
        if (!by_class[c].empty()) present.push_back(c);
    const int num_present = static_cast<int>(present.size());

    // Stratified quotas. When the budget covers every present class, each one
    // keeps at least one sample and the rest splits proportionally; otherwise
    // plain proportional allocation (presence cannot be guaranteed).
    std::vector<int> quotas(num_present, 0);
    if (max_samples >= num_present) {
        std::vector<double> headroom(num_present);
        for (int pi = 0; pi < num_present; ++pi)
            headroom[pi] = static_cast<double>(by_class[present[pi]].size() - 1);
        quotas = proportional_counts(headroom, max_samples - num_present);
        for (auto& q : quotas) q += 1;
    } else {
        std::vector<double> weights(num_present);
        for (int pi = 0; pi < num_present; ++pi)
            weights[pi] = static_cast<double>(by_class[present[pi]].size());
        quotas = proportional_counts(weights, max_samples);
    }

    std::vector<int> chosen;
    chosen.reserve(max_samples);
    for (int pi = 0; pi < num_present; ++pi) {
        auto& idx = by_class[present[pi]];
        std::shuffle(idx.begin(), idx.end(), rng);
        const int take = std::min<int>(quotas[pi], static_cast<int>(idx.size()));
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + take);
    }
    std::sort(chosen.begin(), chosen.end());
    return extract(ds, chosen);
}

std::vector<int> class_counts(const LabeledDataset& ds, const std::vector<int>& indices) {
    std::vector<int> counts(ds.num_classes, 0);
    for (int i : indices) counts[ds.labels[i]] += 1;
    return counts;
}

} // namespace bacsa::data

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bacsa/matrix.hpp"

namespace bacsa::data {

struct LabeledDataset {
    Matrix features;          // n x feature_dim
    std::vector<int> labels;  // values in [0, num_classes)
    int num_classes = 0;

    int size() const { return features.rows(); }
    int feature_dim() const { return features.cols(); }
};

// Per-client index lists into a parent dataset; lists are pairwise disjoint
// and together cover the parent.
struct ClientPartition {
    std::vector<std::vector<int>> client_indices;

    int clients() const { return static_cast<int>(client_indices.size()); }
    int client_size(int k) const { return static_cast<int>(client_indices[k].size()); }
};

enum class Scheme { iid, dirichlet, ccdd };

struct PartitionSpec {
    Scheme scheme = Scheme::iid;
    int clients = 20;
    double alpha = 0.5;           // dirichlet concentration
    int classes_per_client = 2;   // ccdd class budget
    std::uint64_t seed = 1;
};

class IdxError : public std::runtime_error {
public:
    enum class Kind { io, bad_magic, truncated, count_mismatch };

    IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Class-balanced Gaussian blobs; class means sit on a seeded unit hypersphere
// scaled by spread, per-sample noise is unit normal.
LabeledDataset gen_synthetic(int num_classes, int per_class, int feature_dim, double spread,
                             std::uint64_t seed);

// IDX image/label pair (the MNIST container format). Pixels scaled to [0,1].
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

ClientPartition partition_iid(const LabeledDataset& ds, int clients, std::uint64_t seed);
ClientPartition partition_dirichlet(const LabeledDataset& ds, int clients, double alpha,
                                    std::uint64_t seed);
ClientPartition partition_ccdd(const LabeledDataset& ds, int clients, int classes_per_client,
                               std::uint64_t seed);
ClientPartition make_partition(const LabeledDataset& ds, const PartitionSpec& spec);

// p(i, k) = share of class i at client k; every column sums to 1.
Matrix true_proportions(const ClientPartition& partition, const LabeledDataset& ds);

LabeledDataset extract(const LabeledDataset& ds, const std::vector<int>& indices);

// At most max_samples rows, sampled without replacement, stratified by class
// where quotas allow; identity when the dataset is already small enough.
LabeledDataset subsample_fixed(const LabeledDataset& ds, int max_samples, std::uint64_t seed);

std::vector<int> class_counts(const LabeledDataset& ds, const std::vector<int>& indices);

} // namespace bacsa::data

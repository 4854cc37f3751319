#pragma once

#include <cstdint>
#include <vector>

#include "bacsa/matrix.hpp"
#include "bacsa/nn.hpp"

namespace bacsa::bias {

// Everything the server learns about client class composition from the
// returned models alone.
struct BiasProfile {
    Matrix beta;          // classes x clients; per-client estimates, columns sum to 1
    Matrix global_beta;   // classes x clients; cross-client scale, all entries sum to 1
    Matrix energy;        // classes x clients; clipped last-layer weight energies
    std::vector<std::vector<bool>> present;  // [client][class] sign-rule flags

    int classes() const { return beta.rows(); }
    int clients() const { return beta.cols(); }
};

struct EstimationErrorReport {
    std::vector<double> kappa;  // per-class percentage error
    double mean_kappa = 0.0;
};

// Mean of max(0, w)^2 over the weights feeding each output neuron.
std::vector<double> class_energy(const nn::NetworkParams& params);

// Per-client class proportion estimate. The energies approximate squared
// sample counts, so the square root is taken before normalizing; all-zero
// energy falls back to uniform. sqrt_energies=false keeps the raw-energy
// normalization for comparison.
std::vector<double> estimate_proportions(const nn::NetworkParams& params,
                                         bool sqrt_energies = true);
std::vector<double> proportions_from_energy(const std::vector<double>& energy,
                                            bool sqrt_energies = true);

// Energies normalized by the total over every client and class, putting all
// clients on one scale. energies[k] is client k's class_energy vector.
Matrix estimate_global_beta(const std::vector<std::vector<double>>& energies);

// present[i] = mean incoming last-layer weight of output neuron i clears tol.
std::vector<bool> sign_profile(const nn::NetworkParams& params, double tol = 1e-6);

// Per-class mean of |p - p_hat| / p * 100 over the clients that actually hold
// the class.
EstimationErrorReport estimation_error(const Matrix& p_true, const Matrix& p_hat);

// Empirical check of the two-class energy ratio against (count_a/count_b)^2.
struct BinaryRatioSetup {
    int feature_dim = 16;
    int hidden_width = 32;
    double spread = 8.0;
    nn::TrainConfig train;
    std::uint64_t seed = 1;
};

double validate_binary_ratio(int count_a, int count_b, const BinaryRatioSetup& setup);

} // namespace bacsa::bias

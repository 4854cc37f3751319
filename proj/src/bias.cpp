#include "bacsa/bias.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bacsa/data.hpp"

namespace bacsa::bias {

std::vector<double> class_energy(const nn::NetworkParams& params) {
    const Matrix& w = params.layers.back().weights;
    std::vector<double> energy(w.rows(), 0.0);
    for (int i = 0; i < w.rows(); ++i) {
        double acc = 0.0;
        const double* row = w.row(i);
        for (int j = 0; j < w.cols(); ++j) {
            const double clipped = std::max(0.0, row[j]);
            acc += clipped * clipped;
        }
        energy[i] = acc / w.cols();
    }
    return energy;
}

std::vector<double> proportions_from_energy(const std::vector<double>& energy,
                                            bool sqrt_energies) {
    std::vector<double> p(energy.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < energy.size(); ++i) {
        p[i] = sqrt_energies ? std::sqrt(energy[i]) : energy[i];
        total += p[i];
    }
    if (total <= 0.0) {
        std::fill(p.begin(), p.end(), 1.0 / p.size());
        return p;
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<double> estimate_proportions(const nn::NetworkParams& params, bool sqrt_energies) {
    return proportions_from_energy(class_energy(params), sqrt_energies);
}

Matrix estimate_global_beta(const std::vector<std::vector<double>>& energies) {
    if (energies.empty()) throw std::invalid_argument("estimate_global_beta: no clients");
    const int clients = static_cast<int>(energies.size());
    const int classes = static_cast<int>(energies.front().size());
    double total = 0.0;
    for (const auto& e : energies) {
        if (static_cast<int>(e.size()) != classes)
            throw std::invalid_argument("estimate_global_beta: ragged energy vectors");
        for (double v : e) total += v;
    }
    if (total <= 0.0) throw std::runtime_error("estimate_global_beta: degenerate all-zero profile");

    Matrix beta(classes, clients);
    for (int k = 0; k < clients; ++k)
        for (int i = 0; i < classes; ++i) beta(i, k) = energies[k][i] / total;
    return beta;
}

std::vector<bool> sign_profile(const nn::NetworkParams& params, double tol) {
    if (tol < 0) throw std::invalid_argument("sign_profile: tol must be >= 0");
    const Matrix& w = params.layers.back().weights;
    std::vector<bool> present(w.rows());
    for (int i = 0; i < w.rows(); ++i) {
        double mean = 0.0;
        const double* row = w.row(i);
        for (int j = 0; j < w.cols(); ++j) mean += row[j];
        mean /= w.cols();
        present[i] = mean > tol;
    }
    return present;
}

EstimationErrorReport estimation_error(const Matrix& p_true, const Matrix& p_hat) {
    if (!p_true.same_shape(p_hat))
        throw std::invalid_argument("estimation_error: shape mismatch");
    EstimationErrorReport report;
    report.kappa.assign(p_true.rows(), 0.0);
    double total = 0.0;
    int classes_counted = 0;
    for (int i = 0; i < p_true.rows(); ++i) {
        double acc = 0.0;
        int holders = 0;
        for (int k = 0; k < p_true.cols(); ++k) {
            if (p_true(i, k) <= 0.0) continue;
            acc += std::abs(p_true(i, k) - p_hat(i, k)) / p_true(i, k) * 100.0;
            ++holders;
        }
        report.kappa[i] = holders > 0 ? acc / holders : 0.0;
        if (holders > 0) {
            total += report.kappa[i];
            ++classes_counted;
        }
    }
    report.mean_kappa = classes_counted > 0 ? total / classes_counted : 0.0;
    return report;
}

double validate_binary_ratio(int count_a, int count_b, const BinaryRatioSetup& setup) {
    if (count_a < 50 || count_b < 50)
        throw std::invalid_argument("validate_binary_ratio: need at least 50 samples per class");

    const int per_class = std::max(count_a, count_b);
    data::LabeledDataset pool = data::gen_synthetic(2, per_class, setup.feature_dim,
                                                    setup.spread, mix_seed(setup.seed, 0xb1));
    std::vector<int> keep;
    int seen_a = 0;
    int seen_b = 0;
    for (int i = 0; i < pool.size(); ++i) {
        if (pool.labels[i] == 0 && seen_a < count_a) {
            keep.push_back(i);
            ++seen_a;
        } else if (pool.labels[i] == 1 && seen_b < count_b) {
            keep.push_back(i);
            ++seen_b;
        }
    }
    data::LabeledDataset local = data::extract(pool, keep);

    const auto spec = nn::make_layer_specs(setup.feature_dim, {setup.hidden_width}, 2);
    nn::NetworkParams model = nn::init_bacsa(spec, mix_seed(setup.seed, 0xb2));
    model = nn::train_local(model, local.features, local.labels, setup.train,
                            mix_seed(setup.seed, 0xb3));

    const auto energy = class_energy(model);
    if (energy[1] <= 0.0) {
        if (energy[0] <= 0.0)
            throw std::runtime_error("validate_binary_ratio: degenerate training, zero energies");
        return std::numeric_limits<double>::infinity();
    }
    return energy[0] / energy[1];
}

} // namespace bacsa::bias

#pragma once

#include <cstdint>
#include <vector>

#include "bacsa/matrix.hpp"

namespace bacsa::nn {

enum class Activation { relu, softmax_output };

struct LayerSpec {
    int input_dim = 0;
    int output_dim = 0;
    Activation activation = Activation::relu;
};

// Builds the usual chain: input_dim -> hidden... -> num_classes with softmax output.
std::vector<LayerSpec> make_layer_specs(int input_dim, const std::vector<int>& hidden,
                                        int num_classes);

struct Layer {
    Matrix weights;            // output_dim x input_dim
    std::vector<double> bias;  // output_dim
};

struct NetworkParams {
    std::vector<Layer> layers;
    std::uint64_t seed = 0;

    int input_dim() const { return layers.front().weights.cols(); }
    int output_dim() const { return layers.back().weights.rows(); }
    // Width of the layer feeding the output layer.
    int last_hidden_dim() const { return layers.back().weights.cols(); }

    friend bool operator==(const NetworkParams& a, const NetworkParams& b);
};

struct ForwardTrace {
    Matrix input;              // batch x input_dim
    std::vector<Matrix> pre;   // per layer, batch x output_dim
    std::vector<Matrix> act;   // per layer, batch x output_dim; last holds probabilities

    const Matrix& probs() const { return act.back(); }
};

struct TrainConfig {
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    int epochs = 5;
    int batch_size = 32;
};

// Gradient bundle, same shapes as the parameters they belong to.
using Gradients = std::vector<Layer>;

// Constant small last-layer init sqrt(1/(I_f*L*M)); hidden layers uniform in
// the same +-bound, biases zero.
NetworkParams init_bacsa(const std::vector<LayerSpec>& spec, std::uint64_t seed);

// Per-layer uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
NetworkParams init_glorot(const std::vector<LayerSpec>& spec, std::uint64_t seed);

ForwardTrace forward(const NetworkParams& params, const Matrix& batch);

// Mean over the batch of -log(probability of the true class).
double loss_nll(const ForwardTrace& trace, const std::vector<int>& labels);

// Manual backpropagation for the relu/softmax chain; gradients averaged over the batch.
Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const std::vector<int>& labels);

// W <- W - lr * (grad + weight_decay * W), all layers, biases included.
NetworkParams sgd_step(NetworkParams params, const Gradients& grads, const TrainConfig& cfg);

// epochs of mini-batch SGD over a seeded shuffle; the last partial batch is kept.
NetworkParams train_local(const NetworkParams& params, const Matrix& features,
                          const std::vector<int>& labels, const TrainConfig& cfg,
                          std::uint64_t seed);

// Argmax accuracy; ties resolve to the lowest class index.
double evaluate(const NetworkParams& params, const Matrix& features,
                const std::vector<int>& labels);

} // namespace bacsa::nn

#include "bacsa/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace bacsa::nn {

namespace {

constexpr double kProbFloor = 1e-12;

void validate_spec(const std::vector<LayerSpec>& spec) {
    if (spec.empty()) throw std::invalid_argument("layer spec: empty");
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (spec[i].input_dim < 1 || spec[i].output_dim < 1)
            throw std::invalid_argument("layer spec: dimensions must be >= 1 (layer " +
                                        std::to_string(i) + ")");
        if (i + 1 < spec.size() && spec[i].output_dim != spec[i + 1].input_dim)
            throw std::invalid_argument("layer spec: shape chain mismatch at layer " +
                                        std::to_string(i));
        const bool last = i + 1 == spec.size();
        if (last && spec[i].activation != Activation::softmax_output)
            throw std::invalid_argument("layer spec: last layer must be softmax output");
        if (!last && spec[i].activation == Activation::softmax_output)
            throw std::invalid_argument("layer spec: softmax allowed on the last layer only");
    }
}

NetworkParams make_zeroed(const std::vector<LayerSpec>& spec, std::uint64_t seed) {
    NetworkParams p;
    p.seed = seed;
    p.layers.reserve(spec.size());
    for (const auto& s : spec) {
        Layer l;
        l.weights = Matrix(s.output_dim, s.input_dim, 0.0);
        l.bias.assign(s.output_dim, 0.0);
        p.layers.push_back(std::move(l));
    }
    return p;
}

void softmax_row(double* z, int n) {
    double mx = z[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, z[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        z[i] = std::exp(z[i] - mx);
        sum += z[i];
    }
    for (int i = 0; i < n; ++i) z[i] /= sum;
}

void check_labels(const std::vector<int>& labels, int batch, int num_classes) {
    if (static_cast<int>(labels.size()) != batch)
        throw std::invalid_argument("labels: count does not match batch size");
    for (int y : labels)
        if (y < 0 || y >= num_classes)
            throw std::invalid_argument("labels: value out of range");
}

} // namespace

bool operator==(const NetworkParams& a, const NetworkParams& b) {
    if (a.seed != b.seed || a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i)
        if (!(a.layers[i].weights == b.layers[i].weights) || a.layers[i].bias != b.layers[i].bias)
            return false;
    return true;
}

std::vector<LayerSpec> make_layer_specs(int input_dim, const std::vector<int>& hidden,
                                        int num_classes) {
    std::vector<LayerSpec> spec;
    int in = input_dim;
    for (int h : hidden) {
        spec.push_back({in, h, Activation::relu});
        in = h;
    }
    spec.push_back({in, num_classes, Activation::softmax_output});
    return spec;
}

NetworkParams init_bacsa(const std::vector<LayerSpec>& spec, std::uint64_t seed) {
    validate_spec(spec);
    NetworkParams p = make_zeroed(spec, seed);
    const double input_features = spec.front().input_dim;
    const double pre_output = spec.back().input_dim;
    const double outputs = spec.back().output_dim;
    const double w0 = std::sqrt(1.0 / (input_features * pre_output * outputs));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-w0, w0);
    for (std::size_t i = 0; i + 1 < p.layers.size(); ++i)
        for (double& w : p.layers[i].weights.data()) w = uni(rng);
    for (double& w : p.layers.back().weights.data()) w = w0;
    return p;
}

NetworkParams init_glorot(const std::vector<LayerSpec>& spec, std::uint64_t seed) {
    validate_spec(spec);
    NetworkParams p = make_zeroed(spec, seed);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const double bound = std::sqrt(6.0 / (spec[i].input_dim + spec[i].output_dim));
        std::uniform_real_distribution<double> uni(-bound, bound);
        for (double& w : p.layers[i].weights.data()) w = uni(rng);
    }
    return p;
}

ForwardTrace forward(const NetworkParams& params, const Matrix& batch) {
    if (batch.cols() != params.input_dim())
        throw std::invalid_argument("forward: feature dimension mismatch");
    const int n = batch.rows();
    ForwardTrace t;
    t.input = batch;
    t.pre.reserve(params.layers.size());
    t.act.reserve(params.layers.size());

    const Matrix* prev = &t.input;
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const Layer& layer = params.layers[li];
        const int out = layer.weights.rows();
        const int in = layer.weights.cols();
        Matrix z(n, out);
        for (int r = 0; r < n; ++r) {
            const double* x = prev->row(r);
            double* zr = z.row(r);
            for (int o = 0; o < out; ++o) {
                const double* w = layer.weights.row(o);
                double acc = layer.bias[o];
                for (int c = 0; c < in; ++c) acc += w[c] * x[c];
                zr[o] = acc;
            }
        }
        t.pre.push_back(z);
        Matrix a = z;
        const bool last = li + 1 == params.layers.size();
        if (last) {
            for (int r = 0; r < n; ++r) softmax_row(a.row(r), out);
        } else {
            for (double& v : a.data()) v = std::max(0.0, v);
        }
        t.act.push_back(std::move(a));
        prev = &t.act.back();
    }
    return t;
}

double loss_nll(const ForwardTrace& trace, const std::vector<int>& labels) {
    const Matrix& probs = trace.probs();
    check_labels(labels, probs.rows(), probs.cols());
    double sum = 0.0;
    for (int r = 0; r < probs.rows(); ++r)
        sum += -std::log(std::max(probs(r, labels[r]), kProbFloor));
    return sum / probs.rows();
}

Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const std::vector<int>& labels) {
    const int n = trace.input.rows();
    const int num_layers = static_cast<int>(params.layers.size());
    check_labels(labels, n, params.output_dim());
    if (static_cast<int>(trace.act.size()) != num_layers ||
        trace.input.cols() != params.input_dim())
        throw std::invalid_argument("backward: trace does not match parameters");

    Gradients grads;
    grads.resize(num_layers);
    // delta for the softmax/NLL head: (probs - onehot) / batch
    Matrix delta = trace.probs();
    for (int r = 0; r < n; ++r) delta(r, labels[r]) -= 1.0;
    for (double& v : delta.data()) v /= n;

    for (int li = num_layers - 1; li >= 0; --li) {
        const Layer& layer = params.layers[li];
        const int out = layer.weights.rows();
        const int in = layer.weights.cols();
        const Matrix& below = li == 0 ? trace.input : trace.act[li - 1];

        Layer g;
        g.weights = Matrix(out, in, 0.0);
        g.bias.assign(out, 0.0);
        for (int r = 0; r < n; ++r) {
            const double* d = delta.row(r);
            const double* a = below.row(r);
            for (int o = 0; o < out; ++o) {
                if (d[o] == 0.0) continue;
                double* gw = g.weights.row(o);
                for (int c = 0; c < in; ++c) gw[c] += d[o] * a[c];
                g.bias[o] += d[o];
            }
        }
        grads[li] = std::move(g);

        if (li > 0) {
            // delta_below = (delta . W) masked by relu'(pre)
            Matrix next(n, in, 0.0);
            const Matrix& pre = trace.pre[li - 1];
            for (int r = 0; r < n; ++r) {
                const double* d = delta.row(r);
                double* nd = next.row(r);
                for (int o = 0; o < out; ++o) {
                    if (d[o] == 0.0) continue;
                    const double* w = layer.weights.row(o);
                    for (int c = 0; c < in; ++c) nd[c] += d[o] * w[c];
                }
                const double* pz = pre.row(r);
                for (int c = 0; c < in; ++c)
                    if (pz[c] <= 0.0) nd[c] = 0.0;
            }
            delta = std::move(next);
        }
    }
    return grads;
}

NetworkParams sgd_step(NetworkParams params, const Gradients& grads, const TrainConfig& cfg) {
    if (grads.size() != params.layers.size())
        throw std::invalid_argument("sgd_step: gradient shape mismatch");
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        Layer& l = params.layers[li];
        const Layer& g = grads[li];
        if (!l.weights.same_shape(g.weights) || l.bias.size() != g.bias.size())
            throw std::invalid_argument("sgd_step: gradient shape mismatch");
        auto& w = l.weights.data();
        const auto& gw = g.weights.data();
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] -= cfg.learning_rate * (gw[i] + cfg.weight_decay * w[i]);
        for (std::size_t i = 0; i < l.bias.size(); ++i)
            l.bias[i] -= cfg.learning_rate * (g.bias[i] + cfg.weight_decay * l.bias[i]);
    }
    return params;
}

NetworkParams train_local(const NetworkParams& params, const Matrix& features,
                          const std::vector<int>& labels, const TrainConfig& cfg,
                          std::uint64_t seed) {
    const int n = features.rows();
    if (n == 0) throw std::invalid_argument("train_local: empty dataset");
    check_labels(labels, n, params.output_dim());
    if (cfg.batch_size < 1) throw std::invalid_argument("train_local: batch_size must be >= 1");

    NetworkParams model = params;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int count = std::min(cfg.batch_size, n - start);
            Matrix batch(count, features.cols());
            std::vector<int> batch_labels(count);
            for (int i = 0; i < count; ++i) {
                const int src = order[start + i];
                std::copy(features.row(src), features.row(src) + features.cols(), batch.row(i));
                batch_labels[i] = labels[src];
            }
            ForwardTrace trace = forward(model, batch);
            Gradients grads = backward(model, trace, batch_labels);
            model = sgd_step(std::move(model), grads, cfg);
        }
    }
    return model;
}

double evaluate(const NetworkParams& params, const Matrix& features,
                const std::vector<int>& labels) {
    const int n = features.rows();
    if (n == 0) throw std::invalid_argument("evaluate: empty test set");
    ForwardTrace trace = forward(params, features);
    const Matrix& probs = trace.probs();
    check_labels(labels, n, probs.cols());
    int hits = 0;
    for (int r = 0; r < n; ++r) {
        int best = 0;
        const double* p = probs.row(r);
        for (int c = 1; c < probs.cols(); ++c)
            if (p[c] > p[best]) best = c;
        if (best == labels[r]) ++hits;
    }
    return static_cast<double>(hits) / n;
}

} // namespace bacsa::nn

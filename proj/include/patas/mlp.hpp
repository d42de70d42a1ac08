#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "patas/rng.hpp"

namespace patas::nn {

/// Per-layer activation record for one forward pass. Layer 0 is the input;
/// "active" means value strictly > 0 (inputs and ReLU outputs); the output
/// layer is always fully included.
struct ActivationTrace {
    std::vector<std::vector<std::size_t>> active_nodes;
};

/// Gradients and activations captured for one training batch, measured at the
/// pre-update parameters. Gradients are batch-averaged.
struct BatchTrace {
    std::vector<std::vector<double>> weight_gradients;  // [layer][i * fan_in + j]
    std::vector<std::vector<double>> bias_gradients;    // [layer][i]
    std::vector<std::vector<double>> mean_activations;  // [layer][node], batch mean, incl. input layer
    double loss = 0.0;
};

/// Dense feedforward network: ReLU hidden layers, Softmax output, trained by
/// plain SGD on cross-entropy.
class MlpModel {
  public:
    MlpModel() = default;

    MlpModel(std::vector<std::size_t> layer_sizes, std::uint64_t seed)
        : sizes_(std::move(layer_sizes)) {
        if (sizes_.size() < 2)
            throw std::invalid_argument("MlpModel: need at least input and output layers");
        for (auto s : sizes_)
            if (s < 1) throw std::invalid_argument("MlpModel: layer sizes must be >= 1");
        Rng rng(seed);
        weights_.resize(num_layers());
        biases_.resize(num_layers());
        for (std::size_t l = 0; l < num_layers(); ++l) {
            const std::size_t fan_in = sizes_[l];
            const std::size_t fan_out = sizes_[l + 1];
            const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            weights_[l].resize(fan_out * fan_in);
            for (auto& w : weights_[l]) w = rng.uniform(-scale, scale);
            biases_[l].assign(fan_out, 0.0);
        }
    }

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t num_layers() const { return sizes_.size() - 1; }  // weight layers
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }

    double weight(std::size_t layer, std::size_t i, std::size_t j) const {
        return weights_[layer][i * sizes_[layer] + j];
    }
    double& weight(std::size_t layer, std::size_t i, std::size_t j) {
        return weights_[layer][i * sizes_[layer] + j];
    }
    double bias(std::size_t layer, std::size_t i) const { return biases_[layer][i]; }
    double& bias(std::size_t layer, std::size_t i) { return biases_[layer][i]; }

    const std::vector<std::vector<double>>& weights() const { return weights_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }
    std::vector<std::vector<double>>& weights() { return weights_; }
    std::vector<std::vector<double>>& biases() { return biases_; }

    /// Forward pass returning output probabilities; optionally fills the
    /// activation trace and the per-layer post-activations.
    std::vector<double> forward(const std::vector<double>& x, ActivationTrace* trace = nullptr,
                                std::vector<std::vector<double>>* activations = nullptr) const {
        if (x.size() != input_size())
            throw std::invalid_argument("forward: input size " + std::to_string(x.size()) +
                                        " != " + std::to_string(input_size()));
        std::vector<std::vector<double>> acts;
        acts.reserve(sizes_.size());
        acts.push_back(x);
        for (std::size_t l = 0; l < num_layers(); ++l) {
            const auto& in = acts.back();
            std::vector<double> out(sizes_[l + 1]);
            for (std::size_t i = 0; i < out.size(); ++i) {
                double z = biases_[l][i];
                const double* wrow = &weights_[l][i * sizes_[l]];
                for (std::size_t j = 0; j < in.size(); ++j) z += wrow[j] * in[j];
                out[i] = z;
            }
            if (l + 1 == num_layers()) {
                softmax_inplace(out);
            } else {
                for (auto& v : out) v = v > 0 ? v : 0.0;  // ReLU
            }
            acts.push_back(std::move(out));
        }
        if (trace) {
            trace->active_nodes.assign(sizes_.size(), {});
            for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
                for (std::size_t i = 0; i < acts[l].size(); ++i)
                    if (acts[l][i] > 0) trace->active_nodes[l].push_back(i);
            auto& out_layer = trace->active_nodes.back();
            out_layer.resize(output_size());
            for (std::size_t i = 0; i < output_size(); ++i) out_layer[i] = i;
        }
        std::vector<double> probs = acts.back();
        if (activations) *activations = std::move(acts);
        return probs;
    }

    /// One SGD step on the batch. Returns the trace with gradients measured
    /// before the update; throws on non-finite loss.
    BatchTrace train_batch(const std::vector<std::vector<double>>& xs,
                           const std::vector<std::size_t>& ys, double learning_rate) {
        if (xs.empty() || xs.size() != ys.size())
            throw std::invalid_argument("train_batch: empty batch or feature/label count mismatch");
        const double inv_n = 1.0 / static_cast<double>(xs.size());

        BatchTrace trace;
        trace.weight_gradients.resize(num_layers());
        trace.bias_gradients.resize(num_layers());
        trace.mean_activations.assign(sizes_.size(), {});
        for (std::size_t l = 0; l < num_layers(); ++l) {
            trace.weight_gradients[l].assign(weights_[l].size(), 0.0);
            trace.bias_gradients[l].assign(biases_[l].size(), 0.0);
        }
        for (std::size_t l = 0; l < sizes_.size(); ++l) trace.mean_activations[l].assign(sizes_[l], 0.0);

        double loss = 0.0;
        for (std::size_t s = 0; s < xs.size(); ++s) {
            if (ys[s] >= output_size())
                throw std::invalid_argument("train_batch: label out of range");
            std::vector<std::vector<double>> acts;
            std::vector<double> probs = forward(xs[s], nullptr, &acts);
            loss += -std::log(std::max(probs[ys[s]], 1e-300));
            for (std::size_t l = 0; l < sizes_.size(); ++l)
                for (std::size_t i = 0; i < sizes_[l]; ++i)
                    trace.mean_activations[l][i] += acts[l][i] * inv_n;

            // delta at output: softmax + cross-entropy
            std::vector<double> delta = probs;
            delta[ys[s]] -= 1.0;
            for (std::size_t l = num_layers(); l-- > 0;) {
                const auto& in = acts[l];
                for (std::size_t i = 0; i < sizes_[l + 1]; ++i) {
                    const double di = delta[i] * inv_n;
                    double* grow = &trace.weight_gradients[l][i * sizes_[l]];
                    for (std::size_t j = 0; j < in.size(); ++j) grow[j] += di * in[j];
                    trace.bias_gradients[l][i] += di;
                }
                if (l == 0) break;
                std::vector<double> prev(sizes_[l], 0.0);
                for (std::size_t j = 0; j < sizes_[l]; ++j) {
                    if (acts[l][j] <= 0) continue;  // ReLU gate
                    double acc = 0.0;
                    for (std::size_t i = 0; i < sizes_[l + 1]; ++i)
                        acc += weights_[l][i * sizes_[l] + j] * delta[i];
                    prev[j] = acc;
                }
                delta = std::move(prev);
            }
        }
        trace.loss = loss * inv_n;
        if (!std::isfinite(trace.loss))
            throw std::runtime_error("train_batch: non-finite loss (" + std::to_string(trace.loss) +
                                     "), aborting");

        for (std::size_t l = 0; l < num_layers(); ++l) {
            for (std::size_t k = 0; k < weights_[l].size(); ++k)
                weights_[l][k] -= learning_rate * trace.weight_gradients[l][k];
            for (std::size_t k = 0; k < biases_[l].size(); ++k)
                biases_[l][k] -= learning_rate * trace.bias_gradients[l][k];
        }
        return trace;
    }

    std::size_t predict(const std::vector<double>& x) const {
        std::vector<double> p = forward(x);
        return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    }

  private:
    static void softmax_inplace(std::vector<double>& z) {
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (auto& v : z) {
            v = std::exp(v - zmax);
            sum += v;
        }
        for (auto& v : z) v /= sum;
    }

    std::vector<std::size_t> sizes_;
    std::vector<std::vector<double>> weights_;  // [layer][i * fan_in + j]
    std::vector<std::vector<double>> biases_;
};

inline MlpModel init_model(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed) {
    return MlpModel(layer_sizes, seed);
}

}  // namespace patas::nn

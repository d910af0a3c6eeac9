// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hefraud/ckks.hpp"
#include "hefraud/data.hpp"

namespace hefraud::nn {

struct Layer {
    size_t inputs = 0;
    size_t outputs = 0;
    std::vector<double> weights;  // row-major [outputs][inputs]
    std::vector<double> bias;     // [outputs]

    double weight(size_t row, size_t col) const { return weights[row * inputs + col]; }
};

/// Feedforward classifier with square activations on hidden layers and a
/// single logit output. The standard shape is one hidden layer; deeper
/// models exist only to reproduce the depth-limit finding and are rejected
/// by the homomorphic path unless explicitly unlocked.
struct NnModel {
    size_t input_dim = 0;
    std::vector<Layer> layers;  // hidden layers, then the 1-output layer

    size_t hidden_layer_count() const { return layers.empty() ? 0 : layers.size() - 1; }
    size_t hidden_size() const { return layers.empty() ? 0 : layers.front().outputs; }
};

struct NnTrainConfig {
    std::vector<size_t> hidden_layer_sizes{47};
    double pos_weight = 1.0;
    size_t epochs = 100;
    double learning_rate = 0.05;
    std::optional<size_t> undersampling_num_negatives;
    uint64_t seed = 0;
};

struct NnTrainLog {
    std::vector<double> epoch_losses;
};

double sigmoid(double x);

/// logit = W_out (.. square(W1 x + b1) ..) + b_out
double forward_plain(const NnModel& model, std::span<const double> x);
double predict_proba(const NnModel& model, std::span<const double> x);
int predict_label(const NnModel& model, std::span<const double> x);

std::vector<double> features_of(const data::TransactionRecord& rec);

/// Weighted binary cross-entropy with logits:
/// L = -mean(pos_weight*y*log(sigmoid(z)) + (1-y)*log(1-sigmoid(z))).
double training_loss(const NnModel& model, const std::vector<std::vector<double>>& inputs,
                     const std::vector<int>& labels, double pos_weight);

/// Analytic full-batch gradient of training_loss, flattened in layer order
/// (weights row-major, then bias, per layer). Exposed for gradient checking.
std::vector<double> loss_gradients(const NnModel& model,
                                   const std::vector<std::vector<double>>& inputs,
                                   const std::vector<int>& labels, double pos_weight);

std::vector<double> flatten_parameters(const NnModel& model);
void unflatten_parameters(NnModel& model, std::span<const double> flat);

/// Full-batch gradient descent with seeded +-1/sqrt(fan_in) initialization.
NnModel train_nn(const data::Records& dataset, const NnTrainConfig& config,
                 NnTrainLog* log = nullptr);

std::string save_model(const NnModel& model);
NnModel load_model(const std::string& json_text);

// --- homomorphic path ---

/// Rotation steps the packed matvec uses for this model shape: powers of two
/// (and their negatives) up to N/4.
std::vector<int64_t> required_rotation_steps(const NnModel& model, size_t ring_degree);

/// Levels consumed by one homomorphic forward pass.
int levels_required(const NnModel& model);

/// Client-side slot layout: x in slots 0..d-1, zeros elsewhere.
std::vector<double> pack_input(std::span<const double> x);

/// Evaluates the classifier on a packed encrypted input using plaintext
/// weights: per layer, the input block is replicated to the padded output
/// count, multiplied by the row-packed weight plaintext, rotate-and-summed
/// within blocks, and biased; hidden layers are squared in place. The logit
/// lands in slot 0.
class HeNnEvaluator {
public:
    HeNnEvaluator(ckks::ContextPtr context, std::shared_ptr<const ckks::EvalKeys> keys,
                  NnModel model, bool allow_multi_hidden = false);

    ckks::Ciphertext forward(const ckks::Ciphertext& packed_input) const;

    const NnModel& model() const { return model_; }

private:
    ckks::ContextPtr ctx_;
    ckks::Evaluator eval_;
    NnModel model_;
};

}  // namespace hefraud::nn

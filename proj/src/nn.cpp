// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include "hefraud/nn.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "hefraud/errors.hpp"
#include "hefraud/rng.hpp"

namespace hefraud::nn {

using nlohmann::json;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

size_t next_pow2(size_t v) {
    size_t p = 1;
    while (p < v) p <<= 1;
    return p;
}

/// Per-sample activations for backprop: pre[l] = W a + b, post[l] = pre^2
/// (hidden) or pre (output).
struct ForwardTrace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

ForwardTrace run_forward(const NnModel& model, std::span<const double> x) {
    ForwardTrace trace;
    std::vector<double> current(x.begin(), x.end());
    for (size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        if (current.size() != layer.inputs)
            throw ShapeError("layer " + std::to_string(l) + " expects " +
                             std::to_string(layer.inputs) + " inputs, got " +
                             std::to_string(current.size()));
        std::vector<double> z(layer.outputs, 0.0);
        for (size_t j = 0; j < layer.outputs; ++j) {
            double acc = layer.bias[j];
            const double* row = layer.weights.data() + j * layer.inputs;
            for (size_t i = 0; i < layer.inputs; ++i) acc += row[i] * current[i];
            z[j] = acc;
        }
        trace.pre.push_back(z);
        bool is_hidden = l + 1 < model.layers.size();
        if (is_hidden)
            for (auto& v : z) v = v * v;
        trace.post.push_back(z);
        current = trace.post.back();
    }
    return trace;
}

void validate_model(const NnModel& model) {
    if (model.layers.empty()) throw ShapeError("model has no layers");
    size_t expect = model.input_dim;
    for (const auto& layer : model.layers) {
        if (layer.inputs != expect) throw ShapeError("layer input size mismatch");
        if (layer.outputs < 1) throw ShapeError("layer has no outputs");
        if (layer.weights.size() != layer.inputs * layer.outputs ||
            layer.bias.size() != layer.outputs)
            throw ShapeError("layer parameter size mismatch");
        expect = layer.outputs;
    }
    if (model.layers.back().outputs != 1) throw ShapeError("output layer must have one unit");
}

}  // namespace

double forward_plain(const NnModel& model, std::span<const double> x) {
    if (x.size() != model.input_dim) throw ShapeError("input dimension mismatch");
    return run_forward(model, x).post.back()[0];
}

double predict_proba(const NnModel& model, std::span<const double> x) {
    return sigmoid(forward_plain(model, x));
}

int predict_label(const NnModel& model, std::span<const double> x) {
    return predict_proba(model, x) >= 0.5 ? 1 : 0;
}

std::vector<double> features_of(const data::TransactionRecord& rec) {
    std::vector<double> out;
    out.reserve(rec.features.size());
    for (const auto& [_, v] : rec.features) out.push_back(v);
    return out;
}

double training_loss(const NnModel& model, const std::vector<std::vector<double>>& inputs,
                     const std::vector<int>& labels, double pos_weight) {
    double loss = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        double z = forward_plain(model, inputs[i]);
        // numerically stable log-sigmoid forms
        double log_sig = z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
        double log_one_minus = z >= 0 ? -z - std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
        loss -= labels[i] == 1 ? pos_weight * log_sig : log_one_minus;
    }
    return loss / double(inputs.size());
}

std::vector<double> flatten_parameters(const NnModel& model) {
    std::vector<double> flat;
    for (const auto& layer : model.layers) {
        flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

void unflatten_parameters(NnModel& model, std::span<const double> flat) {
    size_t pos = 0;
    for (auto& layer : model.layers) {
        std::copy(flat.begin() + long(pos), flat.begin() + long(pos + layer.weights.size()),
                  layer.weights.begin());
        pos += layer.weights.size();
        std::copy(flat.begin() + long(pos), flat.begin() + long(pos + layer.bias.size()),
                  layer.bias.begin());
        pos += layer.bias.size();
    }
    if (pos != flat.size()) throw ShapeError("flat parameter size mismatch");
}

std::vector<double> loss_gradients(const NnModel& model,
                                   const std::vector<std::vector<double>>& inputs,
                                   const std::vector<int>& labels, double pos_weight) {
    std::vector<Layer> grads;
    for (const auto& layer : model.layers) {
        Layer g;
        g.inputs = layer.inputs;
        g.outputs = layer.outputs;
        g.weights.assign(layer.weights.size(), 0.0);
        g.bias.assign(layer.bias.size(), 0.0);
        grads.push_back(std::move(g));
    }

    double inv_n = 1.0 / double(inputs.size());
    for (size_t s = 0; s < inputs.size(); ++s) {
        ForwardTrace trace = run_forward(model, inputs[s]);
        double z = trace.post.back()[0];
        double sig = sigmoid(z);
        // d/dz of the weighted BCE term
        double delta_out =
            inv_n * (labels[s] == 1 ? pos_weight * (sig - 1.0) : sig);

        std::vector<double> delta{delta_out};
        for (size_t li = model.layers.size(); li-- > 0;) {
            const Layer& layer = model.layers[li];
            const std::vector<double>& input_act =
                li == 0 ? inputs[s] : trace.post[li - 1];
            Layer& g = grads[li];
            for (size_t j = 0; j < layer.outputs; ++j) {
                g.bias[j] += delta[j];
                double* grow = g.weights.data() + j * layer.inputs;
                for (size_t i = 0; i < layer.inputs; ++i) grow[i] += delta[j] * input_act[i];
            }
            if (li == 0) break;
            // delta for the previous layer, through the square activation
            std::vector<double> prev(layer.inputs, 0.0);
            for (size_t i = 0; i < layer.inputs; ++i) {
                double acc = 0.0;
                for (size_t j = 0; j < layer.outputs; ++j)
                    acc += layer.weight(j, i) * delta[j];
                prev[i] = acc * 2.0 * trace.pre[li - 1][i];
            }
            delta = std::move(prev);
        }
    }

    std::vector<double> flat;
    for (const auto& g : grads) {
        flat.insert(flat.end(), g.weights.begin(), g.weights.end());
        flat.insert(flat.end(), g.bias.begin(), g.bias.end());
    }
    return flat;
}

NnModel train_nn(const data::Records& dataset, const NnTrainConfig& config, NnTrainLog* log) {
    if (config.epochs < 1) throw ParameterError("epochs must be >= 1");
    if (!(config.pos_weight > 0)) throw ParameterError("pos_weight must be positive");
    if (config.hidden_layer_sizes.empty())
        throw ParameterError("at least one hidden layer size required");

    data::Records resampled;
    const data::Records* records = &dataset;
    if (config.undersampling_num_negatives) {
        resampled = data::undersample(dataset, *config.undersampling_num_negatives, config.seed);
        records = &resampled;
    }
    if (records->empty()) throw TrainingError("empty training set");

    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    for (const auto& rec : *records) {
        inputs.push_back(features_of(rec));
        labels.push_back(rec.label);
    }
    bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
    bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
    if (!has_pos || !has_neg) throw TrainingError("training requires both classes");

    NnModel model;
    model.input_dim = inputs.front().size();
    Rng rng(config.seed);
    size_t fan_in = model.input_dim;
    auto add_layer = [&](size_t outputs) {
        Layer layer;
        layer.inputs = fan_in;
        layer.outputs = outputs;
        double bound = 1.0 / std::sqrt(double(fan_in));
        layer.weights.resize(fan_in * outputs);
        layer.bias.assign(outputs, 0.0);
        for (auto& w : layer.weights) w = (rng.uniform_real() * 2 - 1) * bound;
        model.layers.push_back(std::move(layer));
        fan_in = outputs;
    };
    for (size_t h : config.hidden_layer_sizes) add_layer(h);
    add_layer(1);

    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<double> grads = loss_gradients(model, inputs, labels, config.pos_weight);
        std::vector<double> params = flatten_parameters(model);
        for (size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * grads[i];
        unflatten_parameters(model, params);

        double loss = training_loss(model, inputs, labels, config.pos_weight);
        if (!std::isfinite(loss)) throw DivergenceError("training loss diverged (not finite)");
        if (log) log->epoch_losses.push_back(loss);
    }
    return model;
}

std::string save_model(const NnModel& model) {
    validate_model(model);
    json j;
    j["activation"] = "square";
    j["d"] = model.input_dim;
    if (model.layers.size() == 2) {
        // canonical one-hidden-layer schema
        j["h"] = model.layers[0].outputs;
        j["W1"] = model.layers[0].weights;
        j["b1"] = model.layers[0].bias;
        j["W2"] = model.layers[1].weights;
        j["b2"] = model.layers[1].bias[0];
    } else {
        json layers = json::array();
        for (const auto& layer : model.layers)
            layers.push_back(json{{"inputs", layer.inputs},
                                  {"outputs", layer.outputs},
                                  {"W", layer.weights},
                                  {"b", layer.bias}});
        j["layers"] = layers;
    }
    return j.dump();
}

NnModel load_model(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), "$");
    }
    NnModel model;
    model.input_dim = j.at("d").get<size_t>();
    if (j.contains("W1")) {
        Layer hidden;
        hidden.inputs = model.input_dim;
        hidden.outputs = j.at("h").get<size_t>();
        hidden.weights = j.at("W1").get<std::vector<double>>();
        hidden.bias = j.at("b1").get<std::vector<double>>();
        Layer out;
        out.inputs = hidden.outputs;
        out.outputs = 1;
        out.weights = j.at("W2").get<std::vector<double>>();
        out.bias = {j.at("b2").get<double>()};
        model.layers = {std::move(hidden), std::move(out)};
    } else {
        for (const auto& lj : j.at("layers")) {
            Layer layer;
            layer.inputs = lj.at("inputs").get<size_t>();
            layer.outputs = lj.at("outputs").get<size_t>();
            layer.weights = lj.at("W").get<std::vector<double>>();
            layer.bias = lj.at("b").get<std::vector<double>>();
            model.layers.push_back(std::move(layer));
        }
    }
    validate_model(model);
    return model;
}

std::vector<int64_t> required_rotation_steps(const NnModel& model, size_t ring_degree) {
    std::vector<int64_t> steps;
    size_t spacing = 1;
    size_t n_in = model.input_dim;
    for (const auto& layer : model.layers) {
        size_t n_in_pad = next_pow2(n_in);
        size_t width = spacing * n_in_pad;
        size_t n_out_pad = next_pow2(layer.outputs);
        for (size_t block = 1; block < n_out_pad; block <<= 1)
            steps.push_back(-int64_t(width * block));
        for (size_t stride = 1; stride < n_in_pad; stride <<= 1)
            steps.push_back(int64_t(spacing * stride));
        spacing = width;
        n_in = layer.outputs;
    }
    // deduplicate
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    (void)ring_degree;
    return steps;
}

int levels_required(const NnModel& model) {
    return int(2 * model.hidden_layer_count() + 1);
}

std::vector<double> pack_input(std::span<const double> x) {
    return std::vector<double>(x.begin(), x.end());
}

HeNnEvaluator::HeNnEvaluator(ckks::ContextPtr context, std::shared_ptr<const ckks::EvalKeys> keys,
                             NnModel model, bool allow_multi_hidden)
    : ctx_(std::move(context)), eval_(ctx_, std::move(keys)), model_(std::move(model)) {
    validate_model(model_);
    if (model_.hidden_layer_count() != 1 && !allow_multi_hidden)
        throw UnsupportedDepthError(
            "homomorphic evaluation supports exactly one hidden layer; deeper models fail the "
            "similarity test and need the explicit unsafe-depth override");
    if (levels_required(model_) > ctx_->max_level())
        throw DepthError("model needs " + std::to_string(levels_required(model_)) +
                         " levels but the chain provides " + std::to_string(ctx_->max_level()));
    // slot capacity of the recursive block layout
    size_t spacing = 1, n_in = model_.input_dim;
    for (const auto& layer : model_.layers) {
        size_t width = spacing * next_pow2(n_in);
        size_t region = width * next_pow2(layer.outputs);
        if (region > ctx_->slot_count())
            throw CapacityError("model shape needs " + std::to_string(region) +
                                " slots; context provides " + std::to_string(ctx_->slot_count()));
        spacing = width;
        n_in = layer.outputs;
    }
}

ckks::Ciphertext HeNnEvaluator::forward(const ckks::Ciphertext& packed_input) const {
    ckks::Ciphertext ct = packed_input;
    size_t spacing = 1;
    size_t n_in = model_.input_dim;

    for (size_t li = 0; li < model_.layers.size(); ++li) {
        const Layer& layer = model_.layers[li];
        size_t n_in_pad = next_pow2(n_in);
        size_t width = spacing * n_in_pad;
        size_t n_out_pad = next_pow2(layer.outputs);

        // replicate the input region to one block per (padded) output unit
        for (size_t block = 1; block < n_out_pad; block <<= 1)
            ct = eval_.add(ct, eval_.rotate(ct, -int64_t(width * block)));

        // row-packed weights: W[j][i] at slot j*width + i*spacing
        std::vector<double> packed(width * n_out_pad, 0.0);
        for (size_t j = 0; j < layer.outputs; ++j)
            for (size_t i = 0; i < layer.inputs; ++i)
                packed[j * width + i * spacing] = layer.weight(j, i);
        auto w_pt = ctx_->encode(packed, ctx_->default_scale(), ct.level);
        ct = eval_.rescale(eval_.mul_plain(ct, w_pt));

        // fold products onto the block anchor
        for (size_t stride = 1; stride < n_in_pad; stride <<= 1)
            ct = eval_.add(ct, eval_.rotate(ct, int64_t(spacing * stride)));

        // bias at the anchors, matching the running scale exactly
        std::vector<double> bias(width * n_out_pad, 0.0);
        for (size_t j = 0; j < layer.outputs; ++j) bias[j * width] = layer.bias[j];
        ct = eval_.add_plain(ct, ctx_->encode(bias, ct.scale, ct.level));

        bool is_hidden = li + 1 < model_.layers.size();
        if (is_hidden) ct = eval_.rescale(eval_.mul(ct, ct));

        spacing = width;
        n_in = layer.outputs;
    }
    return ct;
}

}  // namespace hefraud::nn

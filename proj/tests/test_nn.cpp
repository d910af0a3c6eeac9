// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hefraud/errors.hpp"
#include "hefraud/nn.hpp"
#include "hefraud/rng.hpp"

using namespace hefraud;
using namespace hefraud::nn;

namespace {

NnModel tiny_model() {
    // d=1, h=1: W1=[2], b1=[1], W2=[3], b2=0
    NnModel m;
    m.input_dim = 1;
    Layer hidden{1, 1, {2.0}, {1.0}};
    Layer out{1, 1, {3.0}, {0.0}};
    m.layers = {hidden, out};
    return m;
}

NnModel random_model(size_t d, size_t h, uint64_t seed, double weight_scale = 0.5) {
    Rng rng(seed);
    NnModel m;
    m.input_dim = d;
    Layer hidden;
    hidden.inputs = d;
    hidden.outputs = h;
    hidden.weights.resize(d * h);
    hidden.bias.resize(h);
    double bound = weight_scale / std::sqrt(double(d));
    for (auto& w : hidden.weights) w = (rng.uniform_real() * 2 - 1) * bound;
    for (auto& b : hidden.bias) b = (rng.uniform_real() * 2 - 1) * 0.5;
    Layer out;
    out.inputs = h;
    out.outputs = 1;
    out.weights.resize(h);
    out.bias = {(rng.uniform_real() * 2 - 1) * 0.5};
    for (auto& w : out.weights) w = (rng.uniform_real() * 2 - 1) / std::sqrt(double(h));
    m.layers = {std::move(hidden), std::move(out)};
    return m;
}

data::Records blob_data(size_t n, uint64_t seed) {
    // two linearly separable 2D blobs
    Rng rng(seed);
    data::Records out;
    for (size_t i = 0; i < n; ++i) {
        data::TransactionRecord rec;
        rec.label = i % 2 == 0 ? 1 : 0;
        double cx = rec.label == 1 ? 2.0 : -2.0;
        rec.features = {{"x", cx + rng.normal(0, 0.5)}, {"y", -cx + rng.normal(0, 0.5)}};
        rec.time_index = int64_t(i);
        out.push_back(rec);
    }
    return out;
}

}  // namespace

TEST_CASE("forward_plain evaluates the square-activation network") {
    SUBCASE("hand computation: 3*(2*1+1)^2 = 27") {
        auto m = tiny_model();
        CHECK(forward_plain(m, std::vector<double>{1.0}) == doctest::Approx(27.0));
    }
    SUBCASE("constant network returns b2 for any input") {
        NnModel m;
        m.input_dim = 3;
        Layer hidden{3, 2, std::vector<double>(6, 0.0), {0.0, 0.0}};
        Layer out{2, 1, {0.0, 0.0}, {0.7}};
        m.layers = {hidden, out};
        Rng rng(1);
        for (int i = 0; i < 10; ++i) {
            std::vector<double> x{rng.normal(0, 5), rng.normal(0, 5), rng.normal(0, 5)};
            CHECK(forward_plain(m, x) == doctest::Approx(0.7));
        }
    }
    SUBCASE("adding a zero-weight hidden unit changes nothing") {
        auto m = tiny_model();
        NnModel padded = m;
        padded.layers[0].outputs = 2;
        padded.layers[0].weights = {2.0, 0.0};
        padded.layers[0].bias = {1.0, 0.0};
        padded.layers[1].inputs = 2;
        padded.layers[1].weights = {3.0, 0.0};
        Rng rng(2);
        for (int i = 0; i < 10; ++i) {
            std::vector<double> x{rng.normal(0, 3)};
            CHECK(forward_plain(padded, x) == doctest::Approx(forward_plain(m, x)));
        }
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(forward_plain(tiny_model(), std::vector<double>{1.0, 2.0}), ShapeError);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    auto model = random_model(3, 2, 99);
    Rng rng(5);
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
        inputs.push_back({rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)});
        labels.push_back(i % 3 == 0 ? 1 : 0);
    }
    double pos_weight = 2.5;

    auto analytic = loss_gradients(model, inputs, labels, pos_weight);
    auto params = flatten_parameters(model);
    REQUIRE(analytic.size() == params.size());

    const double eps = 1e-5;
    double worst_rel = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        NnModel m_plus = model, m_minus = model;
        auto p_plus = params, p_minus = params;
        p_plus[i] += eps;
        p_minus[i] -= eps;
        unflatten_parameters(m_plus, p_plus);
        unflatten_parameters(m_minus, p_minus);
        double numeric = (training_loss(m_plus, inputs, labels, pos_weight) -
                          training_loss(m_minus, inputs, labels, pos_weight)) /
                         (2 * eps);
        double rel = std::abs(numeric - analytic[i]) /
                     std::max(1e-8, std::max(std::abs(numeric), std::abs(analytic[i])));
        worst_rel = std::max(worst_rel, rel);
    }
    CHECK(worst_rel < 1e-4);
}

TEST_CASE("pos_weight=1 reduces to plain binary cross-entropy") {
    auto model = random_model(4, 3, 7);
    Rng rng(9);
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    for (int i = 0; i < 16; ++i) {
        inputs.push_back({rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)});
        labels.push_back(i % 2);
    }
    // independent plain-BCE oracle
    double oracle = 0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        double p = predict_proba(model, inputs[i]);
        oracle -= labels[i] == 1 ? std::log(p) : std::log(1 - p);
    }
    oracle /= double(inputs.size());
    CHECK(std::abs(training_loss(model, inputs, labels, 1.0) - oracle) < 1e-12);
}

TEST_CASE("training separates 2D blobs") {
    auto records = blob_data(200, 4);
    NnTrainConfig cfg;
    cfg.hidden_layer_sizes = {3};
    cfg.epochs = 500;
    cfg.learning_rate = 0.2;
    cfg.seed = 11;
    NnTrainLog log;
    auto model = train_nn(records, cfg, &log);

    size_t correct = 0;
    for (const auto& rec : records)
        correct += size_t(predict_label(model, features_of(rec)) == rec.label);
    CHECK(double(correct) / double(records.size()) >= 0.95);
    REQUIRE(log.epoch_losses.size() == 500);
    CHECK(log.epoch_losses.back() < log.epoch_losses.front());
}

TEST_CASE("training error paths") {
    auto records = blob_data(50, 8);
    SUBCASE("single class") {
        data::Records pos_only;
        for (const auto& r : records)
            if (r.label == 1) pos_only.push_back(r);
        CHECK_THROWS_AS(train_nn(pos_only, NnTrainConfig{}), TrainingError);
    }
    SUBCASE("divergence") {
        NnTrainConfig cfg;
        cfg.hidden_layer_sizes = {3};
        cfg.epochs = 50;
        cfg.learning_rate = 1e9;
        CHECK_THROWS_AS(train_nn(records, cfg), DivergenceError);
    }
    SUBCASE("bad config") {
        NnTrainConfig cfg;
        cfg.pos_weight = 0;
        CHECK_THROWS_AS(train_nn(records, cfg), ParameterError);
    }
}

TEST_CASE("model JSON round-trips through the canonical schema") {
    auto m = random_model(5, 4, 33);
    std::string text = save_model(m);
    CHECK(text.find("\"W1\"") != std::string::npos);
    CHECK(text.find("\"activation\":\"square\"") != std::string::npos);
    auto loaded = load_model(text);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        std::vector<double> x;
        for (size_t j = 0; j < 5; ++j) x.push_back(rng.normal(0, 2));
        CHECK(forward_plain(loaded, x) == forward_plain(m, x));
    }

    SUBCASE("multi-layer models use the extended schema") {
        NnModel deep;
        deep.input_dim = 2;
        deep.layers = {Layer{2, 2, {0.1, 0.2, 0.3, 0.4}, {0.0, 0.1}},
                       Layer{2, 2, {0.5, 0.6, 0.7, 0.8}, {0.2, 0.3}},
                       Layer{2, 1, {0.9, 1.0}, {0.4}}};
        auto deep_loaded = load_model(save_model(deep));
        std::vector<double> x{1.0, -1.0};
        CHECK(forward_plain(deep_loaded, x) == forward_plain(deep, x));
    }
}

// --- homomorphic path ---

namespace {

const std::vector<int> kPaperChain{40, 30, 30, 30, 40};

struct HeFixture {
    ckks::ContextPtr ctx;
    ckks::KeySet keys;
    Rng rng{202};

    HeFixture(size_t n, const NnModel& model,
              ckks::SecurityPolicy policy = ckks::SecurityPolicy::kEnforce128,
              const std::vector<int>& chain = kPaperChain)
        : ctx(ckks::Context::create(n, chain, std::exp2(30), policy)), keys([&] {
              Rng krng(55);
              return ckks::generate_keys(ctx, krng, required_rotation_steps(model, n));
          }()) {}

    double he_logit(const HeNnEvaluator& he, std::span<const double> x) {
        auto pt = ctx->encode(pack_input(x));
        auto ct = ckks::encrypt(*ctx, keys.public_key, pt, rng);
        auto out = he.forward(ct);
        return ctx->decode(ckks::decrypt(*ctx, keys.secret, out))[0];
    }
};

}  // namespace

TEST_CASE("he_forward matches the hand computation on the tiny model") {
    auto model = tiny_model();
    HeFixture f(1024, model, ckks::SecurityPolicy::kInsecureTestOnly);
    HeNnEvaluator he(f.ctx, f.keys.eval, model);
    double logit = f.he_logit(he, std::vector<double>{1.0});
    CHECK(std::abs(logit - 27.0) < 1e-2);
}

TEST_CASE("he_forward of a zero-weight model returns the output bias") {
    NnModel m;
    m.input_dim = 2;
    m.layers = {Layer{2, 2, {0, 0, 0, 0}, {0, 0}}, Layer{2, 1, {0, 0}, {0.42}}};
    HeFixture f(1024, m, ckks::SecurityPolicy::kInsecureTestOnly);
    HeNnEvaluator he(f.ctx, f.keys.eval, m);
    double logit = f.he_logit(he, std::vector<double>{3.0, -1.0});
    CHECK(std::abs(logit - 0.42) < 1e-3);
}

TEST_CASE("he_forward agrees with forward_plain on a d=28 h=47 model") {
    auto model = random_model(28, 47, 1234);
    HeFixture f(8192, model);
    HeNnEvaluator he(f.ctx, f.keys.eval, model);
    Rng rng(77);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> x;
        for (int i = 0; i < 28; ++i) x.push_back(rng.normal(0, 2));
        double plain = forward_plain(model, x);
        double he_val = f.he_logit(he, x);
        CHECK(std::abs(he_val - plain) <= 1e-2);
    }
}

TEST_CASE("he_forward consumes exactly 3 levels for one hidden layer") {
    auto model = random_model(4, 3, 5);
    HeFixture f(8192, model);
    HeNnEvaluator he(f.ctx, f.keys.eval, model);
    auto pt = f.ctx->encode(pack_input(std::vector<double>{1, 2, 3, 4}));
    auto ct = ckks::encrypt(*f.ctx, f.keys.public_key, pt, f.rng);
    auto out = he.forward(ct);
    CHECK(ct.level - out.level == 3);
    CHECK(levels_required(model) == 3);
}

TEST_CASE("multi-hidden-layer evaluation is rejected without the override") {
    NnModel deep;
    deep.input_dim = 2;
    deep.layers = {Layer{2, 2, {0.3, 0.1, -0.2, 0.4}, {0.1, -0.1}},
                   Layer{2, 2, {0.2, -0.3, 0.1, 0.2}, {0.0, 0.1}},
                   Layer{2, 1, {0.5, -0.5}, {0.2}}};
    HeFixture f(16384, deep, ckks::SecurityPolicy::kEnforce128,
                std::vector<int>{40, 30, 30, 30, 30, 30, 40});
    CHECK_THROWS_AS(HeNnEvaluator(f.ctx, f.keys.eval, deep), UnsupportedDepthError);

    SUBCASE("override evaluates correctly on an adequate chain") {
        HeNnEvaluator he(f.ctx, f.keys.eval, deep, /*allow_multi_hidden=*/true);
        std::vector<double> x{0.8, -0.6};
        double plain = forward_plain(deep, x);
        double he_val = f.he_logit(he, x);
        CHECK(std::abs(he_val - plain) < 5e-2);
    }
}

TEST_CASE("depth and capacity violations are reported") {
    auto model = random_model(4, 3, 6);
    SUBCASE("chain too short") {
        // [40,30,40] has only 1 rescale level; the model needs 3
        auto ctx = ckks::Context::create(8192, {40, 30, 40}, std::exp2(30));
        Rng krng(1);
        auto keys = ckks::generate_keys(ctx, krng);
        CHECK_THROWS_AS(HeNnEvaluator(ctx, keys.eval, model), DepthError);
    }
    SUBCASE("model too wide for the ring") {
        auto wide = random_model(64, 64, 7);
        // needs 64*64=4096... use a tiny ring where 128*... overflows
        auto ctx = ckks::Context::create(1024, kPaperChain, std::exp2(30),
                                         ckks::SecurityPolicy::kInsecureTestOnly);
        Rng krng(2);
        auto keys = ckks::generate_keys(ctx, krng);
        CHECK_THROWS_AS(HeNnEvaluator(ctx, keys.eval, wide), CapacityError);
    }
}

TEST_CASE("required rotation steps are powers of two within N/4") {
    auto model = random_model(28, 47, 8);
    auto steps = required_rotation_steps(model, 8192);
    CHECK(!steps.empty());
    for (int64_t s : steps) {
        uint64_t mag = uint64_t(s < 0 ? -s : s);
        CHECK((mag & (mag - 1)) == 0);  // power of two
        CHECK(mag <= 8192 / 4);
    }
}

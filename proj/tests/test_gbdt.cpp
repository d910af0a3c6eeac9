// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hefraud/errors.hpp"
#include "hefraud/gbdt.hpp"
#include "hefraud/rng.hpp"

using namespace hefraud;
using namespace hefraud::gbdt;
using hefraud::data::Records;
using hefraud::data::TransactionRecord;

namespace {

std::unique_ptr<TreeNode> leaf(double v) {
    auto n = std::make_unique<TreeNode>();
    n->is_leaf = true;
    n->leaf_value = v;
    return n;
}

std::unique_ptr<TreeNode> internal(const std::string& f, double t,
                                   std::unique_ptr<TreeNode> l, std::unique_ptr<TreeNode> r) {
    auto n = std::make_unique<TreeNode>();
    n->is_leaf = false;
    n->feature = f;
    n->threshold = t;
    n->left = std::move(l);
    n->right = std::move(r);
    return n;
}

/// Two stumps: tree A yields +0.3 iff V1 < 2 else -0.3; tree B yields +0.2
/// iff V2 < 5 else -0.2.
TreeEnsemble hand_ensemble() {
    TreeEnsemble m;
    m.base_score = 0.0;
    m.feature_names = {"V1", "V2"};
    m.trees.push_back(internal("V1", 2.0, leaf(0.3), leaf(-0.3)));
    m.trees.push_back(internal("V2", 5.0, leaf(0.2), leaf(-0.2)));
    return m;
}

TransactionRecord tx(std::vector<std::pair<std::string, double>> features) {
    TransactionRecord r;
    r.features = std::move(features);
    return r;
}

}  // namespace

TEST_CASE("stub trees return the base score") {
    TreeEnsemble m;
    m.base_score = 0.37;
    m.trees.push_back(leaf(0.0));
    m.trees.push_back(leaf(0.0));
    CHECK(predict_margin(m, tx({})) == doctest::Approx(0.37));
}

TEST_CASE("hand-built ensemble routes to the expected margin") {
    auto m = hand_ensemble();
    // V1=1 routes to +0.3, V2=9 routes to -0.2: margin 0.1
    auto t = tx({{"V1", 1.0}, {"V2", 9.0}});
    CHECK(predict_margin(m, t) == doctest::Approx(0.1));
    CHECK(predict_proba(m, t) == doctest::Approx(0.52498).epsilon(1e-4));
    CHECK(predict_label(m, t) == 1);

    SUBCASE("tree order does not matter") {
        TreeEnsemble swapped;
        swapped.base_score = m.base_score;
        swapped.feature_names = m.feature_names;
        swapped.trees.push_back(m.trees[1]->clone());
        swapped.trees.push_back(m.trees[0]->clone());
        CHECK(predict_margin(swapped, t) == doctest::Approx(predict_margin(m, t)));
    }
}

TEST_CASE("sigmoid edge behaviour") {
    TreeEnsemble m;
    m.base_score = 0.0;
    m.trees.push_back(leaf(0.0));
    CHECK(predict_proba(m, tx({})) == doctest::Approx(0.5));

    TreeEnsemble big;
    big.base_score = 1e6;
    big.trees.push_back(leaf(0.0));
    CHECK(predict_proba(big, tx({})) == doctest::Approx(1.0));
}

TEST_CASE("missing features are reported by name") {
    auto m = hand_ensemble();
    try {
        predict_margin(m, tx({{"V1", 1.0}}));
        FAIL("expected MissingFeatureError");
    } catch (const MissingFeatureError& e) {
        CHECK(e.feature_name == "V2");
    }
}

TEST_CASE("margin equals a path-enumeration oracle on random trees") {
    // Oracle: enumerate every root-to-leaf path; exactly one path's
    // constraints accept the transaction.
    struct Constraint {
        std::string feature;
        double threshold;
        bool go_left;
    };
    struct PathOracle {
        static void paths(const TreeNode* n, std::vector<Constraint>& prefix,
                          std::vector<std::pair<std::vector<Constraint>, double>>& out) {
            if (n->is_leaf) {
                out.emplace_back(prefix, n->leaf_value);
                return;
            }
            prefix.push_back({n->feature, n->threshold, true});
            paths(n->left.get(), prefix, out);
            prefix.back().go_left = false;
            paths(n->right.get(), prefix, out);
            prefix.pop_back();
        }
        static double evaluate(const TreeNode* root, const TransactionRecord& t) {
            std::vector<std::pair<std::vector<Constraint>, double>> all;
            std::vector<Constraint> prefix;
            paths(root, prefix, all);
            for (const auto& [constraints, value] : all) {
                bool ok = true;
                for (const auto& c : constraints) {
                    bool left = t.feature(c.feature) < c.threshold;
                    if (left != c.go_left) {
                        ok = false;
                        break;
                    }
                }
                if (ok) return value;
            }
            FAIL("no path accepted the transaction");
            return 0;
        }
    };

    Rng rng(17);
    std::vector<std::string> names{"a", "b", "c"};
    std::function<std::unique_ptr<TreeNode>(int)> random_tree = [&](int depth) {
        if (depth == 0 || rng.bernoulli(0.3)) return leaf(rng.normal(0, 1));
        return internal(names[rng.uniform(names.size())], rng.normal(0, 2),
                        random_tree(depth - 1), random_tree(depth - 1));
    };

    for (int trial = 0; trial < 50; ++trial) {
        TreeEnsemble m;
        m.base_score = rng.normal(0, 0.5);
        m.feature_names = names;
        for (int i = 0; i < 4; ++i) m.trees.push_back(random_tree(4));
        auto t = tx({{"a", rng.normal(0, 2)}, {"b", rng.normal(0, 2)}, {"c", rng.normal(0, 2)}});
        double expected = m.base_score;
        for (const auto& tree : m.trees) expected += PathOracle::evaluate(tree.get(), t);
        CHECK(predict_margin(m, t) == doctest::Approx(expected).epsilon(1e-12));
    }
}

namespace {
Records one_dimensional_split_data() {
    // y = 1 iff x > 0, 40 points
    Records r;
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
        TransactionRecord t;
        double x = (i % 2 == 0) ? rng.uniform_real() + 0.1 : -rng.uniform_real() - 0.1;
        t.features = {{"x", x}};
        t.label = x > 0 ? 1 : 0;
        t.time_index = i;
        r.push_back(t);
    }
    return r;
}
}  // namespace

TEST_CASE("trainer fits a perfectly separable 1D dataset") {
    auto records = one_dimensional_split_data();
    TrainConfig cfg;
    cfg.max_depth = 1;
    cfg.num_estimators = 10;
    cfg.learning_rate = 0.5;
    TrainLog log;
    auto model = train(records, cfg, &log);
    REQUIRE(model.trees.size() == 10);

    size_t correct = 0;
    for (const auto& rec : records) correct += size_t(predict_label(model, rec) == rec.label);
    CHECK(correct == records.size());

    // losses recorded and non-increasing
    REQUIRE(log.round_losses.size() == 10);
    for (size_t i = 1; i < log.round_losses.size(); ++i)
        CHECK(log.round_losses[i] <= log.round_losses[i - 1] + 1e-9);
}

TEST_CASE("constant features produce single-leaf trees") {
    Records r;
    for (int i = 0; i < 30; ++i) {
        TransactionRecord t;
        t.features = {{"x", 1.0}};
        t.label = i < 10 ? 1 : 0;
        t.time_index = i;
        r.push_back(t);
    }
    TrainConfig cfg;
    cfg.num_estimators = 1;
    cfg.max_depth = 3;
    auto model = train(r, cfg);
    REQUIRE(model.trees.size() == 1);
    CHECK(model.trees[0]->is_leaf);
    // prior log-odds is negative (10 pos / 20 neg); one round moves toward it
    double margin = predict_margin(model, r[0]);
    CHECK(margin < 0.0);
}

TEST_CASE("single-class data cannot be trained on") {
    Records r;
    for (int i = 0; i < 10; ++i) {
        TransactionRecord t;
        t.features = {{"x", double(i)}};
        t.label = 1;
        r.push_back(t);
    }
    CHECK_THROWS_AS(train(r, TrainConfig{}), TrainingError);
}

TEST_CASE("config validation") {
    auto records = one_dimensional_split_data();
    TrainConfig bad;
    bad.max_depth = 0;
    CHECK_THROWS_AS(train(records, bad), ParameterError);
    bad = TrainConfig{};
    bad.learning_rate = 1.5;
    CHECK_THROWS_AS(train(records, bad), ParameterError);
}

TEST_CASE("model JSON round-trips") {
    auto m = hand_ensemble();
    auto loaded = load_model(save_model(m));
    CHECK(loaded.base_score == m.base_score);
    CHECK(loaded.feature_names == m.feature_names);
    REQUIRE(loaded.trees.size() == 2);
    CHECK(loaded.trees[0]->feature == "V1");
    CHECK(loaded.trees[0]->left->leaf_value == 0.3);

    SUBCASE("predictions are preserved bit-exactly") {
        Rng rng(23);
        auto trained = train(one_dimensional_split_data(), TrainConfig{});
        auto reloaded = load_model(save_model(trained));
        for (int i = 0; i < 100; ++i) {
            auto t = tx({{"x", rng.normal(0, 2)}});
            CHECK(predict_margin(trained, t) == predict_margin(reloaded, t));
        }
    }
}

TEST_CASE("leaf-only JSON loads as a single-leaf tree") {
    auto m = load_model(R"({"leaf": 0.5})");
    REQUIRE(m.trees.size() == 1);
    CHECK(m.trees[0]->is_leaf);
    CHECK(m.trees[0]->leaf_value == 0.5);
}

TEST_CASE("external dump format is accepted") {
    std::string dump = R"([
      {"nodeid": 0, "split": "f0", "split_condition": 1.5, "yes": 1, "no": 2,
       "children": [ {"nodeid": 1, "leaf": 0.4}, {"nodeid": 2, "leaf": -0.4} ]},
      {"nodeid": 0, "leaf": 0.25}
    ])";
    auto m = load_model(dump);
    REQUIRE(m.trees.size() == 2);
    CHECK(m.trees[0]->feature == "f0");
    CHECK(m.trees[0]->left->leaf_value == 0.4);
    CHECK(m.trees[1]->leaf_value == 0.25);
    CHECK(predict_margin(m, tx({{"f0", 1.0}})) == doctest::Approx(0.65));
}

TEST_CASE("missing split_condition is a parse error naming the path") {
    std::string dump = R"([
      {"nodeid": 0, "split": "f0", "yes": 1, "no": 2,
       "children": [ {"nodeid": 1, "leaf": 0.4}, {"nodeid": 2, "leaf": -0.4} ]}
    ])";
    try {
        load_model(dump);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.path == "/0");
        CHECK(std::string(e.what()).find("split_condition") != std::string::npos);
    }
}

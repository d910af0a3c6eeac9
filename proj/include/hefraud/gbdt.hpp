// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hefraud/data.hpp"

namespace hefraud::gbdt {

/// Binary tree node: internal nodes compare one feature against a threshold
/// (route left iff value < threshold), leaves carry a margin contribution.
struct TreeNode {
    bool is_leaf = true;
    double leaf_value = 0.0;
    std::string feature;
    double threshold = 0.0;
    std::unique_ptr<TreeNode> left;
    std::unique_ptr<TreeNode> right;

    std::unique_ptr<TreeNode> clone() const;
    int depth() const;
    size_t node_count() const;
};

struct TreeEnsemble {
    std::vector<std::unique_ptr<TreeNode>> trees;
    double base_score = 0.0;  // initial margin
    std::vector<std::string> feature_names;

    TreeEnsemble clone() const;
};

struct TrainConfig {
    int max_depth = 3;
    int num_estimators = 20;
    double learning_rate = 0.3;
    double lambda = 1.0;  // L2 regularization on leaf values
    std::optional<size_t> undersampling_num_negatives;
    uint64_t seed = 0;
};

struct TrainLog {
    std::vector<double> round_losses;  // full training logistic loss per round
};

double sigmoid(double x);

/// base_score plus the reached leaf of every tree.
double predict_margin(const TreeEnsemble& model, const data::TransactionRecord& tx);
double predict_proba(const TreeEnsemble& model, const data::TransactionRecord& tx);
int predict_label(const TreeEnsemble& model, const data::TransactionRecord& tx);

/// Greedy second-order logistic boosting: gradient g = p - y, hessian
/// h = p(1-p), split gain 0.5*(GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)),
/// leaf value -learning_rate*G/(H+l). Training loss is checked to be
/// non-increasing per round.
TreeEnsemble train(const data::Records& dataset, const TrainConfig& config,
                   TrainLog* log = nullptr);

/// Native model JSON; the loader also accepts the common external GBDT dump
/// (array of per-tree nodeid/split/split_condition/children objects).
std::string save_model(const TreeEnsemble& model);
TreeEnsemble load_model(const std::string& json_text);

}  // namespace hefraud::gbdt

// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include "hefraud/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "hefraud/errors.hpp"

namespace hefraud::gbdt {

using nlohmann::json;

std::unique_ptr<TreeNode> TreeNode::clone() const {
    auto out = std::make_unique<TreeNode>();
    out->is_leaf = is_leaf;
    out->leaf_value = leaf_value;
    out->feature = feature;
    out->threshold = threshold;
    if (left) out->left = left->clone();
    if (right) out->right = right->clone();
    return out;
}

int TreeNode::depth() const {
    if (is_leaf) return 0;
    return 1 + std::max(left->depth(), right->depth());
}

size_t TreeNode::node_count() const {
    if (is_leaf) return 1;
    return 1 + left->node_count() + right->node_count();
}

TreeEnsemble TreeEnsemble::clone() const {
    TreeEnsemble out;
    out.base_score = base_score;
    out.feature_names = feature_names;
    out.trees.reserve(trees.size());
    for (const auto& t : trees) out.trees.push_back(t->clone());
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

const TreeNode* descend(const TreeNode* node, const data::TransactionRecord& tx) {
    while (!node->is_leaf) {
        double v = tx.feature(node->feature);
        node = (v < node->threshold) ? node->left.get() : node->right.get();
    }
    return node;
}

}  // namespace

double predict_margin(const TreeEnsemble& model, const data::TransactionRecord& tx) {
    double margin = model.base_score;
    for (const auto& tree : model.trees) margin += descend(tree.get(), tx)->leaf_value;
    return margin;
}

double predict_proba(const TreeEnsemble& model, const data::TransactionRecord& tx) {
    return sigmoid(predict_margin(model, tx));
}

int predict_label(const TreeEnsemble& model, const data::TransactionRecord& tx) {
    return predict_proba(model, tx) >= 0.5 ? 1 : 0;
}

namespace {

struct BoostContext {
    const data::Records* records;
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> columns;  // [feature][row]
    std::vector<double> gradient, hessian;
    double lambda;
    double learning_rate;
    int max_depth;
};

struct SplitChoice {
    double gain = 0.0;
    size_t feature = 0;
    double threshold = 0.0;
};

double leaf_weight(double g_sum, double h_sum, const BoostContext& ctx) {
    return -ctx.learning_rate * g_sum / (h_sum + ctx.lambda);
}

std::optional<SplitChoice> best_split(const std::vector<size_t>& rows, const BoostContext& ctx) {
    double g_total = 0, h_total = 0;
    for (size_t r : rows) {
        g_total += ctx.gradient[r];
        h_total += ctx.hessian[r];
    }
    double parent_score = g_total * g_total / (h_total + ctx.lambda);

    SplitChoice best;
    bool found = false;
    std::vector<size_t> order(rows);
    for (size_t f = 0; f < ctx.columns.size(); ++f) {
        const auto& col = ctx.columns[f];
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t b) { return col[a] < col[b]; });
        double g_left = 0, h_left = 0;
        for (size_t i = 0; i + 1 < order.size(); ++i) {
            g_left += ctx.gradient[order[i]];
            h_left += ctx.hessian[order[i]];
            double v = col[order[i]], next = col[order[i + 1]];
            if (v == next) continue;  // only between distinct values
            double g_right = g_total - g_left, h_right = h_total - h_left;
            double gain = 0.5 * (g_left * g_left / (h_left + ctx.lambda) +
                                 g_right * g_right / (h_right + ctx.lambda) - parent_score);
            if (gain > best.gain + 1e-12 || (!found && gain > 1e-12)) {
                best.gain = gain;
                best.feature = f;
                best.threshold = v + (next - v) / 2.0;  // midpoint
                found = true;
            }
        }
    }
    if (!found) return std::nullopt;
    return best;
}

std::unique_ptr<TreeNode> build_node(const std::vector<size_t>& rows, int depth,
                                     const BoostContext& ctx) {
    double g_sum = 0, h_sum = 0;
    for (size_t r : rows) {
        g_sum += ctx.gradient[r];
        h_sum += ctx.hessian[r];
    }
    auto make_leaf = [&] {
        auto leaf = std::make_unique<TreeNode>();
        leaf->is_leaf = true;
        leaf->leaf_value = leaf_weight(g_sum, h_sum, ctx);
        return leaf;
    };
    if (depth >= ctx.max_depth || rows.size() < 2) return make_leaf();
    auto choice = best_split(rows, ctx);
    if (!choice) return make_leaf();

    std::vector<size_t> left_rows, right_rows;
    const auto& col = ctx.columns[choice->feature];
    for (size_t r : rows) (col[r] < choice->threshold ? left_rows : right_rows).push_back(r);
    if (left_rows.empty() || right_rows.empty()) return make_leaf();

    auto node = std::make_unique<TreeNode>();
    node->is_leaf = false;
    node->feature = ctx.feature_names[choice->feature];
    node->threshold = choice->threshold;
    node->left = build_node(left_rows, depth + 1, ctx);
    node->right = build_node(right_rows, depth + 1, ctx);
    return node;
}

double logistic_loss(const std::vector<double>& margins, const std::vector<int>& labels) {
    double loss = 0;
    for (size_t i = 0; i < margins.size(); ++i) {
        double z = margins[i];
        // log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0, stable form
        double a = labels[i] == 1 ? -z : z;
        loss += a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
    }
    return loss / double(margins.size());
}

}  // namespace

TreeEnsemble train(const data::Records& dataset, const TrainConfig& config, TrainLog* log) {
    if (config.max_depth < 1) throw ParameterError("max_depth must be >= 1");
    if (config.num_estimators < 1) throw ParameterError("num_estimators must be >= 1");
    if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0))
        throw ParameterError("learning_rate must lie in (0, 1]");

    data::Records resampled;
    const data::Records* records = &dataset;
    if (config.undersampling_num_negatives) {
        resampled = data::undersample(dataset, *config.undersampling_num_negatives, config.seed);
        records = &resampled;
    }
    if (records->empty()) throw TrainingError("empty training set");

    std::vector<int> labels;
    labels.reserve(records->size());
    for (const auto& rec : *records) labels.push_back(rec.label);
    bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
    bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
    if (!has_pos || !has_neg) throw TrainingError("training requires both classes");

    BoostContext ctx;
    ctx.records = records;
    ctx.lambda = config.lambda;
    ctx.learning_rate = config.learning_rate;
    ctx.max_depth = config.max_depth;
    for (const auto& [name, _] : records->front().features) ctx.feature_names.push_back(name);
    ctx.columns.assign(ctx.feature_names.size(), std::vector<double>(records->size()));
    for (size_t r = 0; r < records->size(); ++r)
        for (size_t f = 0; f < ctx.feature_names.size(); ++f)
            ctx.columns[f][r] = (*records)[r].feature(ctx.feature_names[f]);

    TreeEnsemble model;
    model.base_score = 0.0;
    model.feature_names = ctx.feature_names;

    std::vector<double> margins(records->size(), model.base_score);
    std::vector<size_t> all_rows(records->size());
    std::iota(all_rows.begin(), all_rows.end(), 0);

    double prev_loss = logistic_loss(margins, labels);
    for (int round = 0; round < config.num_estimators; ++round) {
        ctx.gradient.resize(records->size());
        ctx.hessian.resize(records->size());
        for (size_t r = 0; r < records->size(); ++r) {
            double p = sigmoid(margins[r]);
            ctx.gradient[r] = p - labels[r];
            ctx.hessian[r] = p * (1.0 - p);
        }
        auto root = build_node(all_rows, 0, ctx);
        for (size_t r = 0; r < records->size(); ++r)
            margins[r] += descend(root.get(), (*records)[r])->leaf_value;
        model.trees.push_back(std::move(root));

        double loss = logistic_loss(margins, labels);
        if (log) log->round_losses.push_back(loss);
        if (loss > prev_loss + 1e-9)
            throw TrainingError("training loss increased in round " + std::to_string(round));
        prev_loss = loss;
    }
    return model;
}

namespace {

json node_to_json(const TreeNode& node) {
    if (node.is_leaf) return json{{"leaf", node.leaf_value}};
    return json{{"feature", node.feature},
                {"threshold", node.threshold},
                {"left", node_to_json(*node.left)},
                {"right", node_to_json(*node.right)}};
}

std::unique_ptr<TreeNode> node_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError("tree node must be an object", path);
    auto node = std::make_unique<TreeNode>();
    if (j.contains("leaf")) {
        if (!j["leaf"].is_number()) throw ParseError("leaf must be numeric", path + "/leaf");
        node->is_leaf = true;
        node->leaf_value = j["leaf"].get<double>();
        return node;
    }
    for (const char* field : {"feature", "threshold", "left", "right"})
        if (!j.contains(field)) throw ParseError(std::string("missing '") + field + "'", path);
    node->is_leaf = false;
    node->feature = j["feature"].get<std::string>();
    node->threshold = j["threshold"].get<double>();
    node->left = node_from_json(j["left"], path + "/left");
    node->right = node_from_json(j["right"], path + "/right");
    return node;
}

/// External GBDT text-dump subset: {nodeid, split, split_condition, yes, no,
/// children:[...]} with "yes" the left (condition-true) child, or {nodeid,
/// leaf}.
std::unique_ptr<TreeNode> node_from_dump(const json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError("dump node must be an object", path);
    auto node = std::make_unique<TreeNode>();
    if (j.contains("leaf")) {
        node->is_leaf = true;
        node->leaf_value = j["leaf"].get<double>();
        return node;
    }
    if (!j.contains("split")) throw ParseError("missing 'split'", path);
    if (!j.contains("split_condition")) throw ParseError("missing 'split_condition'", path);
    if (!j.contains("children") || !j["children"].is_array() || j["children"].size() != 2)
        throw ParseError("internal node needs exactly 2 children", path + "/children");

    node->is_leaf = false;
    node->feature = j["split"].get<std::string>();
    node->threshold = j["split_condition"].get<double>();

    const json& c0 = j["children"][0];
    const json& c1 = j["children"][1];
    auto id_of = [&](const json& c) { return c.value("nodeid", -1); };
    int yes_id = j.value("yes", id_of(c0));
    const json& left_json = (id_of(c0) == yes_id) ? c0 : c1;
    const json& right_json = (id_of(c0) == yes_id) ? c1 : c0;
    node->left = node_from_dump(left_json, path + "/children/0");
    node->right = node_from_dump(right_json, path + "/children/1");
    return node;
}

void collect_features(const TreeNode& node, std::set<std::string>& out) {
    if (node.is_leaf) return;
    out.insert(node.feature);
    collect_features(*node.left, out);
    collect_features(*node.right, out);
}

}  // namespace

std::string save_model(const TreeEnsemble& model) {
    json j;
    j["format"] = "hefraud-gbdt";
    j["base_score"] = model.base_score;
    j["feature_names"] = model.feature_names;
    j["trees"] = json::array();
    for (const auto& t : model.trees) j["trees"].push_back(node_to_json(*t));
    return j.dump(2);
}

TreeEnsemble load_model(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), "$");
    }

    TreeEnsemble model;
    if (j.is_array()) {
        // external dump: one object per tree
        for (size_t i = 0; i < j.size(); ++i)
            model.trees.push_back(node_from_dump(j[i], "/" + std::to_string(i)));
    } else if (j.is_object() && j.contains("trees")) {
        model.base_score = j.value("base_score", 0.0);
        if (j.contains("feature_names"))
            model.feature_names = j["feature_names"].get<std::vector<std::string>>();
        if (!j["trees"].is_array()) throw ParseError("'trees' must be an array", "/trees");
        for (size_t i = 0; i < j["trees"].size(); ++i)
            model.trees.push_back(node_from_json(j["trees"][i], "/trees/" + std::to_string(i)));
    } else if (j.is_object()) {
        // single-node document, e.g. {"leaf": 0.5}
        model.trees.push_back(node_from_json(j, "/"));
    } else {
        throw ParseError("model document must be an object or array", "$");
    }
    if (model.trees.empty()) throw ParseError("model has no trees", "/trees");

    if (model.feature_names.empty()) {
        std::set<std::string> names;
        for (const auto& t : model.trees) collect_features(*t, names);
        model.feature_names.assign(names.begin(), names.end());
    }
    return model;
}

}  // namespace hefraud::gbdt

// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hefraud::data {

/// One cleaned transaction: numeric features in column order, binary label,
/// and its position in chronological order.
struct TransactionRecord {
    std::vector<std::pair<std::string, double>> features;
    int label = 0;
    int64_t time_index = 0;

    double feature(std::string_view name) const;  // throws MissingFeatureError
    bool has_feature(std::string_view name) const;
};

using Records = std::vector<TransactionRecord>;

enum class CategoricalPolicy {
    kAuto,  // a column is categorical if any cell is neither numeric nor missing
    kNone,  // all columns must be numeric or missing
};

struct CsvOptions {
    std::string label_column = "Class";
    std::string time_column = "Time";  // used for ordering when present
    bool drop_time_feature = true;
    CategoricalPolicy categorical_policy = CategoricalPolicy::kAuto;
};

/// Loads a CSV with a header row. Categorical columns are label-encoded by
/// the lexicographic rank of their distinct values; missing or NaN cells
/// become -999.0.
Records load_csv(const std::string& path, const CsvOptions& options = {});

/// Same cleaning applied to in-memory text (used by tests and the CLI).
Records load_csv_text(std::string_view text, const CsvOptions& options = {});

std::string to_csv(const Records& records, const std::string& label_column = "Class");

struct SplitDataset {
    Records train;
    Records validation;
    Records test;
};

/// Chronological 65/15/20 partition (floor/floor/remainder). Needs >= 20
/// records.
SplitDataset split(const Records& records);

/// Keeps every positive and a seeded uniform sample (without replacement) of
/// exactly `num_negatives` negatives, in chronological order.
Records undersample(const Records& train, size_t num_negatives, uint64_t seed);

struct SyntheticConfig {
    size_t n = 10000;
    double fraud_rate = 0.0172;
    size_t dimensions = 28;
    uint64_t seed = 0;
};

/// Gaussian class-conditional data, separable enough that a shallow boosted
/// model scores well. Not a realism claim; it exists so the full pipeline
/// runs without external datasets.
Records generate_synthetic(const SyntheticConfig& config);

struct MetricsReport {
    double auc_roc = 0.0;
    double average_precision = 0.0;
    double recall_fraud = 0.0;
    double recall_legit = 0.0;
};

/// P(score_pos > score_neg) with half credit for ties.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Mean of precision evaluated at each positive in descending-score order.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

/// Fraction of each true class labeled correctly at the threshold
/// (label 1 iff score >= threshold).
std::pair<double, double> recalls(const std::vector<double>& scores,
                                  const std::vector<int>& labels, double threshold = 0.5);

MetricsReport compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                              double threshold = 0.5);

}  // namespace hefraud::data

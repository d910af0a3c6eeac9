// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include "hefraud/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "hefraud/errors.hpp"
#include "hefraud/rng.hpp"

namespace hefraud::data {

namespace {

constexpr double kMissingValue = -999.0;

bool is_missing_token(const std::string& s) {
    if (s.empty()) return true;
    std::string lower;
    lower.reserve(s.size());
    for (char c : s) lower.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    return lower == "nan" || lower == "na" || lower == "null";
}

std::optional<double> parse_numeric(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + s.size()) return std::nullopt;
    if (std::isnan(v)) return std::nullopt;
    return v;
}

/// Splits one CSV line; handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line, size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (quoted) throw RowError("unterminated quote", line_no);
    fields.push_back(cur);
    return fields;
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // parallel to header
    std::vector<size_t> line_numbers;
};

RawTable parse_table(std::string_view text) {
    RawTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line, line_no);
        if (t.header.empty()) {
            t.header = std::move(fields);
        } else {
            if (fields.size() != t.header.size())
                throw RowError("expected " + std::to_string(t.header.size()) + " fields, got " +
                                   std::to_string(fields.size()),
                               line_no);
            t.rows.push_back(std::move(fields));
            t.line_numbers.push_back(line_no);
        }
    }
    if (t.header.empty()) throw SchemaError("CSV has no header row");
    return t;
}

}  // namespace

double TransactionRecord::feature(std::string_view name) const {
    for (const auto& [k, v] : features)
        if (k == name) return v;
    throw MissingFeatureError(std::string(name));
}

bool TransactionRecord::has_feature(std::string_view name) const {
    for (const auto& [k, v] : features)
        if (k == name) return true;
    return false;
}

Records load_csv_text(std::string_view text, const CsvOptions& options) {
    RawTable table = parse_table(text);

    auto col_index = [&](const std::string& name) -> std::optional<size_t> {
        for (size_t i = 0; i < table.header.size(); ++i)
            if (table.header[i] == name) return i;
        return std::nullopt;
    };

    auto label_col = col_index(options.label_column);
    if (!label_col) throw SchemaError("label column '" + options.label_column + "' not found");
    auto time_col = col_index(options.time_column);

    // Pass 1: find categorical columns and collect their distinct values.
    std::vector<bool> categorical(table.header.size(), false);
    std::vector<std::set<std::string>> distinct(table.header.size());
    for (size_t c = 0; c < table.header.size(); ++c) {
        if (c == *label_col) continue;
        for (size_t r = 0; r < table.rows.size(); ++r) {
            const std::string& cell = table.rows[r][c];
            if (is_missing_token(cell)) continue;
            if (!parse_numeric(cell)) {
                if (options.categorical_policy == CategoricalPolicy::kNone)
                    throw RowError("non-numeric value '" + cell + "' in column '" +
                                       table.header[c] + "'",
                                   table.line_numbers[r]);
                categorical[c] = true;
            }
        }
        if (categorical[c])
            for (const auto& row : table.rows)
                if (!is_missing_token(row[c])) distinct[c].insert(row[c]);
    }

    // Lexicographic rank per distinct value.
    std::vector<std::map<std::string, double>> encoding(table.header.size());
    for (size_t c = 0; c < table.header.size(); ++c) {
        double rank = 0;
        for (const auto& v : distinct[c]) encoding[c][v] = rank++;
    }

    Records out;
    out.reserve(table.rows.size());
    for (size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        TransactionRecord rec;
        auto label_val = parse_numeric(row[*label_col]);
        if (!label_val || (*label_val != 0.0 && *label_val != 1.0))
            throw RowError("label must be 0 or 1, got '" + row[*label_col] + "'",
                           table.line_numbers[r]);
        rec.label = int(*label_val);

        for (size_t c = 0; c < table.header.size(); ++c) {
            if (c == *label_col) continue;
            double value;
            if (is_missing_token(row[c])) {
                value = kMissingValue;
            } else if (categorical[c]) {
                value = encoding[c].at(row[c]);
            } else {
                auto v = parse_numeric(row[c]);
                if (!v)
                    throw RowError("unparseable value '" + row[c] + "' in column '" +
                                       table.header[c] + "'",
                                   table.line_numbers[r]);
                value = *v;
            }
            if (time_col && c == *time_col && options.drop_time_feature) continue;
            rec.features.emplace_back(table.header[c], value);
        }
        rec.time_index = int64_t(r);
        out.push_back(std::move(rec));
    }

    // Re-order chronologically by the time column when present, preserving
    // input order for ties, then renumber.
    if (time_col) {
        std::vector<size_t> idx(out.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::vector<double> keys(out.size());
        for (size_t r = 0; r < table.rows.size(); ++r) {
            auto v = parse_numeric(table.rows[r][*time_col]);
            keys[r] = v ? *v : double(r);
        }
        std::stable_sort(idx.begin(), idx.end(),
                         [&](size_t a, size_t b) { return keys[a] < keys[b]; });
        Records sorted;
        sorted.reserve(out.size());
        for (size_t i : idx) sorted.push_back(std::move(out[i]));
        out = std::move(sorted);
        for (size_t i = 0; i < out.size(); ++i) out[i].time_index = int64_t(i);
    }
    return out;
}

Records load_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open CSV file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_csv_text(buf.str(), options);
}

std::string to_csv(const Records& records, const std::string& label_column) {
    std::ostringstream out;
    if (records.empty()) return "";
    for (const auto& [name, _] : records.front().features) out << name << ",";
    out << label_column << "\n";
    out.precision(17);
    for (const auto& rec : records) {
        for (const auto& [_, v] : rec.features) out << v << ",";
        out << rec.label << "\n";
    }
    return out.str();
}

SplitDataset split(const Records& records) {
    if (records.size() < 20) throw SizeError("split requires at least 20 records");
    size_t n = records.size();
    size_t n_train = size_t(std::floor(0.65 * double(n)));
    size_t n_val = size_t(std::floor(0.15 * double(n)));
    SplitDataset out;
    out.train.assign(records.begin(), records.begin() + long(n_train));
    out.validation.assign(records.begin() + long(n_train), records.begin() + long(n_train + n_val));
    out.test.assign(records.begin() + long(n_train + n_val), records.end());
    return out;
}

Records undersample(const Records& train, size_t num_negatives, uint64_t seed) {
    std::vector<size_t> negatives;
    for (size_t i = 0; i < train.size(); ++i)
        if (train[i].label == 0) negatives.push_back(i);
    if (num_negatives > negatives.size())
        throw ParameterError("undersample: requested " + std::to_string(num_negatives) +
                             " negatives but only " + std::to_string(negatives.size()) +
                             " available");

    // Partial Fisher-Yates for a uniform sample without replacement.
    Rng rng(seed);
    for (size_t i = 0; i < num_negatives; ++i) {
        size_t j = i + size_t(rng.uniform(uint64_t(negatives.size() - i)));
        std::swap(negatives[i], negatives[j]);
    }
    std::vector<bool> keep(train.size(), false);
    for (size_t i = 0; i < train.size(); ++i)
        if (train[i].label == 1) keep[i] = true;
    for (size_t i = 0; i < num_negatives; ++i) keep[negatives[i]] = true;

    Records out;
    for (size_t i = 0; i < train.size(); ++i)
        if (keep[i]) out.push_back(train[i]);
    std::stable_sort(out.begin(), out.end(), [](const TransactionRecord& a, const TransactionRecord& b) {
        return a.time_index < b.time_index;
    });
    return out;
}

Records generate_synthetic(const SyntheticConfig& config) {
    if (!(config.fraud_rate > 0.0 && config.fraud_rate < 1.0))
        throw ParameterError("fraud_rate must lie in (0, 1)");
    if (config.dimensions < 1) throw ParameterError("dimensions must be >= 1");

    Rng rng(config.seed);
    size_t informative = std::min<size_t>(4, config.dimensions);

    Records out;
    out.reserve(config.n);
    for (size_t i = 0; i < config.n; ++i) {
        TransactionRecord rec;
        rec.label = rng.bernoulli(config.fraud_rate) ? 1 : 0;
        rec.time_index = int64_t(i);
        rec.features.reserve(config.dimensions);
        for (size_t d = 0; d < config.dimensions; ++d) {
            double mean = 0.0;
            if (d < informative) mean = rec.label == 1 ? 2.0 : -0.1;
            double v = rng.normal(mean, 1.0);
            rec.features.emplace_back("V" + std::to_string(d + 1), v);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

namespace {
void require_both_classes(const std::vector<int>& labels) {
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw MetricError("metric undefined for single-class labels");
}
}  // namespace

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ShapeError("scores/labels size mismatch");
    require_both_classes(labels);

    // Rank-based Mann-Whitney with midranks for ties.
    size_t n = scores.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    size_t n_pos = 0, n_neg = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        double midrank = (double(i + 1) + double(j)) / 2.0;  // 1-based midrank
        for (size_t k = i; k < j; ++k)
            if (labels[idx[k]] == 1) pos_rank_sum += midrank;
        i = j;
    }
    for (int y : labels) (y == 1 ? n_pos : n_neg) += 1;
    double u = pos_rank_sum - double(n_pos) * (double(n_pos) + 1) / 2.0;
    return u / (double(n_pos) * double(n_neg));
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ShapeError("scores/labels size mismatch");
    require_both_classes(labels);

    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    double tp = 0, seen = 0, sum_precision = 0;
    for (size_t k : idx) {
        seen += 1;
        if (labels[k] == 1) {
            tp += 1;
            sum_precision += tp / seen;
        }
    }
    return sum_precision / tp;
}

std::pair<double, double> recalls(const std::vector<double>& scores,
                                  const std::vector<int>& labels, double threshold) {
    if (scores.size() != labels.size()) throw ShapeError("scores/labels size mismatch");
    double pos_correct = 0, pos_total = 0, neg_correct = 0, neg_total = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        int predicted = scores[i] >= threshold ? 1 : 0;
        if (labels[i] == 1) {
            pos_total += 1;
            if (predicted == 1) pos_correct += 1;
        } else {
            neg_total += 1;
            if (predicted == 0) neg_correct += 1;
        }
    }
    return {pos_total > 0 ? pos_correct / pos_total : 0.0,
            neg_total > 0 ? neg_correct / neg_total : 0.0};
}

MetricsReport compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                              double threshold) {
    MetricsReport r;
    r.auc_roc = auc_roc(scores, labels);
    r.average_precision = average_precision(scores, labels);
    auto [rf, rl] = recalls(scores, labels, threshold);
    r.recall_fraud = rf;
    r.recall_legit = rl;
    return r;
}

}  // namespace hefraud::data

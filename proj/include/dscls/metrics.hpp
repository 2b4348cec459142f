// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0
//
// Confusion-matrix metrics: accuracy and precision/recall/F1 under weighted,
// micro and macro averaging. 0/0 ratios evaluate to 0 and set the per-class
// `zero_division` flag.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dscls {

class MetricsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// counts[t][p]: rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::vector<std::vector<std::int64_t>> counts;

    std::size_t num_classes() const { return counts.size(); }
    std::int64_t total() const;

    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t num_classes);

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const PRF&) const = default;
};

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
    bool zero_division = false;

    bool operator==(const ClassMetrics&) const = default;
};

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    PRF weighted;
    PRF micro;
    PRF macro;
    ConfusionMatrix confusion;

    bool operator==(const MetricsReport&) const = default;
};

/// Labels default to "0", "1", ... when class_names is empty.
MetricsReport compute(const ConfusionMatrix& matrix, std::span<const std::string> class_names = {});

enum class ReportStyle { Table3, AblationRow, Json };

ReportStyle report_style_from_string(std::string_view s);

/// table3: Recall, Precision, F1 Score, Accuracy (macro P/R/F1).
/// ablation_row: the six metric rows of the ablation tables.
/// json: full report, stable key order.
std::string render(const MetricsReport& report, ReportStyle style);

std::string to_json(const MetricsReport& report);
MetricsReport report_from_json(std::string_view json);

// Fixed-point rendering used by every table.
std::string format4(double v);

// Row labels of the ablation tables, top to bottom.
const std::vector<std::string>& ablation_row_labels();
// Values for those rows, in the same order.
std::vector<double> ablation_row_values(const MetricsReport& report);

} // namespace dscls

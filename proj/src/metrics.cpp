// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/metrics.hpp"

#include <cstdio>

#include "json.hpp"

namespace dscls {

std::int64_t ConfusionMatrix::total() const {
    std::int64_t n = 0;
    for (const auto& row : counts) {
        for (auto c : row) n += c;
    }
    return n;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t num_classes) {
    if (preds.size() != labels.size()) {
        throw MetricsError("preds and labels differ in length (" + std::to_string(preds.size()) + " vs " +
                           std::to_string(labels.size()) + ")");
    }
    if (preds.empty()) throw MetricsError("empty prediction list");
    if (num_classes == 0) throw MetricsError("num_classes must be >= 1");
    ConfusionMatrix m;
    m.counts.assign(num_classes, std::vector<std::int64_t>(num_classes, 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int p = preds[i], t = labels[i];
        if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= num_classes || static_cast<std::size_t>(t) >= num_classes) {
            throw MetricsError("class id out of range at index " + std::to_string(i));
        }
        ++m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    return m;
}

namespace {

struct Ratio {
    double value;
    bool undefined;
};

Ratio safe_div(double num, double den) {
    if (den == 0.0) return {0.0, true};
    return {num / den, false};
}

} // namespace

MetricsReport compute(const ConfusionMatrix& matrix, std::span<const std::string> class_names) {
    const std::size_t c = matrix.num_classes();
    for (const auto& row : matrix.counts) {
        if (row.size() != c) throw MetricsError("confusion matrix must be square");
        for (auto v : row) {
            if (v < 0) throw MetricsError("confusion counts must be non-negative");
        }
    }
    const std::int64_t total = matrix.total();
    if (c == 0 || total < 1) throw MetricsError("empty confusion matrix");
    if (!class_names.empty() && class_names.size() != c) {
        throw MetricsError("expected " + std::to_string(c) + " class names, got " + std::to_string(class_names.size()));
    }

    MetricsReport r;
    r.confusion = matrix;
    const double n = static_cast<double>(total);
    std::int64_t trace = 0;
    for (std::size_t i = 0; i < c; ++i) {
        std::int64_t col = 0, row = 0;
        for (std::size_t k = 0; k < c; ++k) {
            col += matrix.counts[k][i];
            row += matrix.counts[i][k];
        }
        const std::int64_t tp = matrix.counts[i][i];
        trace += tp;
        const Ratio p = safe_div(static_cast<double>(tp), static_cast<double>(col));
        const Ratio rc = safe_div(static_cast<double>(tp), static_cast<double>(row));
        const Ratio f = safe_div(2.0 * p.value * rc.value, p.value + rc.value);
        ClassMetrics cm;
        cm.label = class_names.empty() ? std::to_string(i) : class_names[i];
        cm.precision = p.value;
        cm.recall = rc.value;
        cm.f1 = f.value;
        cm.support = row;
        cm.zero_division = p.undefined || rc.undefined || f.undefined;
        r.per_class.push_back(std::move(cm));
    }

    r.accuracy = static_cast<double>(trace) / n;
    for (const auto& cm : r.per_class) {
        const double w = static_cast<double>(cm.support);
        r.weighted.precision += w * cm.precision;
        r.weighted.f1 += w * cm.f1;
        r.macro.precision += cm.precision;
        r.macro.recall += cm.recall;
        r.macro.f1 += cm.f1;
    }
    r.weighted.precision /= n;
    r.weighted.f1 /= n;
    // Support-weighted recall reduces to sum(TP) / N.
    r.weighted.recall = r.accuracy;
    r.macro.precision /= static_cast<double>(c);
    r.macro.recall /= static_cast<double>(c);
    r.macro.f1 /= static_cast<double>(c);

    // Pooled counts: FP = FN = N - trace for single-label data.
    const double tp = static_cast<double>(trace);
    const double err = n - tp;
    r.micro.precision = tp / (tp + err);
    r.micro.recall = tp / (tp + err);
    r.micro.f1 = 2.0 * tp / (2.0 * tp + err + err);
    return r;
}

ReportStyle report_style_from_string(std::string_view s) {
    if (s == "table3") return ReportStyle::Table3;
    if (s == "ablation_row" || s == "ablation-row") return ReportStyle::AblationRow;
    if (s == "json") return ReportStyle::Json;
    throw MetricsError("unknown report style '" + std::string(s) + "'");
}

std::string format4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

const std::vector<std::string>& ablation_row_labels() {
    static const std::vector<std::string> labels = {
        "Accuracy", "Weighted Precision", "Weighted Recall", "Weighted F1 Score", "Micro Precision", "Micro Recall",
    };
    return labels;
}

std::vector<double> ablation_row_values(const MetricsReport& r) {
    return {r.accuracy, r.weighted.precision, r.weighted.recall, r.weighted.f1, r.micro.precision, r.micro.recall};
}

std::string render(const MetricsReport& report, ReportStyle style) {
    std::string out;
    switch (style) {
    case ReportStyle::Table3: {
        out = "| Metric | Score |\n|---|---|\n";
        const std::pair<const char*, double> rows[] = {
            {"Recall", report.macro.recall},
            {"Precision", report.macro.precision},
            {"F1 Score", report.macro.f1},
            {"Accuracy", report.accuracy},
        };
        for (const auto& [name, v] : rows) {
            out += std::string("| ") + name + " | " + format4(v) + " |\n";
        }
        return out;
    }
    case ReportStyle::AblationRow: {
        out = "| Metric | Value |\n|---|---|\n";
        const auto values = ablation_row_values(report);
        for (std::size_t i = 0; i < values.size(); ++i) {
            out += "| " + ablation_row_labels()[i] + " | " + format4(values[i]) + " |\n";
        }
        return out;
    }
    case ReportStyle::Json:
        return to_json(report) + "\n";
    }
    return out;
}

namespace {

nlohmann::ordered_json prf_json(const PRF& p) {
    return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

PRF prf_from(const nlohmann::json& j) {
    return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

} // namespace

std::string to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["accuracy"] = r.accuracy;
    auto per_class = nlohmann::ordered_json::array();
    for (const auto& c : r.per_class) {
        per_class.push_back(nlohmann::ordered_json{{"label", c.label},
                                                   {"precision", c.precision},
                                                   {"recall", c.recall},
                                                   {"f1", c.f1},
                                                   {"support", c.support}});
    }
    j["per_class"] = std::move(per_class);
    j["weighted"] = prf_json(r.weighted);
    j["micro"] = prf_json(r.micro);
    j["macro"] = prf_json(r.macro);
    j["confusion"] = r.confusion.counts;
    return j.dump();
}

MetricsReport report_from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        MetricsReport r;
        r.accuracy = j.at("accuracy").get<double>();
        r.weighted = prf_from(j.at("weighted"));
        r.micro = prf_from(j.at("micro"));
        r.macro = prf_from(j.at("macro"));
        r.confusion.counts = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
        const auto& counts = r.confusion.counts;
        for (std::size_t i = 0; i < j.at("per_class").size(); ++i) {
            const auto& pc = j.at("per_class")[i];
            ClassMetrics c;
            c.label = pc.at("label").get<std::string>();
            c.precision = pc.at("precision").get<double>();
            c.recall = pc.at("recall").get<double>();
            c.f1 = pc.at("f1").get<double>();
            c.support = pc.at("support").get<std::int64_t>();
            if (i < counts.size()) {
                std::int64_t col = 0;
                for (const auto& row : counts) col += row.at(i);
                const std::int64_t tp = counts[i].at(i);
                c.zero_division = col == 0 || c.support == 0 || tp == 0;
            }
            r.per_class.push_back(std::move(c));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw MetricsError(std::string("metrics json: ") + e.what());
    }
}

} // namespace dscls

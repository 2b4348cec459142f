// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "dscls/metrics.hpp"

namespace dscls {

AblationSpec AblationSpec::standard(RunConfig baseline) {
    AblationSpec spec;
    spec.baseline = std::move(baseline);
    spec.variants = {
        {"Sequence Length (128)", "train.max_len", "128"},
        {"Learning Rate (1e-5)", "train.base_lr", "1e-5"},
        {"Batch Size (8)", "train.train_batch", "8"},
    };
    return spec;
}

std::vector<std::string> AblationSpec::columns() const {
    std::vector<std::string> out{"Original"};
    for (const auto& v : variants) out.push_back(v.column);
    return out;
}

std::vector<RunConfig> AblationSpec::resolve() const {
    std::vector<RunConfig> out{baseline};
    for (const auto& v : variants) {
        RunConfig c = baseline;
        set_field(c, v.field, v.value);
        const auto diff = diff_fields(baseline, c);
        if (diff.size() != 1) {
            std::string list;
            for (const auto& d : diff) list += (list.empty() ? "" : ", ") + d;
            throw ConfigError("variant '" + v.column + "' must change exactly one field, changes " +
                              std::to_string(diff.size()) + (list.empty() ? "" : " (" + list + ")"));
        }
        c.validate();
        out.push_back(std::move(c));
    }
    return out;
}

AblationResult run_ablation(const AblationSpec& spec, const Vocabulary& vocab, const TaskSchema& schema,
                            std::span<const LabeledExample> train_data, std::span<const LabeledExample> valid_data,
                            unsigned threads) {
    const auto configs = spec.resolve();
    const auto names = spec.columns();
    AblationResult result;
    result.table.columns.resize(configs.size());
    result.runs.resize(configs.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            AblationColumn& col = result.table.columns[i];
            AblationRun& run = result.runs[i];
            col.name = names[i];
            run.config = configs[i];
            try {
                TrainResult tr = train(configs[i], vocab, schema, train_data, valid_data);
                const auto report = evaluate(tr.params, configs[i].model, vocab, schema, valid_data,
                                             configs[i].train.eval_batch, configs[i].train.max_len);
                col.values = ablation_row_values(report);
                run.log = std::move(tr.log);
            } catch (const std::exception& e) {
                col.error = e.what();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(configs.size()));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }
    return result;
}

TableFormat table_format_from_string(std::string_view s) {
    if (s == "markdown" || s == "md") return TableFormat::Markdown;
    if (s == "latex" || s == "tex") return TableFormat::Latex;
    if (s == "json") return TableFormat::Json;
    throw ConfigError("unknown table format '" + std::string(s) + "'");
}

namespace {

std::string cell(const AblationColumn& col, std::size_t row) {
    return col.values ? format4((*col.values)[row]) : "FAILED";
}

std::string latex_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&' || c == '%' || c == '$' || c == '#' || c == '_') out += '\\';
        out += c;
    }
    return out;
}

} // namespace

std::string render_table(const AblationTable& table, TableFormat format) {
    const auto& labels = ablation_row_labels();
    std::string out;
    switch (format) {
    case TableFormat::Markdown: {
        out = "| Metric |";
        std::string rule = "|---|";
        for (const auto& col : table.columns) {
            out += " " + col.name + " |";
            rule += "---|";
        }
        out += "\n" + rule + "\n";
        for (std::size_t r = 0; r < labels.size(); ++r) {
            out += "| " + labels[r] + " |";
            for (const auto& col : table.columns) out += " " + cell(col, r) + " |";
            out += "\n";
        }
        return out;
    }
    case TableFormat::Latex: {
        out = "\\begin{tabular}{l" + std::string(table.columns.size(), 'c') + "}\n\\hline\nMetric";
        for (const auto& col : table.columns) out += " & " + latex_escape(col.name);
        out += " \\\\\n\\hline\n";
        for (std::size_t r = 0; r < labels.size(); ++r) {
            out += labels[r];
            for (const auto& col : table.columns) out += " & " + cell(col, r);
            out += " \\\\\n";
        }
        out += "\\hline\n\\end{tabular}\n";
        return out;
    }
    case TableFormat::Json: {
        Json j;
        j["rows"] = labels;
        auto cols = Json::array();
        for (const auto& col : table.columns) {
            Json c;
            c["name"] = col.name;
            c["values"] = col.values ? Json(*col.values) : Json(nullptr);
            if (!col.error.empty()) c["error"] = col.error;
            cols.push_back(std::move(c));
        }
        j["columns"] = std::move(cols);
        return j.dump(2) + "\n";
    }
    }
    return out;
}

AblationTable table_from_json(std::string_view json) {
    try {
        const auto j = nlohmann::json::parse(json);
        if (j.at("rows").get<std::vector<std::string>>() != ablation_row_labels()) {
            throw ConfigError("ablation table rows do not match the metric list");
        }
        AblationTable t;
        for (const auto& c : j.at("columns")) {
            AblationColumn col;
            col.name = c.at("name").get<std::string>();
            if (!c.at("values").is_null()) col.values = c.at("values").get<std::vector<double>>();
            if (c.contains("error")) col.error = c.at("error").get<std::string>();
            t.columns.push_back(std::move(col));
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("ablation table json: ") + e.what());
    }
}

} // namespace dscls

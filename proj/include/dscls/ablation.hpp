// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0
//
// One-factor-at-a-time ablation: a baseline run plus variants that each
// override exactly one configuration field, rendered as a metric-by-run table.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dscls/config.hpp"
#include "dscls/data.hpp"
#include "dscls/engine.hpp"
#include "dscls/tokenizer.hpp"

namespace dscls {

struct AblationVariant {
    std::string column; // table header, e.g. "Batch Size (8)"
    std::string field;  // as accepted by set_field
    std::string value;
};

struct AblationSpec {
    RunConfig baseline;
    std::vector<AblationVariant> variants;

    /// The three standard variants over `baseline`.
    static AblationSpec standard(RunConfig baseline);

    /// Resolved config of every column, baseline first. Throws ConfigError if
    /// a variant does not differ from the baseline in exactly one field.
    std::vector<RunConfig> resolve() const;
    std::vector<std::string> columns() const;
};

struct AblationColumn {
    std::string name;
    std::optional<std::vector<double>> values; // ablation_row_values; empty when the run failed
    std::string error;

    bool operator==(const AblationColumn&) const = default;
};

struct AblationTable {
    std::vector<AblationColumn> columns;

    bool operator==(const AblationTable&) const = default;
};

struct AblationRun {
    RunConfig config;
    std::optional<RunLog> log;
};

struct AblationResult {
    AblationTable table;
    std::vector<AblationRun> runs;
};

/// Trains every column from scratch on the same data and evaluates the
/// selected parameters on `valid`. `threads` = 0 picks the hardware count.
AblationResult run_ablation(const AblationSpec& spec, const Vocabulary& vocab, const TaskSchema& schema,
                            std::span<const LabeledExample> train_data, std::span<const LabeledExample> valid_data,
                            unsigned threads = 0);

enum class TableFormat { Markdown, Latex, Json };
TableFormat table_format_from_string(std::string_view s);

std::string render_table(const AblationTable& table, TableFormat format);
AblationTable table_from_json(std::string_view json);

} // namespace dscls

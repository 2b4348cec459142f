// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dscls {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LabeledExample {
    std::string text;
    int label = 0;

    bool operator==(const LabeledExample&) const = default;
};

/// Ordered class list of a task. Class ids are positions in `classes`.
struct TaskSchema {
    std::string name;
    std::vector<std::string> classes;

    static TaskSchema subtask_b(); // ["non-hate", "hate"]
    static TaskSchema subtask_c(); // ["individual", "organization", "community"]
    // Accepts "subtask_b", "subtask-b", "subtask_c", "subtask-c".
    static TaskSchema from_name(std::string_view name);

    std::size_t num_classes() const { return classes.size(); }
    // Exact (case-sensitive) class name, or an integer already in range.
    std::optional<int> parse_label(std::string_view value) const;

    bool operator==(const TaskSchema&) const = default;
};

// ---- CSV (RFC 4180) -----------------------------------------------------------

using CsvRow = std::vector<std::string>;

/// Parses quoted fields with embedded commas, CRLF/LF line breaks and doubled
/// quotes. A trailing line break does not produce an empty record.
std::vector<CsvRow> parse_csv(std::string_view content);
std::string format_csv_field(std::string_view field);
std::string format_csv(const std::vector<CsvRow>& rows);

std::vector<LabeledExample> load_csv(const std::filesystem::path& path, const TaskSchema& schema,
                                     const std::string& text_column = "text",
                                     const std::string& label_column = "label");
// Same, from in-memory content.
std::vector<LabeledExample> parse_labeled_csv(std::string_view content, const TaskSchema& schema,
                                              const std::string& text_column = "text",
                                              const std::string& label_column = "label");

/// Writes `text,label` with label names from the schema.
void write_csv(const std::filesystem::path& path, std::span<const LabeledExample> examples, const TaskSchema& schema);
std::string to_csv(std::span<const LabeledExample> examples, const TaskSchema& schema);

/// Text-only input for prediction: the `text` column, or the first column.
std::vector<std::string> load_texts(const std::filesystem::path& path, const std::string& text_column = "text");

struct Prediction {
    std::string label;
    double confidence = 0.0;

    bool operator==(const Prediction&) const = default;
};

/// `index,predicted_label,confidence` with confidence at 6 decimals.
std::string predictions_csv(std::span<const Prediction> predictions);

// ---- batching and splits ----------------------------------------------------------

/// Index batches: seeded Fisher-Yates when shuffling, final short batch kept.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, bool shuffle,
                                                    std::uint64_t seed);

std::vector<std::vector<LabeledExample>> batches(std::span<const LabeledExample> data, std::size_t batch_size,
                                                 bool shuffle, std::uint64_t seed);

// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

struct SplitSpec {
    // Either explicit counts (summing to the dataset size) or fractions.
    std::optional<std::size_t> train_count, valid_count, test_count;
    double train_fraction = 0.7;
    double valid_fraction = 0.15;
    std::uint64_t seed = 0;
};

struct DataSplits {
    std::vector<LabeledExample> train, valid, test;
};

DataSplits split_dataset(std::span<const LabeledExample> data, const SplitSpec& spec);

// ---- synthetic corpus ---------------------------------------------------------------

/// Class-conditioned Devanagari strings. Each example holds 6..10 words; a
/// `separability` fraction of them (rounded) are markers exclusive to the
/// example's class, the rest come from a shared neutral inventory. Class
/// counts differ by at most one. Integer-only generation, so output is
/// identical on every platform for a given seed.
std::vector<LabeledExample> synth_corpus(const TaskSchema& schema, std::size_t n, std::uint64_t seed,
                                         double separability);

// Marker words used for a class by synth_corpus.
std::vector<std::string> synth_markers(std::size_t class_id);

} // namespace dscls

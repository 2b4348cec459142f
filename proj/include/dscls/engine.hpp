// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0
//
// Training and evaluation loop: seeded epochs over shuffled batches,
// AdamW + warmup schedule + clipping, per-epoch validation metrics and
// best-epoch selection.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dscls/config.hpp"
#include "dscls/data.hpp"
#include "dscls/metrics.hpp"
#include "dscls/model.hpp"
#include "dscls/optim.hpp"
#include "dscls/tokenizer.hpp"

namespace dscls {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double mean_train_loss = 0.0;
    MetricsReport validation;
    double lr_at_epoch_end = 0.0; // lr used by the epoch's last step
    double wall_time_s = 0.0;
};

struct RunLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0; // 1-based; the epoch whose parameters were returned
    std::size_t total_steps = 0;

    /// One JSON object per epoch. Wall time is excluded so identical runs
    /// serialize to identical bytes; see timing_jsonl().
    std::string to_jsonl() const;
    std::string timing_jsonl() const;
};

struct TrainResult {
    Parameters params; // selected epoch (best or last per TrainConfig::select)
    RunLog log;
    OptimState optim;   // state after the final step
};

// Called after each epoch; for progress output only.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Encodes, trains and validates. The vocabulary must fit model.vocab_size and
/// train.max_len must fit model.max_len.
TrainResult train(const RunConfig& config, const Vocabulary& vocab, const TaskSchema& schema,
                  std::span<const LabeledExample> train_data, std::span<const LabeledExample> valid_data,
                  const EpochCallback& on_epoch = {});

/// Class decisions for pre-encoded examples: argmax for the softmax head,
/// strict p > 0.5 for the sigmoid head.
std::vector<int> predict_classes(const Parameters& params, const ModelConfig& model,
                                 std::span<const EncodedExample> examples, std::size_t eval_batch);

std::vector<EncodedExample> encode_all(const Vocabulary& vocab, std::span<const LabeledExample> data,
                                       std::size_t max_len);

MetricsReport evaluate(const Parameters& params, const ModelConfig& model, const Vocabulary& vocab,
                       const TaskSchema& schema, std::span<const LabeledExample> data, std::size_t eval_batch,
                       std::size_t max_len);

/// Per text: label name of the most probable class and its probability.
std::vector<Prediction> predict(const Parameters& params, const ModelConfig& model, const Vocabulary& vocab,
                                const TaskSchema& schema, std::span<const std::string> texts, std::size_t max_len,
                                std::size_t eval_batch = 64);

/// Parameters rounded through 32-bit floats, as a checkpoint stores them.
Parameters float32_snapshot(const Parameters& params);

double selection_value(const MetricsReport& report, SelectionMetric metric);

} // namespace dscls

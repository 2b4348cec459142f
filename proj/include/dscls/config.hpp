// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dscls/model.hpp"

namespace dscls {

enum class SelectionMetric { WeightedF1, Accuracy };
enum class SelectMode { Best, Last };

struct TrainConfig {
    std::size_t epochs = 3;
    std::size_t train_batch = 16;
    std::size_t eval_batch = 64;
    std::size_t max_len = 256;
    double base_lr = 2e-5;
    double warmup_fraction = 0.1;
    double clip_norm = 1.0; // 0 disables clipping
    double weight_decay = 0.01;
    std::uint64_t seed = 42;
    SelectionMetric selection_metric = SelectionMetric::WeightedF1;
    SelectMode select = SelectMode::Best;
    bool freeze_encoder = false;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// Model + training configuration of one run.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;

    // Both sections, plus train.max_len <= model.max_len.
    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

using Json = nlohmann::ordered_json;

Json to_json(const ModelConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const RunConfig& c);

// Overlay: keys present in `j` replace the corresponding fields of `base`.
// Unknown keys are rejected with ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Sets one field by name. Bare names resolve against TrainConfig first, then
/// ModelConfig; "model.<name>" / "train.<name>" are explicit. `value` is
/// parsed as JSON when possible, otherwise taken as a string.
void set_field(RunConfig& config, std::string_view field, std::string_view value);

/// Fully qualified names ("train.max_len", ...) of fields that differ.
std::vector<std::string> diff_fields(const RunConfig& a, const RunConfig& b);

} // namespace dscls

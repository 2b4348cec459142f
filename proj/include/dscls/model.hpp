// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0
//
// Transformer encoder with a CLS-pooled classification head:
//
//   token + position embeddings
//   -> N x [ x = LN(x + MHA(x)); x = LN(x + FFN_gelu(x)) ]
//   -> hidden state at position 0
//   -> pre_classifier (H -> H) -> ReLU -> dropout(0.3) -> classifier
//
// The classifier emits one logit read through a sigmoid (scalar_sigmoid) or
// num_classes logits read through a softmax (softmax).

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dscls/autodiff.hpp"
#include "dscls/tensor.hpp"
#include "dscls/tokenizer.hpp"

namespace dscls {

inline constexpr double kHeadDropout = 0.3;

enum class HeadMode { ScalarSigmoid, Softmax };

std::string to_string(HeadMode mode);
HeadMode head_mode_from_string(const std::string& s);
HeadMode default_head_mode(std::size_t num_classes);

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
    std::size_t vocab_size = 1000;
    std::size_t hidden = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t ffn = 128;
    std::size_t max_len = 64; // positional capacity
    double head_dropout = kHeadDropout;
    double encoder_dropout = 0.1;
    std::size_t num_classes = 2;
    HeadMode head_mode = HeadMode::ScalarSigmoid;

    // Throws ConfigError naming the violated constraint.
    void validate() const;
    std::size_t output_dim() const { return head_mode == HeadMode::ScalarSigmoid ? 1 : num_classes; }

    bool operator==(const ModelConfig&) const = default;
};

using Parameters = TensorMap;

/// Name -> shape for every tensor the config requires.
std::map<std::string, Shape> parameter_shapes(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);

/// Truncated-normal(0, 0.02) weights clipped at 2 sigma, zero biases, unit
/// layernorm scales. Each tensor draws from its own stream keyed by its name.
Parameters init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Verifies names and shapes against the config; throws ConfigError naming
/// the first offending tensor.
void check_parameters(const Parameters& params, const ModelConfig& config);

bool is_head_parameter(const std::string& name);
bool is_layernorm_parameter(const std::string& name);

/// Row-major [batch x seq] ids and masks.
struct TokenBatch {
    std::size_t batch = 0;
    std::size_t seq = 0;
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;

    static TokenBatch from_examples(std::span<const EncodedExample> examples);
    static TokenBatch from_rows(const std::vector<std::vector<int>>& ids, const std::vector<std::vector<std::uint8_t>>& mask);

    // Drops trailing columns that are padding in every row.
    TokenBatch trimmed() const;
};

using ParamVars = std::map<std::string, Var>;

/// Places parameters on a tape. Tensors for which `trainable` returns false
/// become constants.
ParamVars bind_parameters(Tape& tape, const Parameters& params, bool (*trainable)(const std::string&) = nullptr);

/// Logits on the tape: [batch x 1] for scalar_sigmoid, [batch x C] for softmax.
Var forward(const ParamVars& params, const ModelConfig& config, const TokenBatch& batch, bool train,
            CounterRng& rng);

/// Head activations after pre_classifier, ReLU and dropout, for CLS input [B x H].
Var head_hidden(const ParamVars& params, const ModelConfig& config, Var cls, bool train, CounterRng& rng);

Tensor forward(const Parameters& params, const ModelConfig& config, const TokenBatch& batch, bool train,
               std::uint64_t rng_seed);

Tensor probabilities_from_logits(const Tensor& logits, HeadMode mode);
Tensor predict_proba(const Parameters& params, const ModelConfig& config, const TokenBatch& batch);

} // namespace dscls

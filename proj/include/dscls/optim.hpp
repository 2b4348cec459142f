// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0
//
// AdamW with decoupled weight decay, a linear warmup / linear decay learning
// rate schedule, and global-norm gradient clipping.

#pragma once

#include <cstddef>
#include <stdexcept>

#include "dscls/tensor.hpp"

namespace dscls {

class OptimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamWHyper {
    double base_lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct Schedule {
    std::size_t warmup_steps = 0;
    std::size_t total_steps = 0;
};

struct OptimState {
    std::size_t step = 0;
    TensorMap m;
    TensorMap v;
    AdamWHyper hyper;
    Schedule schedule;
    double clip_norm = 1.0; // 0 disables clipping

    static OptimState create(const TensorMap& params, AdamWHyper hyper, Schedule schedule, double clip_norm = 1.0);
};

// Default warmup: ceil(0.1 * total) steps.
std::size_t default_warmup_steps(std::size_t total_steps, double warmup_fraction = 0.1);

double lr_at(const Schedule& schedule, double base_lr, std::size_t step);
inline double lr_at(const OptimState& state, std::size_t step) {
    return lr_at(state.schedule, state.hyper.base_lr, step);
}

double global_norm(const TensorMap& grads);

/// Scales every gradient by clip_norm / norm when the global L2 norm exceeds
/// clip_norm. Returns the scale applied (1.0 if untouched). Throws
/// OptimError("non-finite gradient") before modifying anything.
double clip_global_norm(TensorMap& grads, double clip_norm);

// Biases and layernorm parameters are not decayed.
bool is_decay_exempt(const std::string& name);

/// One AdamW update of every parameter present in `grads`, using
/// lr_at(state, state.step) and bias correction at t = state.step + 1.
void adamw_step(TensorMap& params, const TensorMap& grads, OptimState& state);

// Same update with an explicit learning rate.
void adamw_step(TensorMap& params, const TensorMap& grads, OptimState& state, double lr);

} // namespace dscls

// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/optim.hpp"

#include <cmath>

namespace dscls {

OptimState OptimState::create(const TensorMap& params, AdamWHyper hyper, Schedule schedule, double clip_norm) {
    if (schedule.warmup_steps > schedule.total_steps) {
        throw OptimError("warmup_steps exceeds total_steps");
    }
    OptimState s;
    s.hyper = hyper;
    s.schedule = schedule;
    s.clip_norm = clip_norm;
    for (const auto& [name, p] : params) {
        s.m.emplace(name, Tensor(p.shape, 0.0));
        s.v.emplace(name, Tensor(p.shape, 0.0));
    }
    return s;
}

std::size_t default_warmup_steps(std::size_t total_steps, double warmup_fraction) {
    return static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps)));
}

double lr_at(const Schedule& s, double base_lr, std::size_t step) {
    if (step < s.warmup_steps) {
        return base_lr * (static_cast<double>(step) / static_cast<double>(s.warmup_steps));
    }
    if (step > s.total_steps) {
        return 0.0;
    }
    if (s.total_steps == s.warmup_steps) {
        return base_lr;
    }
    return base_lr *
           (static_cast<double>(s.total_steps - step) / static_cast<double>(s.total_steps - s.warmup_steps));
}

double global_norm(const TensorMap& grads) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) {
        for (double x : g.data) {
            sq += x * x;
        }
    }
    return std::sqrt(sq);
}

double clip_global_norm(TensorMap& grads, double clip_norm) {
    if (!(clip_norm > 0.0)) {
        throw OptimError("clip_norm must be positive");
    }
    for (const auto& [name, g] : grads) {
        for (double x : g.data) {
            if (!std::isfinite(x)) throw OptimError("non-finite gradient");
        }
    }
    const double norm = global_norm(grads);
    if (!std::isfinite(norm)) throw OptimError("non-finite gradient");
    if (norm <= clip_norm) {
        return 1.0;
    }
    const double scale = clip_norm / norm;
    for (auto& [name, g] : grads) {
        for (double& x : g.data) {
            x *= scale;
        }
    }
    return scale;
}

bool is_decay_exempt(const std::string& name) {
    return name.ends_with(".bias") || name.find("_norm.") != std::string::npos;
}

void adamw_step(TensorMap& params, const TensorMap& grads, OptimState& state) {
    adamw_step(params, grads, state, lr_at(state, state.step));
}

void adamw_step(TensorMap& params, const TensorMap& grads, OptimState& state, double lr) {
    const auto& h = state.hyper;
    const double t = static_cast<double>(state.step + 1);
    const double bc1 = 1.0 - std::pow(h.beta1, t);
    const double bc2 = 1.0 - std::pow(h.beta2, t);

    for (const auto& [name, g] : grads) {
        auto pit = params.find(name);
        auto mit = state.m.find(name);
        auto vit = state.v.find(name);
        if (pit == params.end() || mit == state.m.end() || vit == state.v.end()) {
            throw OptimError("no parameter or moment named '" + name + "'");
        }
        if (pit->second.shape != g.shape || mit->second.shape != g.shape || vit->second.shape != g.shape) {
            throw OptimError("shape mismatch for '" + name + "': param " + shape_str(pit->second.shape) + " vs grad " +
                             shape_str(g.shape));
        }
    }
    for (const auto& [name, g] : grads) {
        auto& p = params.at(name).data;
        auto& m = state.m.at(name).data;
        auto& v = state.v.at(name).data;
        const double wd = is_decay_exempt(name) ? 0.0 : h.weight_decay;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g.data[i];
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g.data[i] * g.data[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            const double next = p[i] - lr * m_hat / (std::sqrt(v_hat) + h.eps) - lr * wd * p[i];
            if (!std::isfinite(next)) {
                throw OptimError("non-finite update for '" + name + "'");
            }
            p[i] = next;
        }
    }
    ++state.step;
}

} // namespace dscls

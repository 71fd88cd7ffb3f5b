// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace tpunet {

double cosine_lr(int step, int total_steps, double lr0, double lr_min) {
    if (total_steps < 1 || step < 0 || step > total_steps) {
        throw DomainError("cosine_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) +
                          "]");
    }
    const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               double weight_decay, const AdamOptions& options) {
    if (grads.size() != params.size()) throw ShapeError("adam_step: gradient size does not match parameters");
    if (state.m.empty() && state.v.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state does not match parameters");
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.t));
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * g;
        state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
}

Adam::Adam(NamedTensors params, AdamOptions options)
    : params_(std::move(params)), states_(params_.size()), options_(options) {}

void Adam::step(double lr, double weight_decay) {
    std::vector<double> zeros;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& t = params_[k].second;
        std::span<const double> grads;
        if (t.has_grad()) {
            grads = t.grad();
        } else {
            zeros.assign(t.numel(), 0.0);
            grads = zeros;
        }
        adam_step(t.mutable_data(), grads, states_[k], lr, weight_decay, options_);
    }
}

void Adam::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

}  // namespace tpunet

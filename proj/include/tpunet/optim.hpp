// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "tpunet/tensor.hpp"

namespace tpunet {

/// lr_min + (lr0 - lr_min) (1 + cos(pi step / total)) / 2 for 0 <= step <= total.
double cosine_lr(int step, int total_steps, double lr0, double lr_min);

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long t = 0;
};

/// One Adam update with bias correction. Decoupled weight decay
/// p <- p - lr * wd * p is applied before the moment step.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               double weight_decay, const AdamOptions& options = {});

/// Adam over a fixed parameter list.
class Adam {
public:
    explicit Adam(NamedTensors params, AdamOptions options = {});

    /// Tensors without a gradient are treated as having a zero gradient.
    void step(double lr, double weight_decay);
    void zero_grad();

private:
    NamedTensors params_;
    std::vector<AdamState> states_;
    AdamOptions options_;
};

}  // namespace tpunet

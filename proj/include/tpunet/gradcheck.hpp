// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tpunet/tensor.hpp"

namespace tpunet {

struct ParamCheck {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // coordinates whose perturbation crossed a kink
    bool passed = true;
};

struct GradCheckReport {
    std::vector<ParamCheck> params;
    double max_rel_error = 0.0;
    bool passed = true;
};

/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of the scalar `loss` with central finite
/// differences for every coordinate of every parameter. `loss` must rebuild
/// its graph from the current parameter values on each call. Coordinates
/// whose +/- eps evaluations change a relu, maxpool or clamp decision are
/// skipped. Failures are reported, never thrown.
GradCheckReport grad_check(const std::function<Tensor()>& loss, const NamedTensors& params, double eps = 1e-3,
                           double tol = 1e-4);

}  // namespace tpunet

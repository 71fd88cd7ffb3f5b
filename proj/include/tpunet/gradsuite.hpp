// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "tpunet/gradcheck.hpp"

namespace tpunet {

struct SuiteCase {
    std::string module;
    std::string name;
    double tol = 1e-4;
    GradCheckReport report;
};

/// Module names accepted by run_grad_suite, in run order.
const std::vector<std::string>& grad_suite_modules();

/// Finite-difference checks of every differentiable op and module, plus the
/// end-to-end loss on a 1-sample 8x8 batch. `module` empty runs everything.
std::vector<SuiteCase> run_grad_suite(const std::string& module = "");

}  // namespace tpunet

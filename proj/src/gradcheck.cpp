// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tpunet {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

struct Probed {
    double value;
    std::uint64_t kinks;
};

Probed evaluate(const std::function<Tensor()>& loss) {
    NoGradGuard no_grad;
    KinkProbe probe;
    const double value = loss().item();
    return {value, probe.hash()};
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& loss, const NamedTensors& params, double eps,
                           double tol) {
    std::vector<Tensor> handles;
    for (const auto& [name, tensor] : params) {
        Tensor t = tensor;
        t.set_requires_grad(true);
        t.zero_grad();
        handles.push_back(t);
    }

    std::uint64_t base_kinks = 0;
    {
        KinkProbe probe;
        Tensor value = loss();
        base_kinks = probe.hash();
        value.backward();
    }

    GradCheckReport report;
    for (std::size_t p = 0; p < handles.size(); ++p) {
        Tensor& t = handles[p];
        ParamCheck check;
        check.name = params[p].first;
        std::vector<double> analytic(t.numel(), 0.0);
        if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
        auto values = t.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const Probed plus = evaluate(loss);
            values[i] = saved - eps;
            const Probed minus = evaluate(loss);
            values[i] = saved;
            if (plus.kinks != base_kinks || minus.kinks != base_kinks) {
                ++check.skipped;
                continue;
            }
            const double numeric = (plus.value - minus.value) / (2.0 * eps);
            check.max_rel_error = std::max(check.max_rel_error, relative_error(analytic[i], numeric));
            ++check.checked;
        }
        check.passed = check.max_rel_error <= tol;
        report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
        report.passed = report.passed && check.passed;
        report.params.push_back(std::move(check));
    }
    for (Tensor& t : handles) t.zero_grad();
    return report;
}

}  // namespace tpunet

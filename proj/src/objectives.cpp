// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/objectives.hpp"

#include <string>

namespace tpunet {

namespace {

void check_pair(const Tensor& pred, const Tensor& target, const char* op) {
    if (!pred.defined() || !target.defined() || pred.shape() != target.shape()) {
        throw ShapeError(std::string(op) + ": prediction and target shapes differ");
    }
}

// [B, K, ...] -> [B * K, rest] so per-(sample, class) sums reduce axis 1.
Tensor per_channel(const Tensor& x) {
    if (x.rank() < 2) return reshape(x, {1, x.numel()});
    const std::size_t rows = x.dim(0) * x.dim(1);
    return reshape(x, {rows, x.numel() / rows});
}

}  // namespace

Tensor bce(const Tensor& pred, const Tensor& target) {
    check_pair(pred, target, "bce");
    const Tensor p = clamp(pred, kBceEpsilon, 1.0 - kBceEpsilon);
    const Tensor one = Tensor::scalar(1.0);
    const Tensor positive = mul(target, log(p));
    const Tensor negative = mul(sub(one, target), log(sub(one, p)));
    return neg(reduce_mean(add(positive, negative)));
}

Tensor tversky(const Tensor& pred, const Tensor& target, const TverskyOptions& options) {
    check_pair(pred, target, "tversky");
    if (options.alpha < 0.0 || options.beta < 0.0) throw DomainError("tversky: alpha and beta must be non-negative");
    const Tensor p = per_channel(pred);
    const Tensor y = per_channel(target);
    const Tensor one = Tensor::scalar(1.0);
    const Tensor tp = reduce_sum(mul(p, y), 1);
    const Tensor fp = reduce_sum(mul(p, sub(one, y)), 1);
    const Tensor fn = reduce_sum(mul(sub(one, p), y), 1);
    const Tensor numerator = add_scalar(tp, options.smooth);
    const Tensor denominator =
        add_scalar(add(add(tp, scale(fp, options.alpha)), scale(fn, options.beta)), options.smooth);
    return sub(one, reduce_mean(div(numerator, denominator)));
}

Tensor soft_dice_loss(const Tensor& pred, const Tensor& target, double smooth) {
    check_pair(pred, target, "soft_dice_loss");
    const Tensor p = per_channel(pred);
    const Tensor y = per_channel(target);
    // smoothing enters as 2s so that alpha = beta = 0.5 Tversky is the same loss
    const Tensor numerator = add_scalar(scale(reduce_sum(mul(p, y), 1), 2.0), 2.0 * smooth);
    const Tensor denominator = add_scalar(add(reduce_sum(p, 1), reduce_sum(y, 1)), 2.0 * smooth);
    return sub(Tensor::scalar(1.0), reduce_mean(div(numerator, denominator)));
}

Tensor seg_loss(const Tensor& pred, const Tensor& target, const TverskyOptions& options) {
    return scale(add(bce(pred, target), tversky(pred, target, options)), 0.5);
}

std::vector<std::uint8_t> binarize(std::span<const double> probabilities, double threshold) {
    std::vector<std::uint8_t> out(probabilities.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = probabilities[i] >= threshold ? 1 : 0;
    return out;
}

Overlap overlap(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target) {
    if (pred.size() != target.size()) throw ShapeError("overlap: mask sizes differ");
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t both = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0;
        const bool t = target[i] != 0;
        a += p;
        b += t;
        both += p && t;
    }
    if (a == 0 && b == 0) return {1.0, 1.0};
    const double inter = static_cast<double>(both);
    return {2.0 * inter / static_cast<double>(a + b), inter / static_cast<double>(a + b - both)};
}

double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target) {
    return overlap(pred, target).dice;
}

double jaccard(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target) {
    return overlap(pred, target).jaccard;
}

}  // namespace tpunet

// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tpunet/tensor.hpp"

namespace tpunet {

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy of probabilities against 0/1 targets;
/// predictions are clamped to [eps, 1 - eps].
Tensor bce(const Tensor& pred, const Tensor& target);

struct TverskyOptions {
    double alpha = 0.5;   // false-positive weight
    double beta = 0.5;    // false-negative weight
    double smooth = 1.0;
};

/// 1 - (TP + s) / (TP + alpha FP + beta FN + s) with soft counts, per
/// (sample, class) over [B, K, H, W], averaged.
Tensor tversky(const Tensor& pred, const Tensor& target, const TverskyOptions& options = {});

/// 1 - (2 TP + 2s) / (sum p + sum y + 2s), averaged like tversky.
Tensor soft_dice_loss(const Tensor& pred, const Tensor& target, double smooth = 1.0);

/// (bce + tversky) / 2.
Tensor seg_loss(const Tensor& pred, const Tensor& target, const TverskyOptions& options = {});

std::vector<std::uint8_t> binarize(std::span<const double> probabilities, double threshold = 0.5);

struct Overlap {
    double dice = 1.0;
    double jaccard = 1.0;
};

/// Dice 2|A&B|/(|A|+|B|) and Jaccard |A&B|/|A|B| of binary masks. Both empty
/// scores 1; exactly one empty scores 0.
Overlap overlap(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target);
double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target);
double jaccard(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target);

}  // namespace tpunet

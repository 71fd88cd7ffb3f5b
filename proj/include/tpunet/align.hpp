// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "tpunet/tensor.hpp"

namespace tpunet {

inline constexpr double kCosineEpsilon = 1e-8;

/// Matched image/text vectors: row i of each side describes the same pair.
struct AlignmentBatch {
    Tensor image_vecs;  // [Nb, D]
    Tensor text_vecs;   // [Nb, D]
    double tau = 0.1;
    double lambda = 0.5;
};

/// Spatial mean per channel: [B, C, H, W] -> [B, C].
Tensor pool_image(const Tensor& feature_map);

/// u.v / (|u| |v|), with each norm floored at kCosineEpsilon.
Tensor cosine_sim(const Tensor& u, const Tensor& v);

/// S[i, k] = cosine_sim(a_i, b_k) for a [N, D], b [M, D].
Tensor cosine_matrix(const Tensor& a, const Tensor& b);

/// Image-to-text InfoNCE averaged over pairs.
Tensor loss_i2t(const AlignmentBatch& batch);
/// Text-to-image InfoNCE averaged over pairs; the numerator is the matched pair.
Tensor loss_t2i(const AlignmentBatch& batch);
/// lambda * loss_i2t + (1 - lambda) * loss_t2i.
Tensor contrastive_loss(const AlignmentBatch& batch);

/// Linear map of pooled image features into the text embedding space, so the
/// two sides of the cosine have equal width.
struct AlignParams {
    Tensor image_proj;  // [C, D]
    NamedTensors parameters() const { return {{"align.image_proj", image_proj}}; }
};

AlignParams init_align(std::size_t image_channels, std::size_t text_dim, std::uint64_t seed);

}  // namespace tpunet

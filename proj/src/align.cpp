// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "tpunet/layers.hpp"

namespace tpunet {

namespace {

void validate(const AlignmentBatch& batch) {
    const Tensor& m = batch.image_vecs;
    const Tensor& t = batch.text_vecs;
    if (!m.defined() || !t.defined() || m.rank() != 2 || m.shape() != t.shape()) {
        throw ShapeError("alignment batch: image and text vectors must share a [Nb, D] shape");
    }
    if (!(batch.tau > 0.0)) throw DomainError("alignment batch: tau must be positive");
}

Tensor row_normalize(const Tensor& x) {
    const Tensor sq = reduce_sum(square(x), 1, true);
    const Tensor norm = sqrt(clamp(sq, kCosineEpsilon * kCosineEpsilon, std::numeric_limits<double>::max()));
    return div(x, norm);
}

// mean_i [ logsumexp_k(logits[i, k]) - logits[i, i] ]
Tensor info_nce(const Tensor& logits) {
    const std::size_t n = logits.dim(0);
    const auto values = logits.data();
    std::vector<double> row_max(n);
    for (std::size_t i = 0; i < n; ++i) {
        row_max[i] = *std::max_element(values.begin() + static_cast<std::ptrdiff_t>(i * n),
                                       values.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    }
    const Tensor shift = Tensor::from_data({n, 1}, row_max);
    const Tensor lse = add(log(reduce_sum(exp(sub(logits, shift)), 1, true)), shift);
    std::vector<double> eye(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
    const Tensor diagonal = reduce_sum(mul(logits, Tensor::from_data({n, n}, std::move(eye))), 1, true);
    return reduce_mean(sub(lse, diagonal));
}

}  // namespace

Tensor pool_image(const Tensor& feature_map) {
    if (feature_map.rank() != 4) {
        throw ShapeError("pool_image: expected [B, C, H, W], got " + shape_to_string(feature_map.shape()));
    }
    const Shape& s = feature_map.shape();
    return reduce_mean(reshape(feature_map, {s[0], s[1], s[2] * s[3]}), 2);
}

Tensor cosine_sim(const Tensor& u, const Tensor& v) {
    if (u.rank() != 1 || u.shape() != v.shape()) {
        throw ShapeError("cosine_sim: vectors " + shape_to_string(u.shape()) + " and " + shape_to_string(v.shape()) +
                         " differ");
    }
    const std::size_t d = u.dim(0);
    return reshape(cosine_matrix(reshape(u, {1, d}), reshape(v, {1, d})), {});
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
        throw ShapeError("cosine_matrix: " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()) +
                         " differ in width");
    }
    return matmul(row_normalize(a), transpose(row_normalize(b), 0, 1));
}

Tensor loss_i2t(const AlignmentBatch& batch) {
    validate(batch);
    return info_nce(scale(cosine_matrix(batch.image_vecs, batch.text_vecs), 1.0 / batch.tau));
}

Tensor loss_t2i(const AlignmentBatch& batch) {
    validate(batch);
    return info_nce(scale(cosine_matrix(batch.text_vecs, batch.image_vecs), 1.0 / batch.tau));
}

Tensor contrastive_loss(const AlignmentBatch& batch) {
    if (!(batch.lambda >= 0.0 && batch.lambda <= 1.0)) throw DomainError("contrastive_loss: lambda outside [0, 1]");
    return add(scale(loss_i2t(batch), batch.lambda), scale(loss_t2i(batch), 1.0 - batch.lambda));
}

AlignParams init_align(std::size_t image_channels, std::size_t text_dim, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, "align.image_proj"));
    return {normal_param({image_channels, text_dim}, 1.0 / std::sqrt(static_cast<double>(image_channels)), rng)};
}

}  // namespace tpunet

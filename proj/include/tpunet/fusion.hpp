// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "tpunet/layers.hpp"
#include "tpunet/tensor.hpp"

namespace tpunet {

/// Projections and attention weights for image/text fusion at bottleneck
/// resolution. Text-side tensors are undefined when built without text.
struct FusionParams {
    std::size_t dim = 0;  // shared projection width d (= d_k)
    ConvLayer image_proj;  // 1x1, C -> d
    Tensor text_proj_w;    // [D, d]
    Tensor text_proj_b;    // [d]
    Tensor w_q, w_k, w_v;  // [d, d]
    ConvLayer concat_mix;  // 1x1, 2d -> d; only for concatenation fusion
    ConvLayer out_proj;    // 1x1, d -> C; added to F_m before decoding
    ConvLayer lift;        // 1x1, d -> c1; full-resolution copy for the head

    NamedTensors parameters() const;
};

struct FusionShape {
    std::size_t image_channels = 64;  // C of F_m
    std::size_t text_dim = 16;        // D of F_t
    std::size_t dim = 32;             // d
    std::size_t head_channels = 16;   // c1
    bool with_text = true;
    bool concat_mode = false;
};

FusionParams init_fusion(const FusionShape& shape, std::uint64_t seed);

/// [B, C, H, W] -> [B, H*W, C], tokens in row-major (h, w) order.
Tensor flatten_spatial(const Tensor& x);
/// Inverse of flatten_spatial.
Tensor unflatten_spatial(const Tensor& tokens, std::size_t height, std::size_t width);

struct ProjectedFeatures {
    Tensor image_tokens;  // F_m', [B, H'W', d]
    Tensor text_tokens;   // F_t', [B, L, d]; undefined without text
};

ProjectedFeatures project(const Tensor& image_features, const Tensor& text_features, const FusionParams& params);

struct AttentionOutput {
    Tensor output;   // F, [B, S, d]
    Tensor weights;  // [B, S, S]
};

/// softmax(S Wq (S Wk)^T / sqrt(d)) S Wv over the joint sequence
/// S = [F_m'; F_t']. With an undefined `text_tokens` S is the image tokens
/// alone (plain self-attention).
AttentionOutput cross_attention(const Tensor& image_tokens, const Tensor& text_tokens, const FusionParams& params);

/// First H'*W' tokens of F reshaped to [B, d, H', W']; text positions are dropped.
Tensor to_spatial(const Tensor& attended, std::size_t height, std::size_t width);

/// Replaces attention with channel concatenation: the mean projected text
/// vector is broadcast over pixels, stacked with the projected image map and
/// mixed by a 1x1 conv. Returns [B, d, H', W'].
Tensor concat_fusion(const Tensor& image_tokens, const Tensor& text_tokens, const std::vector<std::uint8_t>& keep,
                     std::size_t height, std::size_t width, const FusionParams& params);

/// F_m + out_proj(F): the bottleneck map handed to the decoder.
Tensor fuse_into_bottleneck(const Tensor& image_features, const Tensor& spatial, const FusionParams& params);

/// 1x1 conv to c1 channels, then nearest x4 upsampling to input resolution.
Tensor lift_attention_map(const Tensor& spatial, const FusionParams& params);

}  // namespace tpunet

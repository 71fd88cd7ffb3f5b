// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tpunet/prompt.hpp"
#include "tpunet/tensor.hpp"

namespace tpunet {

/// Small trainable stand-in for a pretrained text encoder: token and position
/// embeddings followed by one masked self-attention block and a two-layer
/// feed-forward, both residual.
struct TextEncoderParams {
    std::size_t vocab_size = 0;
    std::size_t seq_len = 0;
    std::size_t dim = 0;
    Tensor embedding;  // [V, D]
    Tensor position;   // [L, D]
    Tensor w_q, w_k, w_v, w_o;  // [D, D]
    Tensor ff_w1;  // [D, 2D]
    Tensor ff_b1;  // [2D]
    Tensor ff_w2;  // [2D, D]
    Tensor ff_b2;  // [D]

    NamedTensors parameters() const;
};

TextEncoderParams init_text_encoder(std::size_t vocab_size, std::size_t seq_len, std::size_t dim, std::uint64_t seed);

struct TemporalFeatures {
    Tensor features;                 // F_t, [B, L, D]
    Tensor attention;                // [B, L, L], rows over keys
    std::vector<std::uint8_t> keep;  // [B * L], 1 for non-PAD positions
    std::size_t batch = 0;
    std::size_t seq_len = 0;
};

TemporalFeatures encode_text(const std::vector<TokenSequence>& tokens, const TextEncoderParams& params);

/// Mean of F_t over non-PAD positions -> [B, D]. Throws DomainError for a
/// sample without any non-PAD position.
Tensor pool_text(const Tensor& features, const std::vector<std::uint8_t>& keep);

}  // namespace tpunet

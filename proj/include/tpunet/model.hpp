// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "tpunet/align.hpp"
#include "tpunet/config.hpp"
#include "tpunet/fusion.hpp"
#include "tpunet/prompt.hpp"
#include "tpunet/text_encoder.hpp"
#include "tpunet/unet.hpp"

namespace tpunet {

/// UNet with prompt-conditioned bottleneck fusion, wired per ablation variant.
class TpuNet {
public:
    TpuNet(const RunConfig& config, std::size_t vocab_size);

    struct Output {
        Tensor logits;      // [B, K, H, W]
        Tensor image_vecs;  // [B, D]; undefined unless the variant aligns
        Tensor text_vecs;   // [B, D]; undefined unless the variant aligns
    };

    /// `tokens` must have one entry per image, or be empty for the text-free variant.
    Output forward(const Tensor& images, const std::vector<TokenSequence>& tokens) const;

    NamedTensors parameters() const;
    /// Copies values from a checkpoint; names and shapes must match exactly.
    void load(const NamedTensors& tensors);

    Variant variant() const { return variant_; }

private:
    Variant variant_;
    UNetParams unet_;
    std::optional<TextEncoderParams> text_;
    FusionParams fusion_;
    std::optional<AlignParams> align_;
};

}  // namespace tpunet

// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tpunet/layers.hpp"
#include "tpunet/tensor.hpp"

namespace tpunet {

/// Two 3x3 conv + ReLU layers.
struct DoubleConv {
    ConvLayer first;
    ConvLayer second;
};

/// Two-level UNet. Channel widths are {level1, level2, bottleneck}; the
/// defaults are {16, 32, 64}.
struct UNetParams {
    std::array<std::size_t, 3> channels{16, 32, 64};
    std::size_t num_classes = 1;
    DoubleConv enc1;        // 1 -> c1, full resolution
    DoubleConv enc2;        // c1 -> c2, H/2
    DoubleConv bottleneck;  // c2 -> c3, H/4
    DoubleConv dec2;        // c3 + c2 -> c2, H/2
    DoubleConv dec1;        // c2 + c1 -> c1, H
    ConvLayer head_conv;    // 3 * c1 -> c1, 3x3
    ConvLayer head_out;     // c1 -> num_classes, 1x1

    NamedTensors parameters() const;
};

UNetParams init_unet(std::array<std::size_t, 3> channels, std::size_t num_classes, std::uint64_t seed);

struct FeatureBundle {
    Tensor bottleneck;          // F_m, [B, c3, H/4, W/4]
    std::vector<Tensor> skips;  // [B, c1, H, W], [B, c2, H/2, W/2]
};

Tensor double_conv(const DoubleConv& block, const Tensor& x);

FeatureBundle encode_image(const Tensor& images, const UNetParams& params);

/// Upsample, concatenate the matching skip, double conv; twice. Returns the
/// full-resolution decoder map [B, c1, H, W] (before the head).
Tensor decode(const Tensor& fused, const std::vector<Tensor>& skips, const UNetParams& params);

/// concat(decoder_out, attention_map, first_skip) -> 3x3 conv -> ReLU -> 1x1
/// conv. Returns logits; the sigmoid belongs to the loss.
Tensor segmentation_head(const Tensor& decoder_out, const Tensor& attention_map, const Tensor& first_skip,
                         const UNetParams& params);

/// Binary 8-bit PGM of plane [sample, channel] of a [B, K, H, W] map.
/// Values are clamped to [0, 1] and scaled to 0..255.
void write_pgm(const Tensor& maps, std::size_t sample, std::size_t channel, const std::filesystem::path& path);

}  // namespace tpunet

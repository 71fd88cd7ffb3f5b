// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/unet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace tpunet {

namespace {

DoubleConv make_block(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    DoubleConv block;
    block.first = make_conv(in, out, 3, rng);
    block.second = make_conv(out, out, 3, rng);
    return block;
}

void append_block(NamedTensors& out, const std::string& prefix, const DoubleConv& block) {
    append_params(out, prefix + ".conv1", block.first);
    append_params(out, prefix + ".conv2", block.second);
}

void expect_shape(const Tensor& t, const Shape& shape, const char* what) {
    if (t.shape() != shape) {
        throw ShapeError(std::string(what) + ": expected " + shape_to_string(shape) + ", got " +
                         shape_to_string(t.shape()));
    }
}

}  // namespace

NamedTensors UNetParams::parameters() const {
    NamedTensors out;
    append_block(out, "unet.enc1", enc1);
    append_block(out, "unet.enc2", enc2);
    append_block(out, "unet.bottleneck", bottleneck);
    append_block(out, "unet.dec2", dec2);
    append_block(out, "unet.dec1", dec1);
    append_params(out, "unet.head_conv", head_conv);
    append_params(out, "unet.head_out", head_out);
    return out;
}

UNetParams init_unet(std::array<std::size_t, 3> channels, std::size_t num_classes, std::uint64_t seed) {
    if (num_classes == 0 || channels[0] == 0 || channels[1] == 0 || channels[2] == 0) {
        throw std::invalid_argument("unet: channel counts and num_classes must be positive");
    }
    std::mt19937_64 rng(derive_seed(seed, "unet"));
    const auto [c1, c2, c3] = channels;
    UNetParams p;
    p.channels = channels;
    p.num_classes = num_classes;
    p.enc1 = make_block(1, c1, rng);
    p.enc2 = make_block(c1, c2, rng);
    p.bottleneck = make_block(c2, c3, rng);
    p.dec2 = make_block(c3 + c2, c2, rng);
    p.dec1 = make_block(c2 + c1, c1, rng);
    p.head_conv = make_conv(3 * c1, c1, 3, rng);
    p.head_out = make_conv(c1, num_classes, 1, rng);
    return p;
}

Tensor double_conv(const DoubleConv& block, const Tensor& x) {
    return relu(apply(block.second, relu(apply(block.first, x))));
}

FeatureBundle encode_image(const Tensor& images, const UNetParams& params) {
    if (images.rank() != 4 || images.dim(1) != 1) {
        throw ShapeError("encode_image: expected [B, 1, H, W], got " + shape_to_string(images.shape()));
    }
    if (images.dim(2) % 4 != 0 || images.dim(3) % 4 != 0) {
        throw ShapeError("encode_image: spatial dims of " + shape_to_string(images.shape()) +
                         " must be divisible by 4");
    }
    FeatureBundle out;
    const Tensor level1 = double_conv(params.enc1, images);
    const Tensor level2 = double_conv(params.enc2, maxpool2x2(level1));
    out.bottleneck = double_conv(params.bottleneck, maxpool2x2(level2));
    out.skips = {level1, level2};
    return out;
}

Tensor decode(const Tensor& fused, const std::vector<Tensor>& skips, const UNetParams& params) {
    const auto [c1, c2, c3] = params.channels;
    if (fused.rank() != 4 || fused.dim(1) != c3) {
        throw ShapeError("decode: fused features " + shape_to_string(fused.shape()) + " need " + std::to_string(c3) +
                         " channels");
    }
    if (skips.size() != 2) throw ShapeError("decode: expected two skip maps");
    const std::size_t b = fused.dim(0);
    const std::size_t h = fused.dim(2) * 4;
    const std::size_t w = fused.dim(3) * 4;
    expect_shape(skips[0], {b, c1, h, w}, "decode: first skip");
    expect_shape(skips[1], {b, c2, h / 2, w / 2}, "decode: second skip");
    const Tensor up2 = double_conv(params.dec2, concat({upsample_nearest2x(fused), skips[1]}, 1));
    return double_conv(params.dec1, concat({upsample_nearest2x(up2), skips[0]}, 1));
}

Tensor segmentation_head(const Tensor& decoder_out, const Tensor& attention_map, const Tensor& first_skip,
                         const UNetParams& params) {
    const std::size_t c1 = params.channels[0];
    if (decoder_out.rank() != 4) throw ShapeError("segmentation_head: decoder output must be 4-D");
    const Shape expected{decoder_out.dim(0), c1, decoder_out.dim(2), decoder_out.dim(3)};
    expect_shape(decoder_out, expected, "segmentation_head: decoder output");
    expect_shape(attention_map, expected, "segmentation_head: attention map");
    expect_shape(first_skip, expected, "segmentation_head: first skip");
    const Tensor merged = concat({decoder_out, attention_map, first_skip}, 1);
    return apply(params.head_out, relu(apply(params.head_conv, merged)));
}

void write_pgm(const Tensor& maps, std::size_t sample, std::size_t channel, const std::filesystem::path& path) {
    if (maps.rank() != 4) throw ShapeError("write_pgm: expected [B, K, H, W], got " + shape_to_string(maps.shape()));
    if (sample >= maps.dim(0) || channel >= maps.dim(1)) throw DomainError("write_pgm: plane index out of range");
    const std::size_t h = maps.dim(2);
    const std::size_t w = maps.dim(3);
    const auto plane = maps.data().subspan((sample * maps.dim(1) + channel) * h * w, h * w);
    std::string pixels(h * w, '\0');
    for (std::size_t i = 0; i < plane.size(); ++i) {
        pixels[i] = static_cast<char>(std::lround(std::clamp(plane[i], 0.0, 1.0) * 255.0));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
    out << "P5\n" << w << ' ' << h << "\n255\n" << pixels;
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path.string());
}

}  // namespace tpunet

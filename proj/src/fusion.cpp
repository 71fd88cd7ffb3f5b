// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/fusion.hpp"

#include <cmath>
#include <string>

#include "tpunet/text_encoder.hpp"

namespace tpunet {

namespace {

// Every tensor has its own stream so optional parts never shift the others.
std::mt19937_64 stream(std::uint64_t seed, const char* name) { return std::mt19937_64(derive_seed(seed, name)); }

}  // namespace

NamedTensors FusionParams::parameters() const {
    NamedTensors out;
    append_params(out, "fusion.image_proj", image_proj);
    if (text_proj_w.defined()) {
        out.emplace_back("fusion.text_proj.weight", text_proj_w);
        out.emplace_back("fusion.text_proj.bias", text_proj_b);
    }
    if (w_q.defined()) {
        out.emplace_back("fusion.w_q", w_q);
        out.emplace_back("fusion.w_k", w_k);
        out.emplace_back("fusion.w_v", w_v);
    }
    if (concat_mix.weight.defined()) append_params(out, "fusion.concat_mix", concat_mix);
    append_params(out, "fusion.out_proj", out_proj);
    append_params(out, "fusion.lift", lift);
    return out;
}

FusionParams init_fusion(const FusionShape& shape, std::uint64_t seed) {
    if (shape.dim == 0 || shape.image_channels == 0 || shape.head_channels == 0) {
        throw std::invalid_argument("fusion: dimensions must be positive");
    }
    if (shape.concat_mode && !shape.with_text) throw std::invalid_argument("fusion: concatenation needs text");
    const std::size_t d = shape.dim;
    const double scale_d = 1.0 / std::sqrt(static_cast<double>(d));
    FusionParams p;
    p.dim = d;
    {
        auto rng = stream(seed, "fusion.image_proj");
        p.image_proj = make_conv(shape.image_channels, d, 1, rng);
    }
    if (shape.with_text) {
        auto rng = stream(seed, "fusion.text_proj");
        // unit variance: at fan-in scale the slice-position tokens are ~1% of the
        // attended image features and training never picks them up
        p.text_proj_w = normal_param({shape.text_dim, d}, 1.0, rng);
        p.text_proj_b = zero_param({d});
    }
    if (shape.concat_mode) {
        auto rng = stream(seed, "fusion.concat_mix");
        p.concat_mix = make_conv(2 * d, d, 1, rng);
    } else {
        auto rq = stream(seed, "fusion.w_q");
        auto rk = stream(seed, "fusion.w_k");
        auto rv = stream(seed, "fusion.w_v");
        p.w_q = normal_param({d, d}, scale_d, rq);
        p.w_k = normal_param({d, d}, scale_d, rk);
        p.w_v = normal_param({d, d}, scale_d, rv);
    }
    {
        auto rng = stream(seed, "fusion.out_proj");
        p.out_proj = make_conv(d, shape.image_channels, 1, rng);
    }
    {
        auto rng = stream(seed, "fusion.lift");
        p.lift = make_conv(d, shape.head_channels, 1, rng);
    }
    return p;
}

Tensor flatten_spatial(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("flatten_spatial: expected [B, C, H, W], got " + shape_to_string(x.shape()));
    const Shape& s = x.shape();
    return permute(reshape(x, {s[0], s[1], s[2] * s[3]}), {0, 2, 1});
}

Tensor unflatten_spatial(const Tensor& tokens, std::size_t height, std::size_t width) {
    if (tokens.rank() != 3 || tokens.dim(1) != height * width) {
        throw ShapeError("unflatten_spatial: " + shape_to_string(tokens.shape()) + " does not hold " +
                         std::to_string(height) + "x" + std::to_string(width) + " tokens");
    }
    const Shape& s = tokens.shape();
    return reshape(permute(tokens, {0, 2, 1}), {s[0], s[2], height, width});
}

ProjectedFeatures project(const Tensor& image_features, const Tensor& text_features, const FusionParams& params) {
    if (image_features.rank() != 4 || image_features.dim(1) != params.image_proj.weight.dim(1)) {
        throw ShapeError("project: image features " + shape_to_string(image_features.shape()) +
                         " do not match projection " + shape_to_string(params.image_proj.weight.shape()));
    }
    ProjectedFeatures out;
    out.image_tokens = flatten_spatial(apply(params.image_proj, image_features));
    if (text_features.defined()) {
        if (!params.text_proj_w.defined()) throw ShapeError("project: fusion was built without a text projection");
        if (text_features.rank() != 3 || text_features.dim(2) != params.text_proj_w.dim(0) ||
            text_features.dim(0) != image_features.dim(0)) {
            throw ShapeError("project: text features " + shape_to_string(text_features.shape()) +
                             " incompatible with image features " + shape_to_string(image_features.shape()));
        }
        out.text_tokens = linear(text_features, params.text_proj_w, params.text_proj_b);
    }
    return out;
}

AttentionOutput cross_attention(const Tensor& image_tokens, const Tensor& text_tokens, const FusionParams& params) {
    if (!params.w_q.defined()) throw std::invalid_argument("cross_attention: fusion has no attention weights");
    const Tensor joint = text_tokens.defined() ? concat({image_tokens, text_tokens}, 1) : image_tokens;
    if (joint.rank() != 3 || joint.dim(2) != params.dim) {
        throw ShapeError("cross_attention: tokens " + shape_to_string(joint.shape()) + " do not have width " +
                         std::to_string(params.dim));
    }
    const Tensor q = linear(joint, params.w_q, {});
    const Tensor k = linear(joint, params.w_k, {});
    const Tensor v = linear(joint, params.w_v, {});
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params.dim));
    AttentionOutput out;
    out.weights = softmax(scale(matmul(q, transpose(k, 1, 2)), inv_sqrt_dk), -1);
    out.output = matmul(out.weights, v);
    return out;
}

Tensor to_spatial(const Tensor& attended, std::size_t height, std::size_t width) {
    if (attended.rank() != 3 || attended.dim(1) < height * width) {
        throw ShapeError("to_spatial: sequence " + shape_to_string(attended.shape()) + " shorter than " +
                         std::to_string(height * width) + " image positions");
    }
    return unflatten_spatial(narrow(attended, 1, 0, height * width), height, width);
}

Tensor concat_fusion(const Tensor& image_tokens, const Tensor& text_tokens, const std::vector<std::uint8_t>& keep,
                     std::size_t height, std::size_t width, const FusionParams& params) {
    if (!params.concat_mix.weight.defined()) throw std::invalid_argument("concat_fusion: fusion has no mixing layer");
    const Tensor image = unflatten_spatial(image_tokens, height, width);
    const std::size_t batch = image.dim(0);
    const Tensor text = reshape(pool_text(text_tokens, keep), {batch, params.dim, 1, 1});
    const Tensor broadcast = add(Tensor::zeros({batch, params.dim, height, width}), text);
    return apply(params.concat_mix, concat({image, broadcast}, 1));
}

Tensor fuse_into_bottleneck(const Tensor& image_features, const Tensor& spatial, const FusionParams& params) {
    return add(image_features, apply(params.out_proj, spatial));
}

Tensor lift_attention_map(const Tensor& spatial, const FusionParams& params) {
    return upsample_nearest2x(upsample_nearest2x(apply(params.lift, spatial)));
}

}  // namespace tpunet

// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/model.hpp"

#include <algorithm>

#include "tpunet/checkpoint.hpp"

namespace tpunet {

TpuNet::TpuNet(const RunConfig& config, std::size_t vocab_size) : variant_(config.variant) {
    config.validate();
    unet_ = init_unet(config.channels, config.num_classes, config.seed);
    if (uses_text(variant_)) text_ = init_text_encoder(vocab_size, config.seq_len, config.text_dim, config.seed);
    FusionShape shape;
    shape.image_channels = config.channels[2];
    shape.text_dim = config.text_dim;
    shape.dim = config.fusion_dim;
    shape.head_channels = config.channels[0];
    shape.with_text = uses_text(variant_);
    shape.concat_mode = !uses_attention_fusion(variant_);
    fusion_ = init_fusion(shape, config.seed);
    if (uses_contrastive(variant_)) align_ = init_align(config.channels[2], config.text_dim, config.seed);
}

TpuNet::Output TpuNet::forward(const Tensor& images, const std::vector<TokenSequence>& tokens) const {
    const FeatureBundle features = encode_image(images, unet_);
    const std::size_t h = features.bottleneck.dim(2);
    const std::size_t w = features.bottleneck.dim(3);

    Output out;
    TemporalFeatures text;
    if (text_) {
        if (tokens.size() != images.dim(0)) throw ShapeError("forward: need one token sequence per image");
        text = encode_text(tokens, *text_);
    }
    const ProjectedFeatures projected = project(features.bottleneck, text.features, fusion_);
    Tensor spatial;
    if (uses_attention_fusion(variant_)) {
        spatial = to_spatial(cross_attention(projected.image_tokens, projected.text_tokens, fusion_).output, h, w);
    } else {
        spatial = concat_fusion(projected.image_tokens, projected.text_tokens, text.keep, h, w, fusion_);
    }
    const Tensor fused = fuse_into_bottleneck(features.bottleneck, spatial, fusion_);
    const Tensor decoded = decode(fused, features.skips, unet_);
    out.logits = segmentation_head(decoded, lift_attention_map(spatial, fusion_), features.skips[0], unet_);
    if (align_) {
        out.image_vecs = linear(pool_image(features.bottleneck), align_->image_proj, {});
        out.text_vecs = pool_text(text.features, text.keep);
    }
    return out;
}

NamedTensors TpuNet::parameters() const {
    NamedTensors out = unet_.parameters();
    if (text_) {
        auto p = text_->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    auto f = fusion_.parameters();
    out.insert(out.end(), f.begin(), f.end());
    if (align_) {
        auto a = align_->parameters();
        out.insert(out.end(), a.begin(), a.end());
    }
    return out;
}

void TpuNet::load(const NamedTensors& tensors) {
    NamedTensors params = parameters();
    if (params.size() != tensors.size()) throw FormatError("checkpoint does not match the model's parameter count");
    for (auto& [name, param] : params) {
        const Tensor& src = find_tensor(tensors, name);
        if (src.shape() != param.shape()) {
            throw FormatError("checkpoint tensor " + name + " has shape " + shape_to_string(src.shape()) +
                              ", model expects " + shape_to_string(param.shape()));
        }
        std::copy(src.data().begin(), src.data().end(), param.mutable_data().begin());
    }
}

}  // namespace tpunet

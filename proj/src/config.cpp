// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/config.hpp"

#include <set>
#include <stdexcept>

#include "tpunet/hash.hpp"

namespace tpunet {

std::string_view variant_name(Variant variant) {
    switch (variant) {
        case Variant::full: return "full";
        case Variant::no_temporal_info: return "no_temporal_info";
        case Variant::no_temporal_prompt: return "no_temporal_prompt";
        case Variant::no_semantic_align: return "no_semantic_align";
        case Variant::no_modality_fusion: return "no_modality_fusion";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    for (Variant v : kAllVariants) {
        if (variant_name(v) == name) return v;
    }
    throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

bool uses_text(Variant variant) { return variant != Variant::no_temporal_prompt; }
bool uses_timestamp(Variant variant) { return uses_text(variant) && variant != Variant::no_temporal_info; }
bool uses_attention_fusion(Variant variant) { return variant != Variant::no_modality_fusion; }
bool uses_contrastive(Variant variant) { return variant == Variant::full || variant == Variant::no_temporal_info; }

void RunConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
    if (!(lr0 > 0.0)) fail("lr0 must be positive");
    if (!(lr_min_ratio >= 0.0 && lr_min_ratio <= 1.0)) fail("lr_min_ratio must lie in [0, 1]");
    if (weight_decay < 0.0) fail("weight_decay must be non-negative");
    if (steps < 1) fail("steps must be positive");
    if (batch_size < 1) fail("batch_size must be positive");
    if (eval_every < 1) fail("eval_every must be positive");
    if (align_warmup_steps < 0 || align_warmup_steps > steps) fail("align_warmup_steps must lie in [0, steps]");
    if (!(tau > 0.0)) fail("tau must be positive");
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
    if (beta < 0.0) fail("beta must be non-negative");
    if (tversky_alpha < 0.0 || tversky_beta < 0.0) fail("tversky weights must be non-negative");
    if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0, 1)");
    if (text_dim == 0 || fusion_dim == 0 || seq_len == 0 || num_classes == 0) fail("model dims must be positive");
    for (std::size_t c : channels) {
        if (c == 0) fail("channels must be positive");
    }
}

nlohmann::json RunConfig::to_json() const {
    return {{"dataset", dataset},
            {"run_id", run_id},
            {"variant", std::string(variant_name(variant))},
            {"lr0", lr0},
            {"lr_min_ratio", lr_min_ratio},
            {"weight_decay", weight_decay},
            {"steps", steps},
            {"batch_size", batch_size},
            {"eval_every", eval_every},
            {"align_warmup_steps", align_warmup_steps},
            {"seed", seed},
            {"tau", tau},
            {"lambda", lambda},
            {"beta", beta},
            {"tversky_alpha", tversky_alpha},
            {"tversky_beta", tversky_beta},
            {"threshold", threshold},
            {"hflip", hflip},
            {"text_dim", text_dim},
            {"fusion_dim", fusion_dim},
            {"seq_len", seq_len},
            {"channels", channels},
            {"num_classes", num_classes}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    RunConfig c;
    const nlohmann::json defaults = c.to_json();
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    c.dataset = j.value("dataset", c.dataset);
    c.run_id = j.value("run_id", c.run_id);
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    c.lr0 = j.value("lr0", c.lr0);
    c.lr_min_ratio = j.value("lr_min_ratio", c.lr_min_ratio);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.align_warmup_steps = j.value("align_warmup_steps", c.align_warmup_steps);
    c.seed = j.value("seed", c.seed);
    c.tau = j.value("tau", c.tau);
    c.lambda = j.value("lambda", c.lambda);
    c.beta = j.value("beta", c.beta);
    c.tversky_alpha = j.value("tversky_alpha", c.tversky_alpha);
    c.tversky_beta = j.value("tversky_beta", c.tversky_beta);
    c.threshold = j.value("threshold", c.threshold);
    c.hflip = j.value("hflip", c.hflip);
    c.text_dim = j.value("text_dim", c.text_dim);
    c.fusion_dim = j.value("fusion_dim", c.fusion_dim);
    c.seq_len = j.value("seq_len", c.seq_len);
    if (j.contains("channels")) c.channels = j.at("channels").get<std::array<std::size_t, 3>>();
    c.num_classes = j.value("num_classes", c.num_classes);
    c.validate();
    return c;
}

std::string RunConfig::hash() const {
    nlohmann::json j = to_json();
    j.erase("dataset");
    j.erase("run_id");
    return to_hex(fnv1a64(j.dump()));
}

}  // namespace tpunet

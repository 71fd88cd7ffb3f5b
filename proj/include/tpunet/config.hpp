// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tpunet {

/// Model wirings compared in the ablation study.
enum class Variant {
    full,                // timestamped prompts, alignment, attention fusion
    no_temporal_info,    // prompts without the slice position
    no_temporal_prompt,  // no text at all; fusion is self-attention over image tokens
    no_semantic_align,   // contrastive weight forced to zero
    no_modality_fusion,  // pooled text broadcast and concatenated instead of attention
};

inline constexpr std::array<Variant, 5> kAllVariants{Variant::full, Variant::no_temporal_info,
                                                     Variant::no_temporal_prompt, Variant::no_semantic_align,
                                                     Variant::no_modality_fusion};

std::string_view variant_name(Variant variant);
Variant parse_variant(std::string_view name);

bool uses_text(Variant variant);
bool uses_timestamp(Variant variant);
bool uses_attention_fusion(Variant variant);
bool uses_contrastive(Variant variant);

struct RunConfig {
    std::string dataset;
    std::string run_id = "run";
    Variant variant = Variant::full;

    double lr0 = 3e-4;  // 3e-5 barely moves a from-scratch net in 1000 steps
    double lr_min_ratio = 0.01;
    double weight_decay = 1e-6;
    int steps = 1000;
    int batch_size = 8;
    int eval_every = 100;
    int align_warmup_steps = 0;
    std::uint64_t seed = 1;

    double tau = 0.1;
    double lambda = 0.5;
    double beta = 0.1;
    double tversky_alpha = 0.5;
    double tversky_beta = 0.5;
    double threshold = 0.5;
    bool hflip = false;

    std::size_t text_dim = 16;    // D
    std::size_t fusion_dim = 32;  // d
    std::size_t seq_len = 16;     // L
    std::array<std::size_t, 3> channels{16, 32, 64};
    std::size_t num_classes = 3;

    void validate() const;
    nlohmann::json to_json() const;
    /// Flat JSON; unknown keys are rejected, missing keys keep defaults.
    static RunConfig from_json(const nlohmann::json& j);
    /// Hash of the canonical JSON, excluding the dataset path and run id.
    std::string hash() const;
};

}  // namespace tpunet

// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tpunet {

enum class Modality { mri, ct };

std::string_view modality_name(Modality modality);
Modality parse_modality(std::string_view name);

/// Describes one temporal prompt: the scan type, the organ phrase chosen by
/// the reader, and the slice position i of N.
struct PromptSpec {
    Modality modality = Modality::mri;
    std::string organ;
    int slice_index = 1;
    int slice_total = 1;
    bool include_time = true;
};

/// "This is an MRI of the stomach with a segmentation period of 3/144."
/// or, without time, "This is an MRI of the stomach."
std::string render_prompt(const PromptSpec& spec);

struct PromptBatch {
    std::vector<std::string> prompts;
    std::vector<double> seconds;  // wall-clock per prompt
};

/// Prompts for slices first..last of a series of `total` (defaults to the
/// whole series).
PromptBatch render_batch(Modality modality, const std::string& organ, int total, int first = 1, int last = 0,
                         bool include_time = true);

inline constexpr int kTimeBins = 17;

/// Quantised timestamp round(16 * i / N), in [0, 16].
int time_bin(int slice_index, int slice_total);
std::string time_token(int bin);

class Vocabulary {
public:
    static constexpr std::int64_t pad_id = 0;
    static constexpr std::int64_t unk_id = 1;
    static constexpr std::string_view pad_token = "<pad>";
    static constexpr std::string_view unk_token = "<unk>";

    Vocabulary();
    /// `tokens` excludes the reserved entries; they are inserted sorted.
    explicit Vocabulary(const std::vector<std::string>& tokens);

    std::int64_t id(std::string_view token) const;
    const std::string& token(std::int64_t id) const;
    bool contains(std::string_view token) const;
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, std::int64_t, std::less<>> ids_;
};

/// Every token of every corpus string plus all time-bin tokens.
Vocabulary build_vocabulary(const std::vector<std::string>& corpus);

/// Lower-cased word and punctuation tokens; "i/N" becomes t_q "/" t_q.
std::vector<std::string> split_tokens(std::string_view text);

struct TokenSequence {
    std::vector<std::int64_t> ids;

    std::size_t length() const { return ids.size(); }
    std::size_t content_length() const;
    bool operator==(const TokenSequence&) const = default;
};

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t length);

}  // namespace tpunet

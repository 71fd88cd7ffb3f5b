// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

#include "tpunet/tensor.hpp"

namespace tpunet {

std::string_view modality_name(Modality modality) { return modality == Modality::mri ? "MRI" : "CT"; }

Modality parse_modality(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "mri") return Modality::mri;
    if (lower == "ct") return Modality::ct;
    throw DomainError("unknown modality '" + std::string(name) + "'");
}

namespace {

void validate(const PromptSpec& spec) {
    if (spec.organ.empty()) throw DomainError("prompt: organ must be non-empty");
    for (unsigned char c : spec.organ) {
        if (std::isupper(c)) throw DomainError("prompt: organ must be lowercase, got '" + spec.organ + "'");
    }
    if (spec.slice_total < 1 || spec.slice_index < 1 || spec.slice_index > spec.slice_total) {
        throw DomainError("prompt: slice " + std::to_string(spec.slice_index) + "/" +
                          std::to_string(spec.slice_total) + " outside 1..N");
    }
}

}  // namespace

std::string render_prompt(const PromptSpec& spec) {
    validate(spec);
    std::string out = spec.modality == Modality::mri ? "This is an MRI of the " : "This is a CT of the ";
    out += spec.organ;
    if (spec.include_time) {
        out += " with a segmentation period of ";
        out += std::to_string(spec.slice_index);
        out += '/';
        out += std::to_string(spec.slice_total);
    }
    out += '.';
    return out;
}

PromptBatch render_batch(Modality modality, const std::string& organ, int total, int first, int last,
                         bool include_time) {
    if (total < 1) throw DomainError("render_batch: slice total must be at least 1");
    if (last == 0) last = total;
    if (first < 1 || last > total || first > last) {
        throw DomainError("render_batch: range " + std::to_string(first) + ".." + std::to_string(last) +
                          " outside 1.." + std::to_string(total));
    }
    using clock = std::chrono::steady_clock;
    PromptBatch batch;
    batch.prompts.reserve(static_cast<std::size_t>(last - first + 1));
    batch.seconds.reserve(batch.prompts.capacity());
    for (int i = first; i <= last; ++i) {
        const auto start = clock::now();
        batch.prompts.push_back(render_prompt({modality, organ, i, total, include_time}));
        batch.seconds.push_back(std::chrono::duration<double>(clock::now() - start).count());
    }
    return batch;
}

int time_bin(int slice_index, int slice_total) {
    if (slice_total < 1 || slice_index < 0 || slice_index > slice_total) {
        throw DomainError("time_bin: invalid fraction " + std::to_string(slice_index) + "/" +
                          std::to_string(slice_total));
    }
    return static_cast<int>(std::lround(16.0 * slice_index / slice_total));
}

std::string time_token(int bin) { return "t_" + std::to_string(bin); }

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
    std::set<std::string> sorted(tokens.begin(), tokens.end());
    sorted.erase(std::string(pad_token));
    sorted.erase(std::string(unk_token));
    tokens_.emplace_back(pad_token);
    tokens_.emplace_back(unk_token);
    tokens_.insert(tokens_.end(), sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<std::int64_t>(i));
}

std::int64_t Vocabulary::id(std::string_view token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? unk_id : it->second;
}

const std::string& Vocabulary::token(std::int64_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw DomainError("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const { return ids_.find(token) != ids_.end(); }

nlohmann::json Vocabulary::to_json() const {
    return {{"tokens", tokens_}, {"pad", pad_id}, {"unk", unk_id}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    const auto tokens = j.at("tokens").get<std::vector<std::string>>();
    if (tokens.size() < 2 || tokens[0] != pad_token || tokens[1] != unk_token || j.at("pad") != pad_id ||
        j.at("unk") != unk_id) {
        throw std::invalid_argument("vocabulary json: reserved entries missing");
    }
    Vocabulary vocab(tokens);
    if (vocab.tokens_ != tokens) throw std::invalid_argument("vocabulary json: tokens not in canonical order");
    return vocab;
}

std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> raw;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) raw.push_back(std::move(word));
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '_') {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
            if (!std::isspace(c)) raw.emplace_back(1, static_cast<char>(c));
        }
    }
    flush();

    auto is_number = [](const std::string& s) {
        return !s.empty() && s.size() <= 9 && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
    };
    std::vector<std::string> out;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        if (k + 2 < raw.size() && is_number(raw[k]) && raw[k + 1] == "/" && is_number(raw[k + 2])) {
            const int i = std::stoi(raw[k]);
            const int n = std::stoi(raw[k + 2]);
            if (n >= 1 && i <= n) {
                const std::string bin = time_token(time_bin(i, n));
                out.push_back(bin);
                out.emplace_back("/");
                out.push_back(bin);
                k += 2;
                continue;
            }
        }
        out.push_back(raw[k]);
    }
    return out;
}

std::size_t TokenSequence::content_length() const {
    return static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [](std::int64_t id) { return id != Vocabulary::pad_id; }));
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
    std::vector<std::string> tokens;
    for (const auto& text : corpus) {
        auto parts = split_tokens(text);
        tokens.insert(tokens.end(), parts.begin(), parts.end());
    }
    for (int q = 0; q < kTimeBins; ++q) tokens.push_back(time_token(q));
    return Vocabulary(tokens);
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t length) {
    if (length == 0) throw std::invalid_argument("tokenize: sequence length must be at least 1");
    TokenSequence seq;
    seq.ids.reserve(length);
    for (const auto& token : split_tokens(text)) {
        if (seq.ids.size() == length) break;
        seq.ids.push_back(vocab.id(token));
    }
    seq.ids.resize(length, Vocabulary::pad_id);
    return seq;
}

}  // namespace tpunet

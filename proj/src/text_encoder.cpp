// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/text_encoder.hpp"

#include <cmath>

#include "tpunet/layers.hpp"

namespace tpunet {

NamedTensors TextEncoderParams::parameters() const {
    return {{"text.embedding", embedding}, {"text.position", position}, {"text.w_q", w_q},
            {"text.w_k", w_k},             {"text.w_v", w_v},           {"text.w_o", w_o},
            {"text.ff_w1", ff_w1},         {"text.ff_b1", ff_b1},       {"text.ff_w2", ff_w2},
            {"text.ff_b2", ff_b2}};
}

TextEncoderParams init_text_encoder(std::size_t vocab_size, std::size_t seq_len, std::size_t dim, std::uint64_t seed) {
    if (vocab_size < 2 || seq_len == 0 || dim == 0) throw std::invalid_argument("text encoder: invalid dimensions");
    std::mt19937_64 rng(derive_seed(seed, "text_encoder"));
    const double d = static_cast<double>(dim);
    TextEncoderParams p;
    p.vocab_size = vocab_size;
    p.seq_len = seq_len;
    p.dim = dim;
    p.embedding = normal_param({vocab_size, dim}, 1.0 / std::sqrt(d), rng);
    p.position = normal_param({seq_len, dim}, 1.0 / std::sqrt(d), rng);
    p.w_q = normal_param({dim, dim}, 1.0 / std::sqrt(d), rng);
    p.w_k = normal_param({dim, dim}, 1.0 / std::sqrt(d), rng);
    p.w_v = normal_param({dim, dim}, 1.0 / std::sqrt(d), rng);
    p.w_o = normal_param({dim, dim}, 1.0 / std::sqrt(d), rng);
    p.ff_w1 = normal_param({dim, 2 * dim}, std::sqrt(2.0 / d), rng);
    p.ff_b1 = zero_param({2 * dim});
    p.ff_w2 = normal_param({2 * dim, dim}, 1.0 / std::sqrt(2.0 * d), rng);
    p.ff_b2 = zero_param({dim});
    return p;
}

TemporalFeatures encode_text(const std::vector<TokenSequence>& tokens, const TextEncoderParams& params) {
    if (tokens.empty()) throw ShapeError("encode_text: empty batch");
    const std::size_t batch = tokens.size();
    const std::size_t len = params.seq_len;
    std::vector<std::int64_t> ids;
    ids.reserve(batch * len);
    for (const auto& seq : tokens) {
        if (seq.length() != len) {
            throw ShapeError("encode_text: sequence length " + std::to_string(seq.length()) + " != " +
                             std::to_string(len));
        }
        for (std::int64_t id : seq.ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= params.vocab_size) {
                throw DomainError("encode_text: token id " + std::to_string(id) + " outside vocabulary of " +
                                  std::to_string(params.vocab_size));
            }
            ids.push_back(id);
        }
    }

    TemporalFeatures out;
    out.batch = batch;
    out.seq_len = len;
    out.keep.resize(batch * len);
    for (std::size_t i = 0; i < ids.size(); ++i) out.keep[i] = ids[i] != Vocabulary::pad_id;

    // Scores [B, L(query), L(key)]; PAD keys are removed from every row.
    std::vector<std::uint8_t> key_keep(batch * len * len);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t q = 0; q < len; ++q) {
            for (std::size_t k = 0; k < len; ++k) key_keep[(b * len + q) * len + k] = out.keep[b * len + k];
        }
    }

    const Tensor x = add(embed_lookup(params.embedding, ids, {batch, len}), params.position);
    const Tensor q = linear(x, params.w_q, {});
    const Tensor k = linear(x, params.w_k, {});
    const Tensor v = linear(x, params.w_v, {});
    const Tensor scores = scale(matmul(q, transpose(k, 1, 2)), 1.0 / std::sqrt(static_cast<double>(params.dim)));
    out.attention = masked_softmax(scores, key_keep);
    const Tensor h = add(x, linear(matmul(out.attention, v), params.w_o, {}));
    const Tensor ff = linear(relu(linear(h, params.ff_w1, params.ff_b1)), params.ff_w2, params.ff_b2);
    out.features = add(h, ff);
    return out;
}

Tensor pool_text(const Tensor& features, const std::vector<std::uint8_t>& keep) {
    if (features.rank() != 3) throw ShapeError("pool_text: expected [B, L, D], got " + shape_to_string(features.shape()));
    const std::size_t batch = features.dim(0);
    const std::size_t len = features.dim(1);
    if (keep.size() != batch * len) throw ShapeError("pool_text: mask does not match " + shape_to_string(features.shape()));
    std::vector<double> weights(batch * len, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        std::size_t count = 0;
        for (std::size_t l = 0; l < len; ++l) count += keep[b * len + l] ? 1 : 0;
        if (count == 0) throw DomainError("pool_text: sample " + std::to_string(b) + " has only PAD tokens");
        for (std::size_t l = 0; l < len; ++l) {
            weights[b * len + l] = keep[b * len + l] ? 1.0 / static_cast<double>(count) : 0.0;
        }
    }
    const Tensor w = Tensor::from_data({batch, len, 1}, std::move(weights));
    return reduce_sum(mul(features, w), 1);
}

}  // namespace tpunet

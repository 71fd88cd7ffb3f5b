// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/gradsuite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "tpunet/align.hpp"
#include "tpunet/fusion.hpp"
#include "tpunet/layers.hpp"
#include "tpunet/model.hpp"
#include "tpunet/objectives.hpp"
#include "tpunet/text_encoder.hpp"
#include "tpunet/unet.hpp"

namespace tpunet {

namespace {

constexpr double kEps = 1e-3;

Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng, bool grad = true) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(data), grad);
}

// Contracts a tensor output against fixed random weights to get a scalar.
Tensor project_out(const Tensor& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return reduce_sum(mul(y, uniform(y.shape(), -1.0, 1.0, rng, false)));
}

struct Suite {
    std::string module;
    std::vector<SuiteCase>* out;

    void check(const std::string& name, const NamedTensors& params, const std::function<Tensor()>& loss,
               double tol = 1e-4) {
        SuiteCase c;
        c.module = module;
        c.name = name;
        c.tol = tol;
        c.report = grad_check(loss, params, kEps, tol);
        out->push_back(std::move(c));
    }

    // Shorthand for ops with a tensor result.
    void op(const std::string& name, const NamedTensors& params, const std::function<Tensor()>& f) {
        const std::uint64_t seed = derive_seed(11, name);
        check(name, params, [f, seed] { return project_out(f(), seed); });
    }
};

void tensor_core(Suite& s) {
    std::mt19937_64 rng(derive_seed(3, "tensor_core"));
    auto u = [&](Shape shape, double lo = -2.0, double hi = 2.0) { return uniform(std::move(shape), lo, hi, rng); };

    {
        Tensor a = u({2, 3, 4}), b = u({4, 5});
        s.op("matmul", {{"a", a}, {"b", b}}, [=] { return matmul(a, b); });
    }
    {
        Tensor x = u({2, 3, 5, 6}), k = u({4, 3, 3, 3}), bias = u({4});
        s.op("conv2d_same", {{"x", x}, {"kernel", k}, {"bias", bias}},
             [=] { return conv2d(x, k, bias, Padding::same); });
        Tensor k2 = u({2, 3, 2, 3});
        s.op("conv2d_valid", {{"x", x}, {"kernel", k2}}, [=] { return conv2d(x, k2, {}, Padding::valid); });
        Tensor k1 = u({4, 3, 1, 1});
        s.op("conv2d_pointwise", {{"x", x}, {"kernel", k1}, {"bias", bias}},
             [=] { return conv2d(x, k1, bias, Padding::same); });
    }
    {
        Tensor x = u({3, 4, 5});
        s.op("softmax_last", {{"x", x}}, [=] { return softmax(x, -1); });
        s.op("softmax_first", {{"x", x}}, [=] { return softmax(x, 0); });
        std::vector<std::uint8_t> keep(x.numel(), 1);
        for (std::size_t i = 0; i < keep.size(); i += 3) keep[i] = 0;
        s.op("masked_softmax", {{"x", x}}, [=] { return masked_softmax(x, keep); });
    }
    {
        Tensor x = u({3, 4});
        Tensor pos = u({3, 4}, 0.5, 2.0);
        Tensor row = u({4});
        s.op("relu", {{"x", x}}, [=] { return relu(x); });
        s.op("sigmoid", {{"x", x}}, [=] { return sigmoid(x); });
        s.op("exp", {{"x", x}}, [=] { return exp(x); });
        s.op("log", {{"x", pos}}, [=] { return log(pos); });
        s.op("neg", {{"x", x}}, [=] { return neg(x); });
        s.op("square", {{"x", x}}, [=] { return square(x); });
        s.op("sqrt", {{"x", pos}}, [=] { return sqrt(pos); });
        s.op("clamp", {{"x", x}}, [=] { return clamp(x, -1.0, 1.0); });
        s.op("scale", {{"x", x}}, [=] { return scale(x, -1.7); });
        s.op("add_scalar", {{"x", x}}, [=] { return add_scalar(x, 0.3); });
        s.op("add_broadcast", {{"a", x}, {"b", row}}, [=] { return add(x, row); });
        s.op("sub_broadcast", {{"a", x}, {"b", row}}, [=] { return sub(x, row); });
        s.op("mul_broadcast", {{"a", x}, {"b", row}}, [=] { return mul(x, row); });
        s.op("div", {{"a", x}, {"b", pos}}, [=] { return div(x, pos); });
    }
    {
        Tensor a = u({2, 3, 4}), b = u({2, 2, 4});
        s.op("concat", {{"a", a}, {"b", b}}, [=] { return concat({a, b}, 1); });
        s.op("narrow", {{"a", a}}, [=] { return narrow(a, 2, 1, 2); });
        s.op("permute", {{"a", a}}, [=] { return permute(a, {2, 0, 1}); });
        s.op("reshape", {{"a", a}}, [=] { return reshape(a, {6, 4}); });
        s.op("reduce_sum_axis", {{"a", a}}, [=] { return reduce_sum(a, 1, true); });
        s.op("reduce_mean", {{"a", a}}, [=] { return scale(reduce_mean(a), 3.0); });
        Tensor img = u({2, 2, 4, 6});
        s.op("upsample_nearest2x", {{"x", img}}, [=] { return upsample_nearest2x(img); });
        s.op("maxpool2x2", {{"x", img}}, [=] { return maxpool2x2(img); });
        Tensor table = u({5, 3});
        const std::vector<std::int64_t> ids{4, 0, 2, 2, 1, 4};
        s.op("embed_lookup", {{"table", table}}, [=] { return embed_lookup(table, ids, {2, 3}); });
    }
}

Vocabulary suite_vocab() { return build_vocabulary({"This is an MRI of the abdomen with a segmentation period of 3/16."}); }

std::vector<TokenSequence> suite_tokens(const Vocabulary& vocab, std::size_t length) {
    return {tokenize("This is an MRI of the abdomen with a segmentation period of 3/16.", vocab, length),
            tokenize("This is an MRI of the abdomen.", vocab, length)};
}

void text_encoder(Suite& s) {
    const Vocabulary vocab = suite_vocab();
    const TextEncoderParams p = init_text_encoder(vocab.size(), 18, 4, 5);
    const auto tokens = suite_tokens(vocab, 18);
    s.op("encode_text", p.parameters(), [=] { return encode_text(tokens, p).features; });
    s.op("pool_text", p.parameters(), [=] {
        const auto f = encode_text(tokens, p);
        return pool_text(f.features, f.keep);
    });
}

void unet(Suite& s) {
    std::mt19937_64 rng(derive_seed(3, "unet"));
    const UNetParams p = init_unet({2, 3, 4}, 2, 9);
    Tensor images = uniform({1, 1, 8, 8}, 0.0, 1.0, rng);
    NamedTensors block{{"images", images}};
    append_params(block, "enc1.first", p.enc1.first);
    append_params(block, "enc1.second", p.enc1.second);
    s.op("double_conv", block, [=] { return double_conv(p.enc1, images); });
    Tensor att = uniform({1, 2, 8, 8}, -1.0, 1.0, rng);
    NamedTensors params = p.parameters();
    params.emplace_back("attention_map", att);
    s.op("unet_forward", params, [=] {
        const FeatureBundle f = encode_image(images, p);
        return segmentation_head(decode(f.bottleneck, f.skips, p), att, f.skips[0], p);
    });
}

void fusion(Suite& s) {
    std::mt19937_64 rng(derive_seed(3, "fusion"));
    FusionShape shape;
    shape.image_channels = 3;
    shape.text_dim = 4;
    shape.dim = 5;
    shape.head_channels = 2;
    const FusionParams p = init_fusion(shape, 13);
    Tensor fm = uniform({2, 3, 2, 3}, -2.0, 2.0, rng);
    Tensor ft = uniform({2, 4, 4}, -2.0, 2.0, rng);
    NamedTensors params = p.parameters();
    params.emplace_back("image_features", fm);
    params.emplace_back("text_features", ft);
    s.op("cross_attention", params, [=] {
        const auto pr = project(fm, ft, p);
        const Tensor spatial = to_spatial(cross_attention(pr.image_tokens, pr.text_tokens, p).output, 2, 3);
        return concat({reshape(fuse_into_bottleneck(fm, spatial, p), {2, 18}),
                       reshape(lift_attention_map(spatial, p), {2, 192})},
                      1);
    });

    shape.with_text = false;
    const FusionParams q = init_fusion(shape, 13);
    NamedTensors qparams = q.parameters();
    qparams.emplace_back("image_features", fm);
    s.op("self_attention", qparams, [=] {
        const auto pr = project(fm, {}, q);
        return to_spatial(cross_attention(pr.image_tokens, {}, q).output, 2, 3);
    });

    shape.with_text = true;
    shape.concat_mode = true;
    const FusionParams c = init_fusion(shape, 13);
    NamedTensors cparams = c.parameters();
    cparams.emplace_back("image_features", fm);
    cparams.emplace_back("text_features", ft);
    const std::vector<std::uint8_t> keep{1, 1, 1, 0, 1, 1, 0, 0};
    s.op("concat_fusion", cparams, [=] {
        const auto pr = project(fm, ft, c);
        return concat_fusion(pr.image_tokens, pr.text_tokens, keep, 2, 3, c);
    });
}

void align(Suite& s) {
    std::mt19937_64 rng(derive_seed(3, "align"));
    Tensor img = uniform({4, 3}, -2.0, 2.0, rng), txt = uniform({4, 3}, -2.0, 2.0, rng);
    NamedTensors params{{"image_vecs", img}, {"text_vecs", txt}};
    s.op("cosine_matrix", params, [=] { return cosine_matrix(img, txt); });
    s.check("loss_i2t", params, [=] { return loss_i2t({img, txt, 0.5, 0.5}); });
    s.check("loss_t2i", params, [=] { return loss_t2i({img, txt, 0.5, 0.5}); });
    s.check("contrastive_loss", params, [=] { return contrastive_loss({img, txt, 0.1, 0.3}); });
    Tensor fm = uniform({2, 3, 2, 2}, -2.0, 2.0, rng);
    s.op("pool_image", {{"feature_map", fm}}, [=] { return pool_image(fm); });
}

void objectives(Suite& s) {
    std::mt19937_64 rng(derive_seed(3, "objectives"));
    Tensor pred = uniform({2, 2, 3, 3}, 0.05, 0.95, rng);
    std::vector<double> t(pred.numel());
    std::bernoulli_distribution coin(0.4);
    for (double& v : t) v = coin(rng) ? 1.0 : 0.0;
    const Tensor target = Tensor::from_data(pred.shape(), t);
    NamedTensors params{{"pred", pred}};
    s.check("bce", params, [=] { return bce(pred, target); });
    s.check("tversky", params, [=] { return tversky(pred, target, {0.3, 0.7, 1.0}); });
    s.check("soft_dice_loss", params, [=] { return soft_dice_loss(pred, target); });
    s.check("seg_loss", params, [=] { return seg_loss(pred, target); });
}

void model(Suite& s) {
    const Vocabulary vocab = suite_vocab();
    std::mt19937_64 rng(derive_seed(3, "model"));
    const Tensor images = uniform({1, 1, 8, 8}, 0.0, 1.0, rng, false);
    std::vector<double> m(3 * 64);
    std::bernoulli_distribution coin(0.3);
    for (double& v : m) v = coin(rng) ? 1.0 : 0.0;
    const Tensor masks = Tensor::from_data({1, 3, 8, 8}, m);
    for (Variant v : {Variant::full, Variant::no_temporal_prompt, Variant::no_modality_fusion}) {
        RunConfig cfg;
        cfg.variant = v;
        cfg.channels = {3, 4, 4};
        cfg.text_dim = 4;
        cfg.fusion_dim = 4;
        cfg.seq_len = 18;
        cfg.seed = 21;
        const auto model = std::make_shared<TpuNet>(cfg, vocab.size());
        std::vector<TokenSequence> tokens;
        if (uses_text(v)) tokens.push_back(suite_tokens(vocab, cfg.seq_len)[0]);
        const double beta = cfg.beta;
        s.check("end_to_end_" + std::string(variant_name(v)), model->parameters(), [=] {
            const auto out = model->forward(images, tokens);
            Tensor loss = seg_loss(sigmoid(out.logits), masks);
            if (out.image_vecs.defined()) loss = add(loss, scale(contrastive_loss({out.image_vecs, out.text_vecs}), beta));
            return loss;
        }, 1e-3);
    }
}

using Runner = void (*)(Suite&);
const std::vector<std::pair<std::string, Runner>>& runners() {
    static const std::vector<std::pair<std::string, Runner>> r{
        {"tensor_core", tensor_core}, {"text_encoder", text_encoder}, {"unet", unet}, {"fusion", fusion},
        {"align", align},             {"objectives", objectives},     {"model", model}};
    return r;
}

}  // namespace

const std::vector<std::string>& grad_suite_modules() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [name, fn] : runners()) n.push_back(name);
        return n;
    }();
    return names;
}

std::vector<SuiteCase> run_grad_suite(const std::string& module) {
    if (!module.empty() && std::find(grad_suite_modules().begin(), grad_suite_modules().end(), module) ==
                               grad_suite_modules().end()) {
        throw DomainError("unknown gradcheck module: " + module);
    }
    std::vector<SuiteCase> out;
    for (const auto& [name, fn] : runners()) {
        if (!module.empty() && name != module) continue;
        Suite s{name, &out};
        fn(s);
    }
    return out;
}

}  // namespace tpunet

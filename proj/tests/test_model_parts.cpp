#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "tpunet/align.hpp"
#include "tpunet/fusion.hpp"
#include "tpunet/gradcheck.hpp"
#include "tpunet/unet.hpp"

using namespace tpunet;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0, bool grad = false) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> d(shape_numel(s));
    for (double& v : d) v = u(rng);
    return Tensor::from_data(std::move(s), std::move(d), grad);
}

void zero_all(const NamedTensors& params) {
    for (const auto& [name, t] : params) {
        Tensor h = t;
        for (double& v : h.mutable_data()) v = 0.0;
    }
}

}  // namespace

TEST_CASE("encode_image shapes and divisibility") {
    const UNetParams p = init_unet({16, 32, 64}, 3, 1);
    const FeatureBundle f = encode_image(Tensor::zeros({1, 1, 64, 64}), p);
    CHECK(f.bottleneck.shape() == Shape{1, 64, 16, 16});
    CHECK(f.skips[0].shape() == Shape{1, 16, 64, 64});
    CHECK(f.skips[1].shape() == Shape{1, 32, 32, 32});
    CHECK(encode_image(Tensor::zeros({2, 1, 32, 32}), p).bottleneck.shape() == Shape{2, 64, 8, 8});
    CHECK_THROWS_AS(encode_image(Tensor::zeros({1, 1, 30, 30}), p), ShapeError);
}

TEST_CASE("decode and head shapes") {
    std::mt19937_64 rng(1);
    const UNetParams p = init_unet({16, 32, 64}, 3, 1);
    const Tensor img = random_tensor({1, 1, 64, 64}, rng, 0, 1);
    const FeatureBundle f = encode_image(img, p);
    const Tensor d = decode(f.bottleneck, f.skips, p);
    CHECK(d.shape() == Shape{1, 16, 64, 64});
    CHECK_THROWS_AS(decode(f.bottleneck, {f.skips[0], Tensor::zeros({1, 32, 16, 16})}, p), ShapeError);
    const Tensor logits = segmentation_head(d, d, f.skips[0], p);
    CHECK(logits.shape() == Shape{1, 3, 64, 64});
    for (double v : logits.data()) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(segmentation_head(d, Tensor::zeros({1, 16, 32, 32}), f.skips[0], p), ShapeError);
}

TEST_CASE("zero parameters give zero decoder output and logits") {
    const UNetParams p = init_unet({4, 6, 8}, 2, 1);
    zero_all(p.parameters());
    const FeatureBundle f = encode_image(Tensor::full({1, 1, 8, 8}, 0.5), p);
    const Tensor d = decode(Tensor::zeros({1, 8, 2, 2}), f.skips, p);
    for (double v : d.data()) CHECK(v == 0.0);
    const Tensor z = Tensor::zeros({1, 4, 8, 8});
    const Tensor logits = segmentation_head(z, z, z, p);
    for (double v : logits.data()) CHECK(v == 0.0);
}

TEST_CASE("forward on 16x16 from random init is finite") {
    std::mt19937_64 rng(2);
    const UNetParams p = init_unet({16, 32, 64}, 3, 7);
    const FeatureBundle f = encode_image(random_tensor({1, 1, 16, 16}, rng, 0, 1), p);
    const Tensor d = decode(f.bottleneck, f.skips, p);
    CHECK(d.shape() == Shape{1, 16, 16, 16});
    const Tensor logits = segmentation_head(d, d, f.skips[0], p);
    for (double v : logits.data()) CHECK(std::isfinite(v));
}

TEST_CASE("head gradient check") {
    std::mt19937_64 rng(3);
    const UNetParams p = init_unet({3, 4, 4}, 2, 5);
    const Tensor a = random_tensor({1, 3, 6, 6}, rng), b = random_tensor({1, 3, 6, 6}, rng),
                 c = random_tensor({1, 3, 6, 6}, rng);
    const Tensor w = random_tensor({1, 2, 6, 6}, rng);
    NamedTensors params{{"head_conv.weight", p.head_conv.weight}, {"head_conv.bias", p.head_conv.bias},
                        {"head_out.weight", p.head_out.weight}};
    const auto r = grad_check([&] { return reduce_sum(mul(segmentation_head(a, b, c, p), w)); }, params);
    CHECK(r.passed);
}

TEST_CASE("init is He-scaled and seeded") {
    const UNetParams p = init_unet({16, 32, 64}, 3, 11);
    const UNetParams q = init_unet({16, 32, 64}, 3, 11);
    const auto& w = p.bottleneck.second.weight;
    CHECK(std::equal(w.data().begin(), w.data().end(), q.bottleneck.second.weight.data().begin()));
    double ss = 0;
    for (double v : w.data()) ss += v * v;
    const double var = ss / static_cast<double>(w.numel());
    CHECK(var == doctest::Approx(2.0 / (64 * 9)).epsilon(0.1));
    for (double v : p.bottleneck.second.bias.data()) CHECK(v == 0.0);
}

// ---- fusion -----------------------------------------------------------------

TEST_CASE("project shapes, zero inputs and flatten round trip") {
    const FusionParams p = init_fusion({}, 1);
    std::mt19937_64 rng(4);
    const Tensor fm = random_tensor({1, 64, 8, 8}, rng);
    const Tensor ft = random_tensor({1, 12, 16}, rng);
    const ProjectedFeatures pr = project(fm, ft, p);
    CHECK(pr.image_tokens.shape() == Shape{1, 64, 32});
    CHECK(pr.text_tokens.shape() == Shape{1, 12, 32});
    const ProjectedFeatures z = project(Tensor::zeros({1, 64, 8, 8}), Tensor::zeros({1, 12, 16}), p);
    for (double v : z.image_tokens.data()) CHECK(v == 0.0);
    for (double v : z.text_tokens.data()) CHECK(v == 0.0);
    const Tensor back = unflatten_spatial(flatten_spatial(fm), 8, 8);
    CHECK(std::equal(back.data().begin(), back.data().end(), fm.data().begin()));
    CHECK_THROWS_AS(project(fm, random_tensor({1, 12, 15}, rng), p), ShapeError);
}

TEST_CASE("image tokens are row-major over (h, w)") {
    const Tensor x = Tensor::from_data({1, 2, 2, 3}, {0, 1, 2, 3, 4, 5, 10, 11, 12, 13, 14, 15});
    const Tensor tok = flatten_spatial(x);
    CHECK(tok.shape() == Shape{1, 6, 2});
    CHECK(tok.at({0, 4, 0}) == 4.0);
    CHECK(tok.at({0, 4, 1}) == 14.0);
}

TEST_CASE("attention rows sum to one and output shape") {
    const FusionParams p = init_fusion({}, 2);
    std::mt19937_64 rng(5);
    const ProjectedFeatures pr = project(random_tensor({2, 64, 8, 8}, rng), random_tensor({2, 12, 16}, rng), p);
    const AttentionOutput a = cross_attention(pr.image_tokens, pr.text_tokens, p);
    CHECK(a.output.shape() == Shape{2, 76, 32});
    CHECK(a.weights.shape() == Shape{2, 76, 76});
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t r = 0; r < 76; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 76; ++c) s += a.weights.at({b, r, c});
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
    }
    CHECK(to_spatial(a.output, 8, 8).shape() == Shape{2, 32, 8, 8});
    CHECK_THROWS_AS(to_spatial(Tensor::zeros({1, 60, 32}), 8, 8), ShapeError);
}

TEST_CASE("zero query and key weights give the uniform mean") {
    FusionParams p = init_fusion({}, 3);
    zero_all({{"q", p.w_q}, {"k", p.w_k}});
    std::mt19937_64 rng(6);
    const ProjectedFeatures pr = project(random_tensor({1, 64, 4, 4}, rng), random_tensor({1, 5, 16}, rng), p);
    const AttentionOutput a = cross_attention(pr.image_tokens, pr.text_tokens, p);
    const Tensor v = matmul(concat({pr.image_tokens, pr.text_tokens}, 1), p.w_v);
    const Tensor mean = reduce_mean(v, 1, true);
    for (std::size_t s = 0; s < 21; ++s) {
        for (std::size_t c = 0; c < 32; ++c) CHECK(std::abs(a.output.at({0, s, c}) - mean.at({0, 0, c})) <= 1e-9);
    }
}

TEST_CASE("text token order does not change image-position outputs") {
    const FusionParams p = init_fusion({}, 4);
    std::mt19937_64 rng(7);
    const Tensor fm = random_tensor({1, 64, 4, 4}, rng);
    const Tensor ft = random_tensor({1, 6, 16}, rng);
    const ProjectedFeatures pr = project(fm, ft, p);
    const Tensor permuted = concat({narrow(pr.text_tokens, 1, 3, 3), narrow(pr.text_tokens, 1, 0, 3)}, 1);
    const Tensor a = to_spatial(cross_attention(pr.image_tokens, pr.text_tokens, p).output, 4, 4);
    const Tensor b = to_spatial(cross_attention(pr.image_tokens, permuted, p).output, 4, 4);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
    // text genuinely participates
    const Tensor c = to_spatial(cross_attention(pr.image_tokens, scale(pr.text_tokens, 0.0), p).output, 4, 4);
    double diff = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) diff = std::max(diff, std::abs(a.data()[i] - c.data()[i]));
    CHECK(diff > 1e-6);
}

TEST_CASE("fusion through to_spatial gradient check") {
    FusionShape shape;
    shape.image_channels = 3;
    shape.text_dim = 4;
    shape.dim = 4;
    const FusionParams p = init_fusion(shape, 5);
    std::mt19937_64 rng(8);
    const Tensor fm = random_tensor({1, 3, 2, 2}, rng, -2, 2, true);
    const Tensor ft = random_tensor({1, 3, 4}, rng, -2, 2, true);
    const Tensor w = random_tensor({1, 4, 2, 2}, rng);
    NamedTensors params = p.parameters();
    params.emplace_back("fm", fm);
    params.emplace_back("ft", ft);
    params.erase(std::remove_if(params.begin(), params.end(),
                                [](const auto& kv) { return kv.first.find("out_proj") != std::string::npos ||
                                                            kv.first.find("lift") != std::string::npos; }),
                 params.end());
    const auto r = grad_check(
        [&] {
            const auto pr = project(fm, ft, p);
            return reduce_sum(mul(to_spatial(cross_attention(pr.image_tokens, pr.text_tokens, p).output, 2, 2), w));
        },
        params);
    CHECK(r.passed);
}

// ---- align ------------------------------------------------------------------

TEST_CASE("pool_image and cosine similarity oracles") {
    CHECK(pool_image(Tensor::full({1, 64, 8, 8}, 0.25)).shape() == Shape{1, 64});
    CHECK(pool_image(Tensor::full({1, 2, 3, 3}, 0.25)).at({0, 1}) == 0.25);
    std::vector<double> d(64, 0.0);
    d[17] = 64.0;
    CHECK(pool_image(Tensor::from_data({1, 1, 8, 8}, d)).item() == 1.0);

    const Tensor u = Tensor::from_data({3}, {1, 2, 3});
    CHECK(cosine_sim(u, u).item() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_sim(Tensor::from_data({2}, {1, 0}), Tensor::from_data({2}, {0, 1})).item() == 0.0);
    CHECK(cosine_sim(Tensor::from_data({2}, {1, 1}), Tensor::from_data({2}, {1, 0})).item() ==
          doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(cosine_sim(Tensor::zeros({2}), Tensor::from_data({2}, {1, 0})).item() == 0.0);
}

TEST_CASE("InfoNCE closed forms") {
    const Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    const double oracle = std::log(1.0 + std::exp(-1.0));
    CHECK(std::abs(loss_i2t({eye, eye, 1.0, 0.5}).item() - oracle) <= 1e-12);
    CHECK(std::abs(loss_t2i({eye, eye, 1.0, 0.5}).item() - oracle) <= 1e-12);
    CHECK(std::abs(contrastive_loss({eye, eye, 1.0, 0.5}).item() - 0.31326) <= 1e-5);

    const Tensor one = Tensor::from_data({1, 3}, {0.3, -1, 2});
    const Tensor other = Tensor::from_data({1, 3}, {5, 1, 1});
    CHECK(loss_i2t({one, other, 0.1, 0.5}).item() == 0.0);
    CHECK(loss_t2i({one, other, 0.1, 0.5}).item() == 0.0);

    const Tensor same = Tensor::from_data({3, 2}, {1, 1, 1, 1, 1, 1});
    CHECK(loss_i2t({same, same, 0.1, 0.5}).item() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK_THROWS_AS(contrastive_loss({eye, eye, 1.0, 1.5}), DomainError);
}

TEST_CASE("contrastive loss symmetry, weights and sign") {
    std::mt19937_64 rng(9);
    const Tensor a = random_tensor({5, 4}, rng), b = random_tensor({5, 4}, rng);
    CHECK(loss_t2i({a, a, 0.1, 0.5}).item() == doctest::Approx(loss_i2t({a, a, 0.1, 0.5}).item()).epsilon(1e-12));
    CHECK(contrastive_loss({a, b, 0.1, 1.0}).item() == doctest::Approx(loss_i2t({a, b, 0.1, 1.0}).item()).epsilon(1e-12));
    CHECK(contrastive_loss({a, a, 0.1, 0.5}).item() == doctest::Approx(loss_i2t({a, a, 0.1, 0.5}).item()).epsilon(1e-12));
    CHECK(contrastive_loss({a, b, 0.1, 0.3}).item() >= 0.0);

    // matched cosine 1, mismatched -1
    const Tensor m = Tensor::from_data({2, 2}, {1, 0, -1, 0});
    CHECK(contrastive_loss({m, m, 0.1, 0.5}).item() <= 1e-6);
}

TEST_CASE("lower temperature never raises a diagonal-dominant loss") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = random_tensor({4, 6}, rng);
        const Tensor noise = random_tensor({4, 6}, rng, -0.1, 0.1);
        const Tensor b = add(a, noise);
        const Tensor s = cosine_matrix(a, b);
        bool dominant = true;
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t k = 0; k < 4; ++k) dominant = dominant && s.at({i, i}) >= s.at({i, k}) && s.at({i, i}) >= s.at({k, i});
        }
        if (!dominant) continue;
        double prev = 1e300;
        for (double tau : {1.0, 0.5, 0.2, 0.1, 0.05}) {
            const double l = contrastive_loss({a, b, tau, 0.5}).item();
            CHECK(l <= prev + 1e-12);
            prev = l;
        }
    }
}

TEST_CASE("optimising the contrastive loss separates matched pairs") {
    std::mt19937_64 rng(11);
    Tensor img = random_tensor({8, 6}, rng, -1, 1, true);
    Tensor txt = random_tensor({8, 6}, rng, -1, 1, true);
    for (int step = 0; step < 200; ++step) {
        img.zero_grad();
        txt.zero_grad();
        contrastive_loss({img, txt, 0.1, 0.5}).backward();
        for (Tensor t : {img, txt}) {
            auto d = t.mutable_data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] -= 0.05 * t.grad()[i];
        }
    }
    const Tensor s = cosine_matrix(img.detach(), txt.detach());
    double matched = 0, mismatched = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t k = 0; k < 8; ++k) (i == k ? matched : mismatched) += s.at({i, k});
    }
    CHECK(matched / 8 - mismatched / 56 >= 0.2);
}

TEST_CASE("write_pgm emits a binary P5 plane") {
    const Tensor maps = Tensor::from_data({1, 2, 2, 3}, {0, 0, 0, 0, 0, 0, -1, 0.5, 1, 2, 0.2, 0});
    const auto path = std::filesystem::temp_directory_path() / "tpunet_plane.pgm";
    write_pgm(maps, 0, 1, path);
    std::ifstream in(path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(bytes.size() == 11 + 6);
    CHECK(bytes.substr(0, 11) == "P5\n3 2\n255\n");
    const std::string px = bytes.substr(11);
    CHECK(static_cast<unsigned char>(px[0]) == 0);
    CHECK(static_cast<unsigned char>(px[1]) == 128);
    CHECK(static_cast<unsigned char>(px[2]) == 255);
    CHECK(static_cast<unsigned char>(px[3]) == 255);
    CHECK(static_cast<unsigned char>(px[4]) == 51);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(write_pgm(maps, 1, 0, path), DomainError);
    CHECK_THROWS_AS(write_pgm(Tensor::zeros({2, 2}), 0, 0, path), ShapeError);
}

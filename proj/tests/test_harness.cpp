#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "tpunet/checkpoint.hpp"
#include "tpunet/config.hpp"
#include "tpunet/optim.hpp"
#include "tpunet/training.hpp"

using namespace tpunet;

TEST_CASE("cosine schedule endpoints and monotonicity") {
    CHECK(cosine_lr(0, 1000, 3e-5, 3e-7) == doctest::Approx(3e-5).epsilon(1e-12));
    CHECK(cosine_lr(1000, 1000, 3e-5, 3e-7) == doctest::Approx(3e-7).epsilon(1e-12));
    CHECK(cosine_lr(500, 1000, 3e-5, 3e-7) == doctest::Approx((3e-5 + 3e-7) / 2).epsilon(1e-12));
    double prev = 1.0;
    for (int s = 0; s <= 1000; ++s) {
        const double lr = cosine_lr(s, 1000, 3e-5, 3e-7);
        CHECK(lr <= prev);
        prev = lr;
    }
    CHECK_THROWS_AS(cosine_lr(1001, 1000, 3e-5, 3e-7), DomainError);
    CHECK_THROWS_AS(cosine_lr(-1, 1000, 3e-5, 3e-7), DomainError);
}

TEST_CASE("adam fixed points") {
    std::vector<double> p{1.0, -2.0};
    AdamState st;
    adam_step(p, std::vector<double>{0.0, 0.0}, st, 0.1, 0.0);
    CHECK(p == std::vector<double>{1.0, -2.0});

    // constant gradient: every bias-corrected step has magnitude lr
    std::vector<double> q{0.0};
    AdamState sq;
    for (int i = 0; i < 50; ++i) {
        const double before = q[0];
        adam_step(q, std::vector<double>{3.0}, sq, 0.01, 0.0);
        CHECK(before - q[0] == doctest::Approx(0.01).epsilon(1e-6));
    }

    std::vector<double> r{2.0};
    AdamState sr;
    adam_step(r, std::vector<double>{0.0}, sr, 0.1, 0.5);
    CHECK(r[0] == doctest::Approx(2.0 * (1 - 0.05)).epsilon(1e-15));
    adam_step(r, std::vector<double>{0.0}, sr, 0.1, 0.5);
    CHECK(r[0] == doctest::Approx(2.0 * 0.95 * 0.95).epsilon(1e-15));
    CHECK_THROWS_AS(adam_step(r, std::vector<double>{0.0, 1.0}, sr, 0.1, 0.0), ShapeError);
}

TEST_CASE("run config json round trip and validation") {
    RunConfig c;
    c.variant = Variant::no_modality_fusion;
    c.steps = 12;
    const RunConfig back = RunConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.hash() == c.hash());
    RunConfig d = c;
    d.run_id = "other";
    CHECK(d.hash() == c.hash());
    d.lr0 = 1e-4;
    CHECK(d.hash() != c.hash());
    CHECK_THROWS(RunConfig::from_json({{"bogus", 1}}));
    CHECK_THROWS(RunConfig::from_json({{"lr0", -1.0}}).validate());
    CHECK_THROWS(parse_variant("nope"));
    for (Variant v : kAllVariants) CHECK(parse_variant(variant_name(v)) == v);
    CHECK(RunConfig{}.lr0 == 3e-4);
    CHECK(RunConfig{}.weight_decay == 1e-6);
}

TEST_CASE("variant wiring predicates") {
    CHECK(uses_contrastive(Variant::full));
    CHECK(uses_contrastive(Variant::no_temporal_info));
    CHECK_FALSE(uses_contrastive(Variant::no_temporal_prompt));
    CHECK_FALSE(uses_contrastive(Variant::no_semantic_align));
    CHECK_FALSE(uses_contrastive(Variant::no_modality_fusion));
    CHECK_FALSE(uses_text(Variant::no_temporal_prompt));
    CHECK_FALSE(uses_timestamp(Variant::no_temporal_info));
    CHECK(uses_timestamp(Variant::full));
    CHECK_FALSE(uses_attention_fusion(Variant::no_modality_fusion));
}

TEST_CASE("checkpoint encode/decode and errors") {
    const NamedTensors ts{{"a", Tensor::from_data({2, 2}, {1, 2, 3, 4})}, {"b.c", Tensor::scalar(-0.5)}};
    const std::string bytes = encode_checkpoint(ts);
    CHECK(bytes.substr(0, 4) == "TPUT");
    CHECK(bytes.size() == 4 + 4 + 4 + (4 + 1 + 4 + 16 + 32) + (4 + 3 + 4 + 0 + 8));
    const NamedTensors back = decode_checkpoint(bytes);
    REQUIRE(back.size() == 2);
    CHECK(back[0].first == "a");
    CHECK(back[0].second.shape() == Shape{2, 2});
    CHECK(back[0].second.at({1, 0}) == 3.0);
    CHECK(back[1].second.item() == -0.5);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), FormatError);
    CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), FormatError);
    CHECK_THROWS_AS(find_tensor(back, "zzz"), FormatError);
}

TEST_CASE("perfect predictions score one and mean is the class average") {
    const Tensor y = Tensor::from_data({2, 2, 1, 2}, {1, 0, 0, 0, 1, 1, 0, 1});
    const auto scores = score_probabilities(y, y, {"a", "b"}, 0.5);
    for (const auto& s : scores) {
        CHECK(s.dice == 1.0);
        CHECK(s.jaccard == 1.0);
    }
    const Tensor p = Tensor::from_data({2, 2, 1, 2}, {1, 1, 0, 0, 0, 1, 1, 1});
    const auto mixed = score_probabilities(p, y, {"a", "b"}, 0.5);
    // sample 0: a {0} vs {0,1} -> 2/3, b empty vs empty -> 1; sample 1: a {1} vs {0,1} -> 2/3, b {0,1} vs {1} -> 2/3
    CHECK(mixed[0].dice == doctest::Approx(2.0 / 3.0));
    CHECK(mixed[1].dice == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK_THROWS_AS(score_probabilities(p, Tensor::zeros({2, 2, 1, 3}), {"a", "b"}, 0.5), ShapeError);
}

TEST_CASE("median") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    CHECK_THROWS(median({}));
}

namespace {

Dataset small_dataset() {
    SynthConfig cfg = default_synth_config();
    cfg.patients = 10;
    cfg.slices = 8;
    cfg.image_size = 16;
    return generate_samples(cfg);
}

RunConfig small_config() {
    RunConfig c;
    c.steps = 50;
    c.batch_size = 4;
    c.eval_every = 25;
    c.channels = {4, 8, 8};
    c.fusion_dim = 8;
    c.text_dim = 8;
    c.lr0 = 1e-3;
    return c;
}

}  // namespace

TEST_CASE("smoke training writes a checkpoint and is reproducible") {
    const Dataset d = small_dataset();
    REQUIRE(d.train.size() == 56);
    const auto dir = std::filesystem::temp_directory_path() / "tpunet_smoke_run";
    std::filesystem::remove_all(dir);
    const RunConfig c = small_config();
    const TrainResult a = train(c, d, dir);
    for (double l : a.report.loss_curve) CHECK(std::isfinite(l));
    CHECK(a.report.loss_curve.size() == 50);
    for (const char* f : {"best.ckpt", "config.json", "vocab.json", "metrics.json", "metrics.csv", "loss.csv", "timing.json"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    const TrainResult b = train(c, d);
    CHECK(a.report.to_json().dump() == b.report.to_json().dump());
    CHECK(a.report.loss_curve.back() == b.report.loss_curve.back());

    const MetricsReport e = evaluate_checkpoint(dir / "best.ckpt", d, "test");
    CHECK(e.mean_dice == a.report.mean_dice);
    double sum = 0;
    for (const auto& k : e.classes) sum += k.dice;
    CHECK(e.mean_dice == doctest::Approx(sum / 3).epsilon(1e-15));

    const auto files = export_maps(dir / "best.ckpt", d, "test", 2, dir / "maps");
    CHECK(files.size() == 1 + 3 * 3);
    for (const auto& f : files) CHECK(std::filesystem::file_size(f) == 13 + 16 * 16);
    CHECK_THROWS_AS(export_maps(dir / "best.ckpt", d, "test", d.test.size(), dir / "maps"), DomainError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("training rejects a class-count mismatch") {
    const Dataset d = small_dataset();
    RunConfig c = small_config();
    c.num_classes = 1;
    CHECK_THROWS_AS(train(c, d), ShapeError);
}

TEST_CASE("every variant trains and the ablation table has five rows") {
    const Dataset d = small_dataset();
    RunConfig c = small_config();
    c.steps = 4;
    c.eval_every = 4;
    const AblationTable t = run_ablation(c, d, {1});
    REQUIRE(t.rows.size() == 5);
    const std::string csv = t.to_csv();
    CHECK(csv.rfind("variant,stomach_dice,stomach_jaccard,small_bowel_dice,small_bowel_jaccard,large_bowel_dice,"
                    "large_bowel_jaccard,mean_dice,mean_jaccard\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    CHECK(t.row(Variant::no_temporal_prompt).runs.size() == 1);
}

TEST_CASE("prompts use the organ-set phrase and no labels") {
    const Dataset d = small_dataset();
    CHECK(prompt_organ(d.config) == "abdomen");
    const std::string p = prompt_for(d.train.records[0], "abdomen", true);
    CHECK(p.find("abdomen") != std::string::npos);
    const Vocabulary v = build_vocabulary(prompt_corpus(d.config));
    CHECK(v.contains("ct"));
    CHECK(v.contains("abdomen"));
    for (const auto& s : prompt_corpus(d.config)) CHECK(tokenize(s, v, 16).content_length() <= 16);
}

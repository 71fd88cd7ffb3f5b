#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "tpunet/checkpoint.hpp"
#include "tpunet/synthdata.hpp"

using namespace tpunet;

TEST_CASE("presence weight peak, boundary and argmax") {
    const OrganSpec s{"liver", 0.5, 0.1, 0, 0.15};
    CHECK(presence_weight(s, 8, 16) == 1.0);
    const OrganSpec late{"liver", 0.78, 0.1, 0, 0.15};
    int best = 0;
    double best_w = -1;
    for (int i = 1; i <= 100; ++i) {
        const double w = presence_weight(late, i, 100);
        if (w > best_w) {
            best_w = w;
            best = i;
        }
    }
    CHECK(best == 78);
    // exp(-x^2/2) = 0.1 at x = sqrt(2 ln 10) = 2.1460
    const double x = std::sqrt(2.0 * std::log(10.0));
    CHECK(x == doctest::Approx(2.146).epsilon(1e-3));
    const OrganSpec edge{"liver", 1.0 - x * 0.1, 0.1, 0, 0.15};
    CHECK(presence_weight(edge, 1, 1) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(is_present(0.1));
    CHECK_FALSE(is_present(0.0999));
}

TEST_CASE("organ spec validation") {
    CHECK_THROWS_AS((OrganSpec{"a", 0.0, 0.1, 0, 0.1}.validate()), DomainError);
    CHECK_THROWS_AS((OrganSpec{"a", 0.5, 0.31, 0, 0.1}.validate()), DomainError);
    CHECK_NOTHROW((OrganSpec{"a", 0.5, 0.3, 0, 0.1}.validate()));
}

TEST_CASE("absent organs have empty masks and rendering is deterministic") {
    const auto cfg = default_synth_config();
    const SliceSample a = render_slice(cfg.organs, 5, 1, 16, 9);
    const SliceSample b = render_slice(cfg.organs, 5, 1, 16, 9);
    CHECK(std::equal(a.image.data().begin(), a.image.data().end(), b.image.data().begin()));
    CHECK(std::equal(a.masks.data().begin(), a.masks.data().end(), b.masks.data().begin()));
    // t = 1/16 lies outside the large bowel window 0.7 +- 0.215
    const std::size_t plane = 64 * 64;
    for (std::size_t i = 0; i < plane; ++i) CHECK(a.masks.data()[2 * plane + i] == 0.0);
    for (double v : a.image.data()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("shared-texture organs render identically at equal weight") {
    // one organ at mu 0.3 and another at mu 0.7 seen at mirrored slices
    const std::vector<OrganSpec> first{{"first", 0.3, 0.1, 0, 0.16}};
    const std::vector<OrganSpec> third{{"third", 0.7, 0.1, 0, 0.16}};
    double mean_a = 0, mean_b = 0;
    int n = 0;
    for (int s = 0; s < 100; ++s) {
        for (int i : {4, 5, 6}) {
            const SliceSample a = render_slice(first, 100 + s, i, 20, 500 + s);
            const SliceSample b = render_slice(third, 100 + s, 20 - i, 20, 500 + s);
            CHECK(std::equal(a.image.data().begin(), a.image.data().end(), b.image.data().begin()));
            for (double v : a.image.data()) mean_a += v;
            for (double v : b.image.data()) mean_b += v;
            ++n;
        }
    }
    CHECK(mean_a == mean_b);
}

TEST_CASE("split plan is 7:1:2 by patient and disjoint") {
    const SplitPlan p = plan_splits(40, 7);
    CHECK(p.train.size() == 28);
    CHECK(p.val.size() == 4);
    CHECK(p.test.size() == 8);
    std::set<int> all;
    for (const auto* part : {&p.train, &p.val, &p.test}) all.insert(part->begin(), part->end());
    CHECK(all.size() == 40);
    CHECK_THROWS_AS(plan_splits(9, 7), DomainError);
}

TEST_CASE("default dataset sizes, ordering and determinism") {
    const SynthConfig cfg = default_synth_config();
    REQUIRE(cfg.organs.size() == 3);
    CHECK(cfg.organs[0].mu == 0.3);
    CHECK(cfg.organs[1].mu == 0.5);
    CHECK(cfg.organs[2].mu == 0.7);
    for (const auto& o : cfg.organs) CHECK(o.sigma == 0.1);
    CHECK(cfg.organs[0].texture_class == cfg.organs[2].texture_class);
    CHECK(cfg.organs[0].texture_class != cfg.organs[1].texture_class);

    const Dataset d = generate_samples(cfg);
    CHECK(d.train.size() == 448);
    CHECK(d.val.size() == 64);
    CHECK(d.test.size() == 128);
    CHECK(d.train.images.shape() == Shape{448, 1, 64, 64});
    CHECK(d.test.masks.shape() == Shape{128, 3, 64, 64});
    std::set<int> tr, va, te;
    for (const auto& r : d.train.records) tr.insert(r.patient);
    for (const auto& r : d.val.records) va.insert(r.patient);
    for (const auto& r : d.test.records) te.insert(r.patient);
    CHECK(tr.size() == 28);
    for (int p : va) CHECK(tr.count(p) == 0);
    for (int p : te) CHECK((tr.count(p) == 0 && va.count(p) == 0));
    CHECK(generate_samples(cfg).hash == d.hash);
    SynthConfig other = cfg;
    other.seed = 8;
    CHECK(generate_samples(other).hash != d.hash);
}

TEST_CASE("dataset directory round trip") {
    SynthConfig cfg = default_synth_config();
    cfg.patients = 10;
    cfg.slices = 4;
    cfg.image_size = 16;
    const auto dir = std::filesystem::temp_directory_path() / "tpunet_test_dataset";
    std::filesystem::remove_all(dir);
    const std::string hash = generate_dataset(cfg, dir);
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    const Dataset d = load_dataset(dir);
    CHECK(d.hash == hash);
    CHECK(d.train.size() + d.val.size() + d.test.size() == 40);
    CHECK(d.train.records.front().slice_total == 4);
    CHECK(generate_dataset(cfg, dir) == hash);
    std::filesystem::remove_all(dir);
    CHECK_THROWS(load_dataset(dir));
}

TEST_CASE("synth config json round trip") {
    const SynthConfig cfg = default_synth_config();
    const SynthConfig back = SynthConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("presence peaks track mu") {
    std::vector<double> pos;
    std::vector<std::uint8_t> flag;
    const OrganSpec s{"x", 0.42, 0.1, 0, 0.1};
    for (int i = 1; i <= 50; ++i) {
        pos.push_back(i / 50.0);
        flag.push_back(is_present(presence_weight(s, i, 50)) ? 1 : 0);
    }
    CHECK(std::abs(smoothed_presence_peak(pos, flag) - 0.42) <= 0.05);
    CHECK_THROWS(smoothed_presence_peak({}, {}));
}

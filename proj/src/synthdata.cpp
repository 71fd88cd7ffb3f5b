// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "tpunet/checkpoint.hpp"
#include "tpunet/hash.hpp"
#include "tpunet/layers.hpp"

namespace tpunet {

void OrganSpec::validate() const {
    if (name.empty()) throw std::invalid_argument("organ: empty name");
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("organ " + name + ": mu must lie in (0, 1)");
    if (!(sigma > 0.0 && sigma <= 0.3)) throw DomainError("organ " + name + ": sigma must lie in (0, 0.3]");
    if (!(base_radius > 0.0 && base_radius <= 0.5)) throw DomainError("organ " + name + ": base_radius out of range");
    if (texture_class < 0) throw DomainError("organ " + name + ": negative texture class");
}

double presence_weight(const OrganSpec& spec, int slice_index, int slice_total) {
    if (slice_total < 1 || slice_index < 1 || slice_index > slice_total) {
        throw DomainError("presence_weight: slice " + std::to_string(slice_index) + "/" +
                          std::to_string(slice_total) + " outside 1..N");
    }
    const double t = static_cast<double>(slice_index) / slice_total;
    const double z = (t - spec.mu) / spec.sigma;
    return std::exp(-0.5 * z * z);
}

nlohmann::json SynthConfig::to_json() const {
    nlohmann::json organs_json = nlohmann::json::array();
    for (const auto& o : organs) {
        organs_json.push_back({{"name", o.name},
                               {"mu", o.mu},
                               {"sigma", o.sigma},
                               {"texture_class", o.texture_class},
                               {"base_radius", o.base_radius}});
    }
    return {{"organs", organs_json},     {"patients", patients},
            {"slices", slices},          {"image_size", image_size},
            {"seed", seed},              {"modality", std::string(modality_name(modality))},
            {"noise_sigma", noise_sigma}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
    SynthConfig c = default_synth_config();
    if (j.contains("organs")) {
        c.organs.clear();
        for (const auto& o : j.at("organs")) {
            OrganSpec spec;
            spec.name = o.at("name").get<std::string>();
            spec.mu = o.at("mu").get<double>();
            spec.sigma = o.at("sigma").get<double>();
            spec.texture_class = o.value("texture_class", 0);
            spec.base_radius = o.value("base_radius", 0.15);
            c.organs.push_back(spec);
        }
    }
    c.patients = j.value("patients", c.patients);
    c.slices = j.value("slices", c.slices);
    c.image_size = j.value("image_size", c.image_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("modality")) c.modality = parse_modality(j.at("modality").get<std::string>());
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    return c;
}

SynthConfig default_synth_config() {
    SynthConfig c;
    c.organs = {
        {"stomach", 0.3, 0.1, 0, 0.16},
        {"small_bowel", 0.5, 0.1, 1, 0.13},
        {"large_bowel", 0.7, 0.1, 0, 0.16},
    };
    return c;
}

double texture_level(int texture_class) { return 0.4 + 0.3 * static_cast<double>(texture_class % 2) + 0.05 * (texture_class / 2); }

std::uint64_t patient_seed(std::uint64_t master_seed, int patient) {
    return derive_seed(master_seed, "patient/" + std::to_string(patient));
}

std::uint64_t slice_noise_seed(std::uint64_t master_seed, int patient, int slice_index) {
    return derive_seed(master_seed, "noise/" + std::to_string(patient) + "/" + std::to_string(slice_index));
}

std::vector<OrganPlacement> patient_geometry(const std::vector<OrganSpec>& organs, int image_size,
                                             std::uint64_t geometry_seed) {
    std::mt19937_64 rng(geometry_seed);
    std::uniform_real_distribution<double> centre(0.3 * image_size, 0.7 * image_size);
    std::uniform_real_distribution<double> aspect(0.8, 1.25);
    std::vector<OrganPlacement> out;
    out.reserve(organs.size());
    for (std::size_t k = 0; k < organs.size(); ++k) {
        OrganPlacement p;
        p.cx = centre(rng);
        p.cy = centre(rng);
        p.aspect = aspect(rng);
        out.push_back(p);
    }
    return out;
}

SliceSample render_slice(const std::vector<OrganSpec>& organs, std::uint64_t geometry_seed, int slice_index,
                         int slice_total, std::uint64_t noise_seed, const RenderOptions& options) {
    if (organs.empty()) throw std::invalid_argument("render_slice: no organs");
    if (options.image_size < 4) throw std::invalid_argument("render_slice: image too small");
    for (const auto& o : organs) o.validate();
    const auto size = static_cast<std::size_t>(options.image_size);
    const std::size_t k_count = organs.size();
    const auto placement = patient_geometry(organs, options.image_size, geometry_seed);

    std::vector<double> image(size * size, 0.1);
    std::vector<double> masks(k_count * size * size, 0.0);
    for (std::size_t k = 0; k < k_count; ++k) {
        const double w = presence_weight(organs[k], slice_index, slice_total);
        if (!is_present(w)) continue;
        const double radius = organs[k].base_radius * w * options.image_size;
        const double rx = radius * std::sqrt(placement[k].aspect);
        const double ry = radius / std::sqrt(placement[k].aspect);
        const double level = texture_level(organs[k].texture_class);
        for (std::size_t y = 0; y < size; ++y) {
            const double dy = (static_cast<double>(y) + 0.5 - placement[k].cy) / ry;
            for (std::size_t x = 0; x < size; ++x) {
                const double dx = (static_cast<double>(x) + 0.5 - placement[k].cx) / rx;
                if (dx * dx + dy * dy <= 1.0) {
                    image[y * size + x] = level;
                    masks[(k * size + y) * size + x] = 1.0;
                }
            }
        }
    }
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, options.noise_sigma);
    for (double& v : image) v = std::clamp(v + noise(rng), 0.0, 1.0);

    SliceSample sample;
    sample.image = Tensor::from_data({1, size, size}, std::move(image));
    sample.masks = Tensor::from_data({k_count, size, size}, std::move(masks));
    sample.patient = options.patient;
    sample.slice_index = slice_index;
    sample.slice_total = slice_total;
    sample.modality = options.modality;
    return sample;
}

SplitPlan plan_splits(int patients, std::uint64_t seed) {
    if (patients < 10) throw DomainError("dataset: need at least 10 patients for a 7:1:2 split");
    std::vector<int> order(static_cast<std::size_t>(patients));
    for (int p = 0; p < patients; ++p) order[static_cast<std::size_t>(p)] = p;
    std::mt19937_64 rng(derive_seed(seed, "split"));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::lround(0.7 * patients));
    const auto n_val = static_cast<std::size_t>(std::lround(0.1 * patients));
    SplitPlan plan;
    plan.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                    order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    plan.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    for (auto* part : {&plan.train, &plan.val, &plan.test}) std::sort(part->begin(), part->end());
    return plan;
}

namespace {

SplitData render_split(const SynthConfig& config, const std::string& name, const std::vector<int>& patients) {
    const auto size = static_cast<std::size_t>(config.image_size);
    const std::size_t k_count = config.organs.size();
    const std::size_t n = patients.size() * static_cast<std::size_t>(config.slices);
    std::vector<double> images;
    std::vector<double> masks;
    images.reserve(n * size * size);
    masks.reserve(n * k_count * size * size);
    SplitData split;
    split.name = name;
    RenderOptions options{config.image_size, config.noise_sigma, config.modality, 0};
    for (int p : patients) {
        options.patient = p;
        const std::uint64_t geometry = patient_seed(config.seed, p);
        for (int i = 1; i <= config.slices; ++i) {
            const SliceSample s = render_slice(config.organs, geometry, i, config.slices,
                                               slice_noise_seed(config.seed, p, i), options);
            images.insert(images.end(), s.image.data().begin(), s.image.data().end());
            masks.insert(masks.end(), s.masks.data().begin(), s.masks.data().end());
            split.records.push_back({p, i, config.slices, config.modality});
        }
    }
    split.images = Tensor::from_data({n, 1, size, size}, std::move(images));
    split.masks = Tensor::from_data({n, k_count, size, size}, std::move(masks));
    return split;
}

NamedTensors split_tensors(const SplitData& split) {
    return {{"images", split.images}, {"masks", split.masks}};
}

nlohmann::json manifest_json(const SynthConfig& config, const SplitPlan& plan, const Dataset& data) {
    nlohmann::json samples = nlohmann::json::array();
    for (const SplitData* split : {&data.train, &data.val, &data.test}) {
        for (std::size_t k = 0; k < split->records.size(); ++k) {
            const auto& r = split->records[k];
            samples.push_back({{"split", split->name},
                               {"index", k},
                               {"patient", r.patient},
                               {"i", r.slice_index},
                               {"N", r.slice_total},
                               {"modality", std::string(modality_name(r.modality))},
                               {"file", split->name + ".tpt"}});
        }
    }
    return {{"format", "tpunet-synth"},
            {"version", 1},
            {"config", config.to_json()},
            {"splits", {{"train", plan.train}, {"val", plan.val}, {"test", plan.test}}},
            {"samples", samples}};
}

std::string hash_dataset(const std::string& manifest, const std::vector<std::string>& payloads) {
    std::uint64_t h = fnv1a64(manifest);
    for (const auto& p : payloads) h = fnv1a64(p, h);
    return to_hex(h);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

const SplitData& Dataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw std::invalid_argument("unknown split '" + name + "'");
}

Dataset generate_samples(const SynthConfig& config) {
    if (config.organs.empty()) throw std::invalid_argument("dataset: no organs configured");
    for (const auto& o : config.organs) o.validate();
    if (config.slices < 1) throw DomainError("dataset: slices per patient must be positive");
    if (config.image_size % 4 != 0) throw DomainError("dataset: image size must be divisible by 4");
    const SplitPlan plan = plan_splits(config.patients, config.seed);
    Dataset data;
    data.config = config;
    data.train = render_split(config, "train", plan.train);
    data.val = render_split(config, "val", plan.val);
    data.test = render_split(config, "test", plan.test);
    std::vector<std::string> payloads;
    for (const SplitData* s : {&data.train, &data.val, &data.test}) payloads.push_back(encode_checkpoint(split_tensors(*s)));
    data.hash = hash_dataset(manifest_json(config, plan, data).dump(), payloads);
    return data;
}

std::string generate_dataset(const SynthConfig& config, const std::filesystem::path& dir) {
    Dataset data = generate_samples(config);
    const SplitPlan plan = plan_splits(config.patients, config.seed);
    std::filesystem::create_directories(dir);
    const std::string manifest = manifest_json(config, plan, data).dump(2);
    {
        std::ofstream out(dir / "manifest.json", std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
        out << manifest << '\n';
    }
    for (const SplitData* s : {&data.train, &data.val, &data.test}) {
        save_checkpoint(dir / (s->name + ".tpt"), split_tensors(*s));
    }
    return data.hash;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    if (manifest.value("format", "") != "tpunet-synth") throw std::runtime_error("not a tpunet dataset: " + dir.string());
    Dataset data;
    data.config = SynthConfig::from_json(manifest.at("config"));
    const SplitPlan plan{manifest.at("splits").at("train").get<std::vector<int>>(),
                         manifest.at("splits").at("val").get<std::vector<int>>(),
                         manifest.at("splits").at("test").get<std::vector<int>>()};
    std::vector<std::string> payloads;
    for (SplitData* s : {&data.train, &data.val, &data.test}) {
        s->name = s == &data.train ? "train" : (s == &data.val ? "val" : "test");
        payloads.push_back(read_file(dir / (s->name + ".tpt")));
        const NamedTensors tensors = decode_checkpoint(payloads.back());
        s->images = find_tensor(tensors, "images");
        s->masks = find_tensor(tensors, "masks");
    }
    for (const auto& rec : manifest.at("samples")) {
        const std::string split = rec.at("split").get<std::string>();
        SplitData& s = split == "train" ? data.train : (split == "val" ? data.val : data.test);
        s.records.push_back({rec.at("patient").get<int>(), rec.at("i").get<int>(), rec.at("N").get<int>(),
                             parse_modality(rec.at("modality").get<std::string>())});
    }
    for (const SplitData* s : {&data.train, &data.val, &data.test}) {
        if (s->images.dim(0) != s->records.size() || s->masks.dim(0) != s->records.size()) {
            throw std::runtime_error("dataset " + dir.string() + ": split " + s->name + " does not match manifest");
        }
        if (s->masks.dim(1) != data.config.organs.size()) {
            throw std::runtime_error("dataset " + dir.string() + ": mask channels do not match organ count");
        }
    }
    data.hash = hash_dataset(manifest_json(data.config, plan, data).dump(), payloads);
    return data;
}

double smoothed_presence_peak(const std::vector<double>& positions, const std::vector<std::uint8_t>& present,
                              double bandwidth) {
    if (positions.size() != present.size() || positions.empty()) {
        throw std::invalid_argument("smoothed_presence_peak: positions and flags must be non-empty and aligned");
    }
    // Kernel density of the positions at which the organ occurs, on a 0.001 grid.
    double best_t = 0.0;
    double best = -1.0;
    for (int g = 1; g <= 1000; ++g) {
        const double t = g / 1000.0;
        double density = 0.0;
        for (std::size_t j = 0; j < positions.size(); ++j) {
            if (!present[j]) continue;
            const double z = (positions[j] - t) / bandwidth;
            density += std::exp(-0.5 * z * z);
        }
        if (density > best) {
            best = density;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace tpunet

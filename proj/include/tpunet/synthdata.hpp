// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpunet/prompt.hpp"
#include "tpunet/tensor.hpp"

namespace tpunet {

/// An organ whose occurrence over the normalised slice position t = i/N
/// follows a Gaussian bump centred on `mu`. Organs with equal texture_class
/// render identically.
struct OrganSpec {
    std::string name;
    double mu = 0.5;
    double sigma = 0.1;
    int texture_class = 0;
    double base_radius = 0.15;  // fraction of image width

    void validate() const;
};

inline constexpr double kPresenceThreshold = 0.1;

/// exp(-(i/N - mu)^2 / (2 sigma^2)).
double presence_weight(const OrganSpec& spec, int slice_index, int slice_total);
inline bool is_present(double weight) { return weight >= kPresenceThreshold; }

struct SynthConfig {
    std::vector<OrganSpec> organs;
    int patients = 40;
    int slices = 16;
    int image_size = 64;
    std::uint64_t seed = 7;
    Modality modality = Modality::mri;
    double noise_sigma = 0.05;

    nlohmann::json to_json() const;
    static SynthConfig from_json(const nlohmann::json& j);
};

/// Three organs with mu = (0.3, 0.5, 0.7), sigma = 0.1; the first and last
/// share a texture and size so only the slice position tells them apart.
SynthConfig default_synth_config();

/// One patient's organ layout, fixed across all of that patient's slices.
struct OrganPlacement {
    double cx = 0;      // pixels
    double cy = 0;
    double aspect = 1;  // x-radius / y-radius
};

std::vector<OrganPlacement> patient_geometry(const std::vector<OrganSpec>& organs, int image_size,
                                             std::uint64_t geometry_seed);

struct SliceSample {
    Tensor image;  // [1, H, W] in [0, 1]
    Tensor masks;  // [K, H, W] in {0, 1}
    int patient = 0;
    int slice_index = 1;
    int slice_total = 1;
    Modality modality = Modality::mri;
};

struct RenderOptions {
    int image_size = 64;
    double noise_sigma = 0.05;
    Modality modality = Modality::mri;
    int patient = 0;
};

/// Draws every present organ as a filled ellipse whose radii scale with the
/// presence weight. Pixel intensity comes from the texture class (later
/// organs overwrite earlier ones) plus Gaussian noise; masks stay per-organ.
SliceSample render_slice(const std::vector<OrganSpec>& organs, std::uint64_t geometry_seed, int slice_index,
                         int slice_total, std::uint64_t noise_seed, const RenderOptions& options = {});

/// Base intensity of a texture class before noise.
double texture_level(int texture_class);

std::uint64_t patient_seed(std::uint64_t master_seed, int patient);
std::uint64_t slice_noise_seed(std::uint64_t master_seed, int patient, int slice_index);

struct SampleRecord {
    int patient = 0;
    int slice_index = 1;
    int slice_total = 1;
    Modality modality = Modality::mri;
};

struct SplitData {
    std::string name;
    Tensor images;  // [n, 1, H, W]
    Tensor masks;   // [n, K, H, W]
    std::vector<SampleRecord> records;

    std::size_t size() const { return records.size(); }
};

struct Dataset {
    SynthConfig config;
    SplitData train;
    SplitData val;
    SplitData test;
    std::string hash;

    const SplitData& split(const std::string& name) const;
    std::size_t num_classes() const { return config.organs.size(); }
};

struct SplitPlan {
    std::vector<int> train, val, test;  // patient ids
};

/// Patient-level 7:1:2 split after a seeded shuffle. Throws for < 10 patients.
SplitPlan plan_splits(int patients, std::uint64_t seed);

Dataset generate_samples(const SynthConfig& config);

/// Writes manifest.json and one tensor checkpoint per split into `dir`.
/// Returns the dataset hash.
std::string generate_dataset(const SynthConfig& config, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Peak location of the Gaussian kernel density of organ occurrences:
/// positions t_j in (0, 1] with 0/1 presence flags, evaluated on a fine grid.
double smoothed_presence_peak(const std::vector<double>& positions, const std::vector<std::uint8_t>& present,
                              double bandwidth = 0.05);

}  // namespace tpunet

// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpunet/config.hpp"
#include "tpunet/model.hpp"
#include "tpunet/prompt.hpp"
#include "tpunet/synthdata.hpp"

namespace tpunet {

struct ClassScores {
    std::string name;
    double dice = 0.0;
    double jaccard = 0.0;
};

/// Per-class and mean overlap scores for one split. `to_json` is fully
/// determined by (seed, config, data); wall-clock time is kept outside it.
struct MetricsReport {
    std::string run_id;
    std::string variant;
    std::string split;
    std::string config_hash;
    std::string dataset_hash;
    std::uint64_t seed = 0;
    std::vector<ClassScores> classes;
    double mean_dice = 0.0;
    double mean_jaccard = 0.0;
    int best_step = -1;
    std::vector<double> loss_curve;
    double wall_clock_seconds = 0.0;

    nlohmann::json to_json() const;
    /// One "run_id,variant,class,dice,jaccard,seed" row per class plus a "mean" row.
    std::string to_csv() const;
};

inline constexpr const char* kMetricsCsvHeader = "run_id,variant,class,dice,jaccard,seed";

/// Organ slot of the prompt: "abdomen" for multi-organ data, else the organ.
std::string prompt_organ(const SynthConfig& data);
std::vector<std::string> prompt_corpus(const SynthConfig& data);
std::string prompt_for(const SampleRecord& record, const std::string& organ, bool include_time);

/// Token sequences for selected samples, or none for the text-free variant.
std::vector<TokenSequence> batch_tokens(const SplitData& split, const std::vector<std::size_t>& indices,
                                        const RunConfig& config, const Vocabulary& vocab, const std::string& organ);

struct Batch {
    Tensor images;  // [B, 1, H, W]
    Tensor masks;   // [B, K, H, W]
};

Batch gather_batch(const SplitData& split, const std::vector<std::size_t>& indices);

/// Scores precomputed probabilities against binary targets, both [n, K, H, W]:
/// per-sample, per-class Dice/Jaccard averaged over samples.
std::vector<ClassScores> score_probabilities(const Tensor& probabilities, const Tensor& targets,
                                             const std::vector<std::string>& class_names, double threshold);

MetricsReport evaluate(const TpuNet& model, const Dataset& data, const std::string& split, const RunConfig& config,
                       const Vocabulary& vocab);

struct TrainResult {
    MetricsReport report;  // best-validation checkpoint scored on the test split
    NamedTensors best_params;
    Vocabulary vocab;
    double best_val_dice = -1.0;
};

/// Trains one variant. When `out_dir` is given, writes config.json,
/// vocab.json, best.ckpt, loss.csv, metrics.json, metrics.csv and timing.json.
TrainResult train(const RunConfig& config, const Dataset& data,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Loads RUN/best.ckpt with its sibling config.json and vocab.json.
MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const Dataset& data,
                                  const std::string& split);

struct AblationRow {
    Variant variant;
    std::vector<MetricsReport> runs;  // one per seed
    std::vector<ClassScores> median_classes;
    double median_dice = 0.0;
    double median_jaccard = 0.0;
};

struct AblationTable {
    std::vector<AblationRow> rows;  // in kAllVariants order
    std::vector<std::uint64_t> seeds;

    const AblationRow& row(Variant variant) const;
    /// Header "variant,<class>_dice,<class>_jaccard,...,mean_dice,mean_jaccard"
    /// and one row of per-seed medians per variant.
    std::string to_csv() const;
};

/// Writes image.pgm plus <class>_prob, <class>_pred and <class>_mask PGMs
/// for one sample of a split, using a checkpoint's sibling config and vocab.
/// Returns the files written.
std::vector<std::filesystem::path> export_maps(const std::filesystem::path& checkpoint, const Dataset& data,
                                               const std::string& split, std::size_t index,
                                               const std::filesystem::path& out_dir);

double median(std::vector<double> values);

AblationTable run_ablation(const RunConfig& base, const Dataset& data, const std::vector<std::uint64_t>& seeds,
                           const std::optional<std::filesystem::path>& runs_dir = std::nullopt);

}  // namespace tpunet

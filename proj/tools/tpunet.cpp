// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point. Every command prints one JSON line on stdout.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tpunet/checkpoint.hpp"
#include "tpunet/gradsuite.hpp"
#include "tpunet/synthdata.hpp"
#include "tpunet/training.hpp"

using nlohmann::json;
using namespace tpunet;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
            throw DomainError("bad seed list: " + list);
        }
        seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw DomainError("empty seed list");
    return seeds;
}

void emit(const json& j) { std::cout << j.dump() << std::endl; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tpunet: temporal-prompt UNet on synthetic slices"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_dir, ckpt, split = "test", seeds = "1,2,3", module, runs_dir;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic slice dataset");
    gen->add_option("--config", config_path, "synthetic data config (JSON); defaults if omitted");
    gen->add_option("--out", out_path, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train one variant");
    tr->add_option("--config", config_path, "run config (flat JSON)")->required();
    tr->add_option("--data", data_dir, "dataset directory")->required();
    tr->add_option("--out", out_path, "run directory")->required();

    auto* ev = app.add_subcommand("eval", "score a checkpoint on a split");
    ev->add_option("--ckpt", ckpt, "RUN/best.ckpt")->required();
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--split", split, "train, val or test");

    std::size_t index = 0;
    auto* ex = app.add_subcommand("export", "write PGM maps for one sample");
    ex->add_option("--ckpt", ckpt, "RUN/best.ckpt")->required();
    ex->add_option("--data", data_dir, "dataset directory")->required();
    ex->add_option("--split", split, "train, val or test");
    ex->add_option("--index", index, "sample index within the split");
    ex->add_option("--out", out_path, "output directory")->required();

    auto* ab = app.add_subcommand("ablate", "train all variants over several seeds");
    ab->add_option("--config", config_path, "base run config (flat JSON)")->required();
    ab->add_option("--data", data_dir, "dataset directory")->required();
    ab->add_option("--seeds", seeds, "comma-separated seeds");
    ab->add_option("--out", out_path, "median table CSV")->required();
    ab->add_option("--runs", runs_dir, "keep per-run artefacts here");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gc->add_option("--module", module, "one of the suite modules");

    CLI11_PARSE(app, argc, argv);

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (gen->parsed()) {
            const SynthConfig cfg = config_path.empty() ? default_synth_config()
                                                        : SynthConfig::from_json(read_json_file(config_path));
            const std::string hash = generate_dataset(cfg, out_path);
            const Dataset d = load_dataset(out_path);
            emit({{"command", "gen-data"},
                  {"out", out_path},
                  {"hash", hash},
                  {"train", d.train.size()},
                  {"val", d.val.size()},
                  {"test", d.test.size()}});
        } else if (tr->parsed()) {
            RunConfig cfg = RunConfig::from_json(read_json_file(config_path));
            cfg.dataset = data_dir;
            const Dataset d = load_dataset(data_dir);
            const TrainResult r = train(cfg, d, std::filesystem::path(out_path));
            json j = r.report.to_json();
            j.erase("loss_curve");
            j["command"] = "train";
            j["checkpoint"] = (std::filesystem::path(out_path) / "best.ckpt").string();
            j["best_val_dice"] = r.best_val_dice;
            j["seconds"] = r.report.wall_clock_seconds;
            emit(j);
        } else if (ev->parsed()) {
            const Dataset d = load_dataset(data_dir);
            const MetricsReport r = evaluate_checkpoint(ckpt, d, split);
            const auto dir = std::filesystem::path(ckpt).parent_path();
            write_file(dir / ("eval_" + split + ".json"), r.to_json().dump(2) + "\n");
            write_file(dir / ("eval_" + split + ".csv"), std::string(kMetricsCsvHeader) + "\n" + r.to_csv());
            json j = r.to_json();
            j.erase("loss_curve");
            j.erase("best_step");
            j["command"] = "eval";
            emit(j);
        } else if (ex->parsed()) {
            const Dataset d = load_dataset(data_dir);
            json files = json::array();
            for (const auto& f : export_maps(ckpt, d, split, index, out_path)) files.push_back(f.string());
            emit({{"command", "export"}, {"split", split}, {"index", index}, {"files", files}});
        } else if (ab->parsed()) {
            RunConfig cfg = RunConfig::from_json(read_json_file(config_path));
            cfg.dataset = data_dir;
            const Dataset d = load_dataset(data_dir);
            std::optional<std::filesystem::path> runs;
            if (!runs_dir.empty()) runs = runs_dir;
            const AblationTable table = run_ablation(cfg, d, parse_seeds(seeds), runs);
            write_file(out_path, table.to_csv());
            std::string per_seed = std::string(kMetricsCsvHeader) + "\n";
            for (const auto& row : table.rows) {
                for (const auto& r : row.runs) per_seed += r.to_csv();
            }
            auto seeds_path = std::filesystem::path(out_path);
            seeds_path.replace_extension(".seeds.csv");
            write_file(seeds_path, per_seed);
            json rows = json::array();
            for (const auto& row : table.rows) {
                rows.push_back({{"variant", variant_name(row.variant)},
                                {"median_dice", row.median_dice},
                                {"median_jaccard", row.median_jaccard}});
            }
            emit({{"command", "ablate"},
                  {"table", out_path},
                  {"per_seed", seeds_path.string()},
                  {"rows", rows},
                  {"seconds", seconds_since(t0)}});
        } else if (gc->parsed()) {
            const auto cases = run_grad_suite(module);
            bool passed = true;
            double worst = 0.0;
            json failures = json::array();
            for (const auto& c : cases) {
                passed = passed && c.report.passed;
                worst = std::max(worst, c.report.max_rel_error);
                if (!c.report.passed) {
                    failures.push_back({{"module", c.module}, {"case", c.name}, {"max_rel_error", c.report.max_rel_error}});
                }
            }
            emit({{"command", "gradcheck"},
                  {"module", module.empty() ? "all" : module},
                  {"cases", cases.size()},
                  {"passed", passed},
                  {"max_rel_error", worst},
                  {"failures", failures},
                  {"seconds", seconds_since(t0)}});
            return passed ? 0 : 1;
        }
    } catch (const std::exception& e) {
        emit({{"error", e.what()}});
        return 2;
    }
    return 0;
}

// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "tpunet/checkpoint.hpp"
#include "tpunet/hash.hpp"
#include "tpunet/layers.hpp"
#include "tpunet/objectives.hpp"
#include "tpunet/optim.hpp"

namespace tpunet {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

NamedTensors snapshot(const NamedTensors& params) {
    NamedTensors out;
    out.reserve(params.size());
    for (const auto& [name, t] : params) out.emplace_back(name, t.detach());
    return out;
}

std::vector<std::string> class_names(const Dataset& data) {
    std::vector<std::string> names;
    for (const auto& organ : data.config.organs) names.push_back(organ.name);
    return names;
}

// Mirrors image and mask columns in place.
void hflip_batch(Batch& batch, const std::vector<std::uint8_t>& flip) {
    for (Tensor* t : {&batch.images, &batch.masks}) {
        const std::size_t n = t->dim(0), c = t->dim(1), h = t->dim(2), w = t->dim(3);
        auto d = t->mutable_data();
        for (std::size_t b = 0; b < n; ++b) {
            if (!flip[b]) continue;
            for (std::size_t r = 0; r < c * h; ++r) {
                double* row = d.data() + (b * c * h + r) * w;
                std::reverse(row, row + w);
            }
        }
    }
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json classes_json = nlohmann::json::array();
    for (const auto& c : classes) classes_json.push_back({{"class", c.name}, {"dice", c.dice}, {"jaccard", c.jaccard}});
    return {{"run_id", run_id},
            {"variant", variant},
            {"split", split},
            {"seed", seed},
            {"config_hash", config_hash},
            {"dataset_hash", dataset_hash},
            {"classes", classes_json},
            {"mean_dice", mean_dice},
            {"mean_jaccard", mean_jaccard},
            {"best_step", best_step},
            {"loss_curve", loss_curve}};
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    for (const auto& c : classes) {
        os << run_id << ',' << variant << ',' << c.name << ',' << fmt(c.dice) << ',' << fmt(c.jaccard) << ',' << seed
           << '\n';
    }
    os << run_id << ',' << variant << ",mean," << fmt(mean_dice) << ',' << fmt(mean_jaccard) << ',' << seed << '\n';
    return os.str();
}

std::string prompt_organ(const SynthConfig& data) {
    if (data.organs.size() == 1) return data.organs.front().name;
    return "abdomen";
}

std::string prompt_for(const SampleRecord& record, const std::string& organ, bool include_time) {
    PromptSpec spec;
    spec.modality = record.modality;
    spec.organ = organ;
    spec.slice_index = record.slice_index;
    spec.slice_total = record.slice_total;
    spec.include_time = include_time;
    return render_prompt(spec);
}

std::vector<std::string> prompt_corpus(const SynthConfig& data) {
    const std::string organ = prompt_organ(data);
    std::vector<std::string> corpus;
    for (Modality m : {Modality::mri, Modality::ct}) {
        for (bool with_time : {false, true}) {
            for (int i = 1; i <= data.slices; ++i) {
                corpus.push_back(prompt_for({0, i, data.slices, m}, organ, with_time));
                if (!with_time) break;
            }
        }
    }
    return corpus;
}

std::vector<TokenSequence> batch_tokens(const SplitData& split, const std::vector<std::size_t>& indices,
                                        const RunConfig& config, const Vocabulary& vocab, const std::string& organ) {
    std::vector<TokenSequence> out;
    if (!uses_text(config.variant)) return out;
    const bool with_time = uses_timestamp(config.variant);
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        out.push_back(tokenize(prompt_for(split.records.at(i), organ, with_time), vocab, config.seq_len));
    }
    return out;
}

Batch gather_batch(const SplitData& split, const std::vector<std::size_t>& indices) {
    auto gather = [&](const Tensor& src) {
        Shape shape = src.shape();
        const std::size_t stride = src.numel() / shape[0];
        shape[0] = indices.size();
        std::vector<double> data(indices.size() * stride);
        for (std::size_t b = 0; b < indices.size(); ++b) {
            if (indices[b] >= src.dim(0)) throw DomainError("gather_batch: sample index out of range");
            std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(indices[b] * stride), stride,
                        data.begin() + static_cast<std::ptrdiff_t>(b * stride));
        }
        return Tensor::from_data(std::move(shape), std::move(data));
    };
    return {gather(split.images), gather(split.masks)};
}

std::vector<ClassScores> score_probabilities(const Tensor& probabilities, const Tensor& targets,
                                             const std::vector<std::string>& names, double threshold) {
    if (probabilities.shape() != targets.shape() || probabilities.rank() != 4) {
        throw ShapeError("score_probabilities: prediction " + shape_to_string(probabilities.shape()) +
                         " vs target " + shape_to_string(targets.shape()));
    }
    const std::size_t n = probabilities.dim(0), k = probabilities.dim(1);
    if (names.size() != k) throw ShapeError("score_probabilities: class name count differs from channel count");
    const std::size_t hw = probabilities.dim(2) * probabilities.dim(3);
    const auto pred = binarize(probabilities.data(), threshold);
    std::vector<std::uint8_t> truth(targets.numel());
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = targets.data()[i] >= 0.5 ? 1 : 0;

    std::vector<ClassScores> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        out[c].name = names[c];
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * k + c) * hw;
            const Overlap o = overlap(std::span(pred).subspan(off, hw), std::span(truth).subspan(off, hw));
            out[c].dice += o.dice;
            out[c].jaccard += o.jaccard;
        }
        if (n > 0) {
            out[c].dice /= static_cast<double>(n);
            out[c].jaccard /= static_cast<double>(n);
        }
    }
    return out;
}

MetricsReport evaluate(const TpuNet& model, const Dataset& data, const std::string& split_name,
                       const RunConfig& config, const Vocabulary& vocab) {
    const SplitData& split = data.split(split_name);
    if (split.size() == 0) throw DomainError("evaluate: split " + split_name + " is empty");
    if (data.num_classes() != config.num_classes) throw ShapeError("evaluate: class count differs from the dataset");
    const std::string organ = prompt_organ(data.config);
    NoGradGuard no_grad;

    std::vector<double> probs;
    probs.reserve(split.masks.numel());
    const std::size_t chunk = static_cast<std::size_t>(std::max(1, config.batch_size));
    for (std::size_t start = 0; start < split.size(); start += chunk) {
        std::vector<std::size_t> idx(std::min(chunk, split.size() - start));
        std::iota(idx.begin(), idx.end(), start);
        const Batch batch = gather_batch(split, idx);
        const Tensor p = sigmoid(model.forward(batch.images, batch_tokens(split, idx, config, vocab, organ)).logits);
        probs.insert(probs.end(), p.data().begin(), p.data().end());
    }
    const Tensor all = Tensor::from_data(split.masks.shape(), std::move(probs));

    MetricsReport report;
    report.run_id = config.run_id;
    report.variant = std::string(variant_name(config.variant));
    report.split = split_name;
    report.seed = config.seed;
    report.config_hash = config.hash();
    report.dataset_hash = data.hash;
    report.classes = score_probabilities(all, split.masks, class_names(data), config.threshold);
    for (const auto& c : report.classes) {
        report.mean_dice += c.dice;
        report.mean_jaccard += c.jaccard;
    }
    report.mean_dice /= static_cast<double>(report.classes.size());
    report.mean_jaccard /= static_cast<double>(report.classes.size());
    return report;
}

TrainResult train(const RunConfig& config, const Dataset& data, const std::optional<std::filesystem::path>& out_dir) {
    config.validate();
    if (data.num_classes() != config.num_classes) {
        throw ShapeError("train: config has " + std::to_string(config.num_classes) + " classes, dataset has " +
                         std::to_string(data.num_classes()));
    }
    if (data.train.size() == 0 || data.val.size() == 0) throw DomainError("train: empty train or val split");
    const auto started = std::chrono::steady_clock::now();

    TrainResult result;
    result.vocab = build_vocabulary(prompt_corpus(data.config));
    const std::string organ = prompt_organ(data.config);
    TpuNet model(config, result.vocab.size());
    const NamedTensors params = model.parameters();
    Adam adam(params);

    const TverskyOptions tv{config.tversky_alpha, config.tversky_beta, 1.0};
    const bool contrastive = uses_contrastive(config.variant) && config.beta > 0.0;
    const double lr_min = config.lr0 * config.lr_min_ratio;

    std::mt19937_64 rng(derive_seed(config.seed, "train.shuffle"));
    std::mt19937_64 flip_rng(derive_seed(config.seed, "train.hflip"));
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    std::vector<double> curve;
    std::ostringstream loss_csv;
    loss_csv << "step,lr,loss,seg,contrastive\n";
    std::ostringstream val_csv;
    val_csv << "step,val_mean_dice\n";
    int best_step = -1;

    auto run_validation = [&](int step) {
        const MetricsReport val = evaluate(model, data, "val", config, result.vocab);
        val_csv << step << ',' << fmt(val.mean_dice) << '\n';
        if (val.mean_dice > result.best_val_dice) {
            result.best_val_dice = val.mean_dice;
            result.best_params = snapshot(params);
            best_step = step;
        }
    };

    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    for (int step = 0; step < config.steps; ++step) {
        std::vector<std::size_t> idx;
        while (idx.size() < bs) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            idx.push_back(order[cursor++]);
        }
        Batch batch = gather_batch(data.train, idx);
        if (config.hflip) {
            std::bernoulli_distribution coin(0.5);
            std::vector<std::uint8_t> flip(bs);
            for (auto& f : flip) f = coin(flip_rng) ? 1 : 0;
            hflip_batch(batch, flip);
        }
        const auto out = model.forward(batch.images, batch_tokens(data.train, idx, config, result.vocab, organ));

        const bool warmup = contrastive && step < config.align_warmup_steps;
        Tensor seg;
        Tensor con;
        Tensor loss;
        if (!warmup) {
            seg = seg_loss(sigmoid(out.logits), batch.masks, tv);
            loss = seg;
        }
        if (contrastive) {
            con = contrastive_loss({out.image_vecs, out.text_vecs, config.tau, config.lambda});
            loss = warmup ? con : add(loss, scale(con, config.beta));
        }
        adam.zero_grad();
        loss.backward();
        const double lr = cosine_lr(step, config.steps, config.lr0, lr_min);
        adam.step(lr, config.weight_decay);

        curve.push_back(loss.item());
        loss_csv << step << ',' << fmt(lr) << ',' << fmt(loss.item()) << ',' << (seg.defined() ? fmt(seg.item()) : "")
                 << ',' << (con.defined() ? fmt(con.item()) : "") << '\n';

        if ((step + 1) % config.eval_every == 0) run_validation(step + 1);
    }
    // the final weights are always a candidate
    if (config.steps % config.eval_every != 0) run_validation(config.steps);

    model.load(result.best_params);
    result.report = evaluate(model, data, "test", config, result.vocab);
    result.report.best_step = best_step;
    result.report.loss_curve = curve;
    result.report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        write_text(*out_dir / "config.json", config.to_json().dump(2) + "\n");
        write_text(*out_dir / "vocab.json", result.vocab.to_json().dump() + "\n");
        save_checkpoint(*out_dir / "best.ckpt", result.best_params);
        write_text(*out_dir / "loss.csv", loss_csv.str());
        write_text(*out_dir / "val.csv", val_csv.str());
        write_text(*out_dir / "metrics.json", result.report.to_json().dump(2) + "\n");
        write_text(*out_dir / "metrics.csv", std::string(kMetricsCsvHeader) + "\n" + result.report.to_csv());
        const nlohmann::json timing{{"run_id", config.run_id},
                                    {"wall_clock_seconds", result.report.wall_clock_seconds},
                                    {"steps", config.steps}};
        write_text(*out_dir / "timing.json", timing.dump(2) + "\n");
    }
    return result;
}

MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const Dataset& data,
                                  const std::string& split) {
    const auto dir = checkpoint.parent_path();
    const RunConfig config = RunConfig::from_json(read_json(dir / "config.json"));
    const Vocabulary vocab = Vocabulary::from_json(read_json(dir / "vocab.json"));
    TpuNet model(config, vocab.size());
    model.load(load_checkpoint(checkpoint));
    return evaluate(model, data, split, config, vocab);
}

std::vector<std::filesystem::path> export_maps(const std::filesystem::path& checkpoint, const Dataset& data,
                                               const std::string& split, std::size_t index,
                                               const std::filesystem::path& out_dir) {
    const auto dir = checkpoint.parent_path();
    const RunConfig config = RunConfig::from_json(read_json(dir / "config.json"));
    const Vocabulary vocab = Vocabulary::from_json(read_json(dir / "vocab.json"));
    TpuNet model(config, vocab.size());
    model.load(load_checkpoint(checkpoint));
    const SplitData& part = data.split(split);
    if (index >= part.size()) {
        throw DomainError("export_maps: index " + std::to_string(index) + " outside " + split + " split of " +
                          std::to_string(part.size()));
    }
    NoGradGuard no_grad;
    const std::vector<std::size_t> idx{index};
    const Batch batch = gather_batch(part, idx);
    const Tensor probs = sigmoid(model.forward(batch.images, batch_tokens(part, idx, config, vocab, prompt_organ(data.config))).logits);
    const auto hard = binarize(probs.data(), config.threshold);
    std::vector<double> hard_values(hard.begin(), hard.end());
    const Tensor pred = Tensor::from_data(probs.shape(), std::move(hard_values));

    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written{out_dir / "image.pgm"};
    write_pgm(batch.images, 0, 0, written.back());
    const auto names = class_names(data);
    for (std::size_t k = 0; k < names.size(); ++k) {
        for (const auto& [suffix, maps] : {std::pair{"_prob.pgm", &probs}, {"_pred.pgm", &pred}, {"_mask.pgm", &batch.masks}}) {
            written.push_back(out_dir / (names[k] + suffix));
            write_pgm(*maps, 0, k, written.back());
        }
    }
    return written;
}

double median(std::vector<double> values) {
    if (values.empty()) throw DomainError("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

const AblationRow& AblationTable::row(Variant variant) const {
    for (const auto& r : rows) {
        if (r.variant == variant) return r;
    }
    throw DomainError("ablation table has no row for " + std::string(variant_name(variant)));
}

std::string AblationTable::to_csv() const {
    std::ostringstream os;
    os << "variant";
    if (!rows.empty()) {
        for (const auto& c : rows.front().median_classes) os << ',' << c.name << "_dice," << c.name << "_jaccard";
    }
    os << ",mean_dice,mean_jaccard\n";
    for (const auto& r : rows) {
        os << variant_name(r.variant);
        for (const auto& c : r.median_classes) os << ',' << fmt(c.dice) << ',' << fmt(c.jaccard);
        os << ',' << fmt(r.median_dice) << ',' << fmt(r.median_jaccard) << '\n';
    }
    return os.str();
}

AblationTable run_ablation(const RunConfig& base, const Dataset& data, const std::vector<std::uint64_t>& seeds,
                           const std::optional<std::filesystem::path>& runs_dir) {
    if (seeds.empty()) throw DomainError("run_ablation: no seeds");
    AblationTable table;
    table.seeds = seeds;
    for (Variant v : kAllVariants) {
        AblationRow row;
        row.variant = v;
        for (std::uint64_t seed : seeds) {
            RunConfig cfg = base;
            cfg.variant = v;
            cfg.seed = seed;
            cfg.run_id = std::string(variant_name(v)) + "_s" + std::to_string(seed);
            std::optional<std::filesystem::path> dir;
            if (runs_dir) dir = *runs_dir / cfg.run_id;
            row.runs.push_back(train(cfg, data, dir).report);
        }
        const std::size_t k = row.runs.front().classes.size();
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> d, j;
            for (const auto& r : row.runs) {
                d.push_back(r.classes[c].dice);
                j.push_back(r.classes[c].jaccard);
            }
            row.median_classes.push_back({row.runs.front().classes[c].name, median(d), median(j)});
        }
        std::vector<double> md, mj;
        for (const auto& r : row.runs) {
            md.push_back(r.mean_dice);
            mj.push_back(r.mean_jaccard);
        }
        row.median_dice = median(md);
        row.median_jaccard = median(mj);
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace tpunet

// Ad-hoc timing and learning-rate probe; not part of the test suite.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "tpunet/training.hpp"

using namespace tpunet;

int main(int argc, char** argv) {
    const auto data = generate_samples(default_synth_config());
    RunConfig c;
    c.steps = argc > 1 ? std::atoi(argv[1]) : 20;
    if (argc > 2) c.lr0 = std::atof(argv[2]);
    if (argc > 3) c.variant = parse_variant(argv[3]);
    c.eval_every = argc > 4 ? std::atoi(argv[4]) : c.steps;
    if (argc > 5) c.seed = std::strtoull(argv[5], nullptr, 10);
    const std::string out = argc > 6 ? argv[6] : "/tmp/bench_run";
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = train(c, data, out);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%.1fs (%.3f s/step) best val %.4f at %d, test dice %.4f\n", s, s / c.steps, r.best_val_dice,
                r.report.best_step, r.report.mean_dice);
    for (const auto& k : r.report.classes) std::printf("  %s %.4f %.4f\n", k.name.c_str(), k.dice, k.jaccard);
    std::ifstream val(out + "/val.csv");
    std::cout << val.rdbuf();
}

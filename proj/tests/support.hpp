#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tsenas/curves.hpp"
#include "tsenas/rng.hpp"
#include "tsenas/toytrain.hpp"

namespace tsenas::testing {

/// Random curve with losses in (0, 3), validation data and a test accuracy.
inline LearningCurve random_curve(Rng& rng, int t_end, int batches, bool with_val_loss = true) {
    std::vector<std::vector<double>> losses(static_cast<std::size_t>(t_end));
    std::vector<double> val_loss;
    std::vector<double> val_acc;
    for (auto& epoch : losses) {
        for (int b = 0; b < batches; ++b) {
            epoch.push_back(3.0 * rng.uniform());
        }
        val_loss.push_back(2.0 * rng.uniform());
        val_acc.push_back(rng.uniform());
    }
    std::optional<std::vector<double>> vl;
    if (with_val_loss) {
        vl = val_loss;
    }
    return LearningCurve(std::move(losses), std::move(vl), std::move(val_acc), rng.uniform());
}

/// Curve with geometric loss decay at `rate` plus noise; faster decay means
/// higher test accuracy.
inline LearningCurve decaying_curve(Rng& rng, int t_end, int batches, double rate, double test_acc, double noise) {
    std::vector<std::vector<double>> losses(static_cast<std::size_t>(t_end));
    std::vector<double> val_loss;
    std::vector<double> val_acc;
    for (int t = 0; t < t_end; ++t) {
        const double level = 2.0 * std::exp(-rate * (t + 1));
        for (int b = 0; b < batches; ++b) {
            losses[static_cast<std::size_t>(t)].push_back(level * (1.0 + noise * rng.uniform()));
        }
        val_loss.push_back(level * 1.1);
        val_acc.push_back(std::min(1.0, test_acc * (1.0 - std::exp(-rate * (t + 1)))));
    }
    return LearningCurve(std::move(losses), std::move(val_loss), std::move(val_acc), test_acc);
}

/// Tabular benchmark over a full categorical grid. Test accuracy grows with
/// `weights` . encoding; curves decay faster for better architectures.
inline BenchmarkDataset grid_benchmark(const std::vector<int>& domain_sizes, const std::vector<double>& weights,
                                       std::uint64_t seed, int t_end = 12, int batches = 4, int n_seeds = 2) {
    Rng rng(seed);
    BenchmarkDataset bench;
    bench.meta = {"grid", t_end, batches, "synthetic"};
    std::vector<int> enc(domain_sizes.size(), 0);
    double max_quality = 0.0;
    for (std::size_t p = 0; p < domain_sizes.size(); ++p) {
        max_quality += weights[p] * (domain_sizes[p] - 1);
    }
    while (true) {
        double quality = 0.0;
        for (std::size_t p = 0; p < enc.size(); ++p) {
            quality += weights[p] * enc[p];
        }
        quality /= max_quality;
        ArchitectureRecord record;
        record.arch_id = "a";
        for (int v : enc) {
            record.arch_id += fmt::format("-{}", v);
        }
        record.encoding = enc;
        for (int s = 0; s < n_seeds; ++s) {
            const double acc = 0.5 + 0.4 * quality + 0.002 * rng.uniform();
            record.seeds.emplace(s, decaying_curve(rng, t_end, batches, 0.05 + 0.3 * quality, acc, 0.05));
        }
        bench.records.push_back(std::move(record));
        std::size_t p = enc.size();
        while (p > 0) {
            --p;
            if (++enc[p] < domain_sizes[p]) {
                break;
            }
            enc[p] = 0;
            if (p == 0) {
                bench.validate();
                return bench;
            }
        }
    }
}

inline SyntheticDataset small_dataset(std::uint64_t seed, double difficulty = 0.5) {
    SyntheticDataConfig cfg;
    cfg.dim = 4;
    cfg.classes = 3;
    cfg.clusters_per_class = 1;
    cfg.n_train = 64;
    cfg.n_val = 20;
    cfg.n_test = 40;
    cfg.difficulty = difficulty;
    cfg.seed = seed;
    return make_synthetic_dataset(cfg);
}

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

}  // namespace tsenas::testing

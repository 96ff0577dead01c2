// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "support.hpp"
#include "tsenas/config.hpp"
#include "tsenas/diffnas.hpp"
#include "tsenas/estimators.hpp"
#include "tsenas/search.hpp"
#include "tsenas/stats.hpp"
#include "tsenas/toytrain.hpp"

using namespace tsenas;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

const fs::path kConfigs = fs::path(TSENAS_SOURCE_DIR) / "configs";

unsigned worker_count() {
    return std::max(1u, std::thread::hardware_concurrency());
}

Outcome estimator_identities() {
    const auto start = Clock::now();
    Rng rng(101);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const int t_end = 2 + static_cast<int>(rng.below(30));
        const auto c = testing::random_curve(rng, t_end, 1 + static_cast<int>(rng.below(20)));
        const auto sums = epoch_sums(c);
        for (int T = 1; T <= t_end; ++T) {
            const double full = tse(c, T);
            worst = std::max(worst, std::abs(tse_e(c, T, T) - full));
            worst = std::max(worst, std::abs(tse_ema(c, T, 1.0) - full));
            if (T > 1) {
                worst = std::max(worst, std::abs(full - tse(c, T - 1) - sums[static_cast<std::size_t>(T - 1)]));
            }
            for (int E = 1; E < T; ++E) {
                worst = std::max(worst, std::abs(tse_e(c, T, E) - (full - tse(c, T - E))));
            }
        }
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-12 && elapsed < 5.0,
            fmt::format("max deviation {:.3g} over 1000 curves, {:.2f} s", worst, elapsed)};
}

std::vector<std::size_t> argsort(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return idx;
}

Outcome ranking_invariance() {
    Rng rng(202);
    int failures = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const double lambda = std::exp(rng.uniform(-4, 4));
        const int T = 1 + static_cast<int>(rng.below(8));
        const int n = 2 + static_cast<int>(rng.below(30));
        std::vector<double> s1[3];
        std::vector<double> s2[3];
        for (int i = 0; i < n; ++i) {
            const auto c = testing::random_curve(rng, 8, 1 + static_cast<int>(rng.below(6)), false);
            auto losses = c.minibatch_train_losses();
            for (auto& e : losses) {
                for (auto& l : e) {
                    l *= lambda;
                }
            }
            const LearningCurve scaled(losses, std::nullopt, {}, c.final_test_acc());
            const int E = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(T)));
            s1[0].push_back(tse(c, T));
            s2[0].push_back(tse(scaled, T));
            s1[1].push_back(tse_e(c, T, E));
            s2[1].push_back(tse_e(scaled, T, E));
            s1[2].push_back(tse_ema(c, T, defaults::ema_gamma));
            s2[2].push_back(tse_ema(scaled, T, defaults::ema_gamma));
        }
        for (int k = 0; k < 3; ++k) {
            if (argsort(s1[k]) != argsort(s2[k])) {
                ++failures;
            }
        }
    }
    return {failures == 0, fmt::format("{} argsort mismatches in 200 trials x 3 scores", failures)};
}

double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto avg_ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double below = 0;
            double equal = 0;
            for (std::size_t j = 0; j < v.size(); ++j) {
                below += v[j] < v[i] ? 1 : 0;
                equal += (j != i && v[j] == v[i]) ? 1 : 0;
            }
            r[i] = 1 + below + equal / 2;
        }
        return r;
    };
    const auto rx = avg_ranks(x);
    const auto ry = avg_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0;
    double sxx = 0;
    double syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

Outcome spearman_oracle() {
    double worst = 0;
    int permutations = 0;
    for (std::size_t n = 2; n <= 6; ++n) {
        std::vector<double> base(n);
        std::iota(base.begin(), base.end(), 1.0);
        auto perm = base;
        do {
            double d2 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                d2 += (base[i] - perm[i]) * (base[i] - perm[i]);
            }
            const double closed = 1 - 6 * d2 / (static_cast<double>(n) * (static_cast<double>(n * n) - 1));
            worst = std::max(worst, std::abs(spearman(base, perm) - closed));
            ++permutations;
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
    Rng rng(303);
    int tied = 0;
    while (tied < 500) {
        const std::size_t n = 2 + rng.below(7);
        std::vector<double> x(n);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng.below(3));
            y[i] = static_cast<double>(rng.below(4));
        }
        auto varied = [](const std::vector<double>& v) {
            return std::any_of(v.begin(), v.end(), [&](double a) { return a != v.front(); });
        };
        if (!varied(x) || !varied(y)) {
            continue;
        }
        worst = std::max(worst, std::abs(spearman(x, y) - oracle_spearman(x, y)));
        ++tied;
    }
    return {worst <= 1e-12,
            fmt::format("{} permutations + {} tied sequences, max deviation {:.3g}", permutations, tied, worst)};
}

Outcome pac_bayes() {
    const double zero = pac_bayes_bound(0.0, 10, 0.0, 1.0, 1.0);
    const double c = 1.0 / (1.0 - std::exp(-1.0));
    const double half = pac_bayes_bound(10 * std::log(2.0), 10, 0.0, 1.0, 1.0);
    bool ok = std::abs(zero) <= 1e-12 && std::abs(half - c / 2) <= 1e-12;
    Rng rng(404);
    int violations = 0;
    for (int s = 0; s < 100; ++s) {
        const double a = rng.uniform(0, 1);
        const double b = a + rng.uniform(0.05, 5);
        const double delta = rng.uniform(1e-3, 1);
        const long long n = 1 + static_cast<long long>(rng.below(5000));
        double prev = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < 20; ++k) {
            const double sum = static_cast<double>(n) * (a + 0.25 * k * (b - a));
            const double v = pac_bayes_bound(sum, n, a, b, delta);
            if (!(v > prev)) {
                ++violations;
            }
            prev = v;
        }
    }
    ok = ok && violations == 0;
    return {ok, fmt::format("bound(0)={:.3g}, bound(n ln2)={:.15f} vs c/2={:.15f}, {} monotonicity violations",
                            zero, half, c / 2, violations)};
}

LearningCurve planted(int t_end, int cross) {
    std::vector<std::vector<double>> losses;
    for (int t = 1; t <= t_end; ++t) {
        const double level = t < cross ? 0.4 + 1.0 / t : 0.05;
        losses.push_back({level, level});
    }
    return LearningCurve(std::move(losses), std::nullopt, {}, 0.5);
}

Outcome algorithm_one() {
    const std::vector<LearningCurve> crossing{planted(200, 50), planted(200, 80), planted(200, 120)};
    const std::vector<LearningCurve> never{planted(200, 999), planted(200, 500)};
    const std::vector<LearningCurve> immediate{planted(200, 1), planted(200, 60)};
    const int a = effective_budget(crossing, defaults::overfit_threshold, 200);
    const int b = effective_budget(never, defaults::overfit_threshold, 200);
    const int c = effective_budget(immediate, defaults::overfit_threshold, 200);
    return {a == 45 && b == 180 && c == 1, fmt::format("crossings {{50,80,120}} -> {}, none -> {}, epoch 1 -> {}", a, b, c)};
}

Outcome trainer_checks() {
    SyntheticDataConfig dc{6, 3, 2, 96, 20, 40, 0.6, 505};
    const auto data = make_synthetic_dataset(dc);
    const std::vector<int> widths{3, 5};
    const std::vector<int> depths{1, 2, 3};
    const std::vector<Activation> acts{Activation::relu, Activation::tanh};
    const auto space = enumerate_toy_space(widths, depths, acts);
    Rng rng(506);
    std::vector<std::size_t> rows(24);
    std::iota(rows.begin(), rows.end(), 0);
    double worst = 0;
    int probes = 0;
    for (int k = 0; k < 24; ++k) {
        const auto& arch = space[rng.below(space.size())];
        const Mlp net(arch, dc.dim, dc.classes);
        auto params = net.init_parameters(rng);
        std::vector<double> grad(params.size());
        net.loss_and_gradient(params, data.train, rows, grad);
        const std::size_t i = rng.below(params.size());
        const double h = 1e-5;
        const double saved = params[i];
        params[i] = saved + h;
        const double up = net.loss(params, data.train, rows);
        params[i] = saved - h;
        const double down = net.loss(params, data.train, rows);
        worst = std::max(worst, testing::relative_error(grad[i], (up - down) / (2 * h)));
        ++probes;
    }
    TrainConfig cfg{5, 16, 0.1, LrSchedule::cosine, 0.9, 5e-4, 507};
    const std::vector<int> seeds{0, 1};
    const auto serial = build_toy_benchmark(space, data, cfg, seeds, 1, "det");
    const auto rerun = build_toy_benchmark(space, data, cfg, seeds, 1, "det");
    const auto parallel = build_toy_benchmark(space, data, cfg, seeds, std::max(2u, worker_count()), "det");
    const bool same = serialize_benchmark(serial) == serialize_benchmark(rerun) &&
                      serialize_benchmark(serial) == serialize_benchmark(parallel);
    return {worst < 1e-4 && probes >= 20 && same,
            fmt::format("{} probes, max relative error {:.3g}; reruns and job counts bit-identical: {}", probes,
                        worst, same ? "yes" : "no")};
}

Outcome diffnas_checks() {
    const auto cfg = DiffNasRunConfig::from_json(read_config_json(kConfigs / "diffnas_default.json"));
    const auto data = make_synthetic_dataset(cfg.data_config());
    auto run = cfg.run_config(0);
    Rng rng(derive_seed(run.seed, "cell"));
    const auto cell = ToyCell::create(cfg.nodes, cfg.data.dim, cfg.data.classes, cfg.menu_ops(), rng);

    const auto tse_trace = darts_tse_run(cell, data, run);
    const auto darts_trace = darts_run(cell, data, run);
    const long long bt = static_cast<long long>(cfg.data.n_train / cfg.batch_size) * cfg.epochs;
    const double deviation = std::max(tse_trace.max_softmax_deviation, darts_trace.max_softmax_deviation);
    bool counts = tse_trace.alpha_updates == bt / cfg.K && tse_trace.weight_updates == bt;

    // Non-dividing window.
    auto odd = run;
    odd.K = 37;
    odd.epochs = 2;
    const auto odd_trace = darts_tse_run(cell, data, odd);
    const long long odd_bt = static_cast<long long>(cfg.data.n_train / cfg.batch_size) * 2;
    counts = counts && odd_trace.alpha_updates == odd_bt / 37 && odd_trace.weight_updates == odd_bt;

    // Alpha gradient against central differences at a perturbed point.
    auto probe_cell = tse_trace.final_cell;
    Rng prng(606);
    std::vector<std::size_t> rows(64);
    std::iota(rows.begin(), rows.end(), 0);
    const auto g = cell_loss_and_gradients(probe_cell, data.val, rows);
    double worst_fd = 0;
    for (int k = 0; k < 10; ++k) {
        const std::size_t e = prng.below(probe_cell.alpha.size());
        const std::size_t o = prng.below(probe_cell.menu.size());
        const double h = 1e-5;
        auto up = probe_cell;
        up.alpha[e][o] += h;
        auto down = probe_cell;
        down.alpha[e][o] -= h;
        const double numeric = (cell_loss(up, data.val, rows) - cell_loss(down, data.val, rows)) / (2 * h);
        worst_fd = std::max(worst_fd, testing::relative_error(g.alpha[e][o], numeric));
    }

    // Frozen weights: the accumulated alpha gradient equals K times the
    // gradient of the mean loss over the concatenated window.
    auto frozen = run;
    frozen.lr_weights = 0.0;
    frozen.epochs = 2;
    frozen.capture_windows = true;
    const auto frozen_trace = darts_tse_run(cell, data, frozen);
    double worst_linear = 0;
    for (const auto& window : frozen_trace.windows) {
        ToyCell at = cell;
        at.weights = window.weights_at_start;
        at.alpha = window.alpha;
        std::vector<std::size_t> all;
        for (const auto& b : window.batches) {
            all.insert(all.end(), b.begin(), b.end());
        }
        const auto whole = cell_loss_and_gradients(at, data.train, all);
        for (std::size_t e = 0; e < whole.alpha.size(); ++e) {
            for (std::size_t o = 0; o < whole.alpha[e].size(); ++o) {
                worst_linear = std::max(worst_linear,
                                        std::abs(window.accumulated[e][o] - frozen.K * whole.alpha[e][o]));
            }
        }
    }
    const bool ok = deviation <= 1e-12 && worst_fd < 1e-4 && worst_linear <= 1e-10 && counts;
    return {ok, fmt::format("softmax deviation {:.3g}; alpha FD rel. error {:.3g}; frozen-w linearity {:.3g}; "
                            "alpha updates {} (BT={}, K={}), {} with K=37 (BT={})",
                            deviation, worst_fd, worst_linear, tse_trace.alpha_updates, bt, cfg.K,
                            odd_trace.alpha_updates, odd_bt)};
}

const BenchmarkDataset& toy_benchmark() {
    static const BenchmarkDataset bench = [] {
        const auto cfg = ToyConfig::from_json(read_config_json(kConfigs / "toy_default.json"));
        const auto start = Clock::now();
        const auto space = cfg.space.enumerate();
        const auto data = make_synthetic_dataset(cfg.data_config());
        auto b = build_toy_benchmark(space, data, cfg.train_config(), cfg.seeds, worker_count(), cfg.name);
        std::cout << fmt::format("      (generated {} archs x {} seeds, t_end={}, in {:.1f} s)\n", b.records.size(),
                                 cfg.seeds.size(), b.meta.t_end, seconds_since(start));
        return b;
    }();
    return bench;
}

Outcome directional() {
    const auto& bench = toy_benchmark();
    auto rho = [&](const std::string& text) {
        const auto r = evaluate_rank_correlation(bench, EstimatorSpec::parse(text));
        return r.available ? r.mean.rho : std::nan("");
    };
    const double ema10 = rho("tse-ema@T=10");
    const double ema2 = rho("tse-ema@T=2");
    const double vacc10 = rho("vacc-es@T=10");
    const bool beats_vacc = ema10 >= vacc10 - 0.05;
    const bool grows = ema10 >= ema2 - 0.05;
    return {bench.records.size() == 32 && ema10 >= 0.3,
            fmt::format("rho TSE-EMA@10={:.3f}, VAccES@10={:.3f}, TSE-EMA@2={:.3f}; TSE-EMA@10 >= VAccES@10-0.05: "
                        "{}; TSE-EMA@10 >= TSE-EMA@2-0.05: {}",
                        ema10, vacc10, ema2, beats_vacc ? "yes" : "no", grows ? "yes" : "no")};
}

Outcome search_harness() {
    const auto& bench = toy_benchmark();
    const auto start = Clock::now();
    double optimum = 0;
    for (const auto& r : bench.records) {
        optimum = std::max(optimum, r.mean_test_acc());
    }
    const auto gt = Evaluator::ground_truth();
    const double exhaustive = static_cast<double>(bench.records.size()) * gt.cost_per_query(bench);
    const auto rs = random_search(bench, gt, exhaustive, 1);
    const bool exact = rs.final_best_true_test_acc() == optimum;

    const auto ev = Evaluator::parse("tse-ema@T=10");
    std::vector<double> finals;
    for (int i = 0; i < 20; ++i) {
        const auto seed = derive_seed(2021, "search", static_cast<std::uint64_t>(i));
        finals.push_back(regularized_evolution(bench, ev, 0.25 * exhaustive, defaults::n_init,
                                               defaults::re_sample_size, seed)
                             .final_best_true_test_acc());
    }
    std::sort(finals.begin(), finals.end());
    const double median = 0.5 * (finals[9] + finals[10]);
    const double elapsed = seconds_since(start);
    return {exact && optimum - median <= 0.01 && elapsed < 120,
            fmt::format("exhaustive RS best {:.4f} vs optimum {:.4f}; RE median over 20 seeds {:.4f} (gap {:.4f}); "
                        "{:.2f} s",
                        rs.final_best_true_test_acc(), optimum, median, optimum - median, elapsed)};
}

Outcome config_defaults() {
    const auto rank = RankevalConfig::from_json(read_config_json(kConfigs / "rankeval_default.json"));
    int E = -1;
    double gamma = -1;
    for (const auto& text : rank.estimators) {
        const auto spec = EstimatorSpec::parse(text);
        if (spec.kind == EstimatorKind::tse_e) {
            E = spec.E;
        } else if (spec.kind == EstimatorKind::tse_ema) {
            gamma = spec.gamma;
        }
    }
    const double threshold = BudgetConfig::from_json(read_config_json(kConfigs / "budget_default.json")).threshold;
    const int n_init = SearchConfig::from_json(read_config_json(kConfigs / "search_default.json")).n_init;
    const int K = DiffNasRunConfig::from_json(read_config_json(kConfigs / "diffnas_default.json")).K;
    const bool shipped = E == 1 && gamma == 0.999 && threshold == 0.1 && n_init == 10 && K == 100;
    const bool built_in = defaults::window_E == 1 && defaults::ema_gamma == 0.999 &&
                          defaults::overfit_threshold == 0.1 && defaults::n_init == 10 &&
                          defaults::tse_window_K == 100;
    return {shipped && built_in, fmt::format("shipped configs: E={}, gamma={}, threshold={}, n_init={}, K={}; "
                                             "built-in defaults agree: {}",
                                             E, gamma, threshold, n_init, K, built_in ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"estimator identity suite", estimator_identities},
        {"ranking invariance under loss scaling", ranking_invariance},
        {"spearman oracle", spearman_oracle},
        {"pac-bayes bound", pac_bayes},
        {"effective training budget", algorithm_one},
        {"trainer gradient check and determinism", trainer_checks},
        {"differentiable search checks", diffnas_checks},
        {"desk-scale directional experiment", directional},
        {"search harness", search_harness},
        {"config defaults", config_defaults},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome outcome;
        try {
            outcome = check();
        } catch (const std::exception& e) {
            outcome = {false, fmt::format("threw: {}", e.what())};
        }
        failures += outcome.pass ? 0 : 1;
        std::cout << fmt::format("{} {}: {}\n", outcome.pass ? "PASS" : "FAIL", name, outcome.detail) << std::flush;
    }
    std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
    return failures;
}

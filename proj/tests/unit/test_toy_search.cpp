#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "tsenas/config.hpp"
#include "tsenas/search.hpp"
#include "tsenas/toytrain.hpp"

using namespace tsenas;

namespace {

const BenchmarkDataset& shipped_toy() {
    static const BenchmarkDataset bench = [] {
        const auto path = std::filesystem::path(TSENAS_SOURCE_DIR) / "configs" / "toy_default.json";
        const auto cfg = ToyConfig::from_json(read_config_json(path));
        const auto data = make_synthetic_dataset(cfg.data_config());
        return build_toy_benchmark(cfg.space.enumerate(), data, cfg.train_config(), cfg.seeds, std::max(1u, std::thread::hardware_concurrency()), cfg.name);
    }();
    return bench;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("toy benchmark: evolution matches or beats random search at 20 queries") {
    const auto& bench = shipped_toy();
    REQUIRE(bench.records.size() == 32);
    const auto gt = Evaluator::ground_truth();
    const double budget = 20 * gt.cost_per_query(bench);
    std::vector<double> re;
    std::vector<double> rs;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto seed = derive_seed(5, "search", i);
        re.push_back(regularized_evolution(bench, gt, budget, defaults::n_init, defaults::re_sample_size, seed)
                         .final_best_true_test_acc());
        rs.push_back(random_search(bench, gt, budget, seed).final_best_true_test_acc());
    }
    CHECK(median(re) >= median(rs));
}

TEST_CASE("toy benchmark: early-stopped train loss reaches accuracy levels no later than final val acc") {
    const auto& bench = shipped_toy();
    const auto gt = Evaluator::ground_truth();
    const double budget = 0.25 * static_cast<double>(bench.records.size()) * gt.cost_per_query(bench);
    const auto tse = Evaluator::parse("tse-ema@T=10");
    const auto vacc = Evaluator::parse(fmt::format("vacc-es@T={}", bench.meta.t_end));
    const int population = static_cast<int>(budget / vacc.cost_per_query(bench));
    std::vector<SearchTrace> tse_traces;
    std::vector<SearchTrace> vacc_traces;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto seed = derive_seed(6, "search", i);
        tse_traces.push_back(regularized_evolution(bench, tse, budget, defaults::n_init, defaults::re_sample_size, seed));
        vacc_traces.push_back(
            regularized_evolution(bench, vacc, budget, population, defaults::re_sample_size, seed));
    }
    auto median_cost = [](const std::vector<SearchTrace>& traces, double level) {
        std::vector<double> costs;
        for (const auto& t : traces) {
            costs.push_back(t.cost_to_reach(level).value_or(std::numeric_limits<double>::infinity()));
        }
        return median(costs);
    };
    for (const auto& record : bench.records) {
        const double level = record.mean_test_acc();
        const double v = median_cost(vacc_traces, level);
        if (std::isfinite(v)) {
            CHECK(median_cost(tse_traces, level) <= v);
        }
    }
}

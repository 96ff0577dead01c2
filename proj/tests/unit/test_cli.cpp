#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "tsenas/commands.hpp"
#include "tsenas/config.hpp"
#include "tsenas/errors.hpp"
#include "tsenas/estimators.hpp"
#include "tsenas/search.hpp"

using namespace tsenas;
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "tsenas_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_json(const fs::path& path, const Json& j) {
    std::ofstream(path) << j.dump(2);
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Json small_toy_config() {
    auto j = read_config_json(fs::path(TSENAS_SOURCE_DIR) / "configs" / "toy_default.json");
    j["seeds"] = {0, 1};
    j["space"]["depths"] = {1, 2, 3};
    j["space"]["widths"] = {4, 8};
    j["space"]["activations"] = {"relu"};
    j["data"]["n_train"] = 128;
    j["data"]["n_test"] = 100;
    j["train"]["epochs"] = 6;
    return j;
}

/// Small benchmark shared by the tests below, generated once.
const fs::path& toy_benchmark() {
    static const fs::path path = [] {
        const auto dir = scratch("toy");
        CommandOptions o;
        o.config = write_json(dir / "toy.json", small_toy_config());
        o.out = dir / "out";
        cmd_gen_toy(o);
        return dir / "out" / "benchmark.jsonl";
    }();
    return path;
}

int run(const std::string& command, const CommandOptions& o, std::string* err = nullptr) {
    std::ostringstream stream;
    const int code = run_command(command, o, stream);
    if (err != nullptr) {
        *err = stream.str();
    }
    return code;
}

}  // namespace

TEST_CASE("gen-toy writes a benchmark and reproduces its checksum") {
    const auto dir = scratch("gen");
    CommandOptions o;
    o.config = write_json(dir / "toy.json", small_toy_config());
    o.out = dir / "a";
    const auto first = cmd_gen_toy(o);
    o.out = dir / "b";
    o.jobs = 3;
    const auto second = cmd_gen_toy(o);
    CHECK(first.artifacts.at("benchmark.jsonl") == second.artifacts.at("benchmark.jsonl"));
    const auto bench = load_benchmark(dir / "a" / "benchmark.jsonl");
    CHECK(bench.records.size() == 6);
    CHECK(bench.meta.t_end == 6);
    CHECK(fs::exists(dir / "a" / "manifest.json"));
}

TEST_CASE("missing and unknown config fields are named") {
    const auto dir = scratch("fields");
    auto j = small_toy_config();
    j["data"].erase("n_train");
    CommandOptions o;
    o.config = write_json(dir / "missing.json", j);
    o.out = dir / "out";
    std::string err;
    CHECK(run("gen-toy", o, &err) == 1);
    CHECK(err.find("data.n_train") != std::string::npos);

    j = small_toy_config();
    j["train"]["nesterov"] = true;
    o.config = write_json(dir / "unknown.json", j);
    CHECK(run("gen-toy", o, &err) == 1);
    CHECK(err.find("train.nesterov") != std::string::npos);

    j = small_toy_config();
    j["schema"] = 2;
    o.config = write_json(dir / "schema.json", j);
    CHECK(run("gen-toy", o, &err) == 1);
    CHECK(err.find("schema") != std::string::npos);
}

TEST_CASE("numeric failures exit with code 2") {
    const auto dir = scratch("numeric");
    auto j = small_toy_config();
    j["train"]["learning_rate"] = 1e8;
    j["train"]["momentum"] = 0.0;
    CommandOptions o;
    o.config = write_json(dir / "toy.json", j);
    o.out = dir / "out";
    std::string err;
    CHECK(run("gen-toy", o, &err) == 2);
    CHECK(err.find("minibatch") != std::string::npos);
}

TEST_CASE("rankeval marks unavailable estimators and keeps going") {
    const auto dir = scratch("rankeval");
    auto bench = testing::grid_benchmark({3, 2}, {1.0, 0.5}, 4);
    for (auto& r : bench.records) {
        std::map<int, LearningCurve> seeds;
        for (const auto& [s, c] : r.seeds) {
            seeds.emplace(s, LearningCurve(c.minibatch_train_losses(), std::nullopt, c.epoch_val_acc(),
                                           c.final_test_acc()));
        }
        r.seeds = seeds;
    }
    save_benchmark(bench, dir / "bench.jsonl");
    Json j;
    j["schema"] = 1;
    j["benchmark"] = (dir / "bench.jsonl").string();
    j["estimators"] = {"sovl", "tse-ema", "tse-e@T=12,E=3"};
    j["budgets"] = {2, 12};
    CommandOptions o;
    o.config = write_json(dir / "cfg.json", j);
    o.out = dir / "out";
    o.svg = true;
    CHECK(run("rankeval", o) == 0);
    const auto table = slurp(dir / "out" / "rankeval.csv");
    CHECK(table.rfind("estimator,T,rho,n,status\n", 0) == 0);
    CHECK(table.find("sovl,2,nan,0,unavailable") != std::string::npos);
    CHECK(table.find("tse-ema:g=0.999,12,") != std::string::npos);
    CHECK(table.find("tse-e:E=3,12,") != std::string::npos);
    CHECK(slurp(dir / "out" / "scores.csv").rfind("arch_id,seed,estimator,T,score\n", 0) == 0);
    CHECK(slurp(dir / "out" / "rankeval.svg").find("<polyline") != std::string::npos);
}

TEST_CASE("budget command: full population has no variance; oversize sample fails") {
    const auto dir = scratch("budget");
    Json j;
    j["schema"] = 1;
    j["benchmark"] = toy_benchmark().string();
    j["sample_sizes"] = {2, 6};
    j["repeats"] = 5;
    j["threshold"] = 0.1;
    j["master_seed"] = 3;
    CommandOptions o;
    o.config = write_json(dir / "cfg.json", j);
    o.out = dir / "out";
    CHECK(run("budget", o) == 0);
    const auto table = slurp(dir / "out" / "budget.csv");
    CHECK(table.find("\n6,5,0.1,") != std::string::npos);
    const auto last_line = table.substr(table.rfind("\n6,"));
    CHECK(last_line.substr(last_line.rfind(',') + 1) == "0\n");

    j["sample_sizes"] = {7};
    o.config = write_json(dir / "big.json", j);
    std::string err;
    CHECK(run("budget", o, &err) == 1);
    CHECK(err.find("exceeds") != std::string::npos);
}

TEST_CASE("search command: six cells, unknown strategy, manifest replay") {
    const auto dir = scratch("search");
    auto j = read_config_json(fs::path(TSENAS_SOURCE_DIR) / "configs" / "search_default.json");
    j["benchmark"] = toy_benchmark().string();
    j["evaluators"] = {"gt", "tse-ema@T=2"};
    j["budget_fraction"] = 0.5;
    j["n_seeds"] = 3;
    j["re"]["population_size"] = 3;
    j["re"]["sample_size"] = 2;
    j["tpe"]["n_init"] = 3;
    CommandOptions o;
    o.config = write_json(dir / "cfg.json", j);
    o.out = dir / "out";
    o.svg = true;
    const auto manifest = cmd_search(o);
    std::set<std::pair<std::string, std::string>> cells;
    std::istringstream csv(slurp(dir / "out" / "search.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "strategy,evaluator,cost,mean_acc,stderr");
    while (std::getline(csv, line)) {
        const auto a = line.find(',');
        const auto b = line.find(',', a + 1);
        cells.insert({line.substr(0, a), line.substr(a + 1, b - a - 1)});
    }
    CHECK(cells.size() == 6);

    CommandOptions replay;
    replay.config = dir / "out" / "manifest.json";
    replay.out = dir / "replay";
    replay.jobs = 2;
    replay.svg = true;
    const auto again = cmd_search(replay);
    CHECK(again.artifacts == manifest.artifacts);

    j["strategies"] = {"rs", "annealing"};
    o.config = write_json(dir / "bad.json", j);
    std::string err;
    CHECK(run("search", o, &err) == 1);
    CHECK(err.find("rs") != std::string::npos);
    CHECK(err.find("tpe") != std::string::npos);
}

TEST_CASE("diffnas command and report") {
    const auto dir = scratch("diffnas");
    auto j = read_config_json(fs::path(TSENAS_SOURCE_DIR) / "configs" / "diffnas_default.json");
    j["n_seeds"] = 1;
    j["data"]["n_train"] = 320;
    j["search"]["K"] = 20;
    j["search"]["epochs"] = 2;
    j["retrain"]["epochs"] = 2;
    CommandOptions o;
    o.config = write_json(dir / "cfg.json", j);
    o.out = dir / "runs" / "diffnas";
    o.seed = 12;
    const auto manifest = cmd_diffnas(o);
    CHECK(manifest.seeds == std::vector<std::uint64_t>{12});
    CHECK(manifest.config["master_seed"] == 12);
    const auto summary = slurp(dir / "runs" / "diffnas" / "diffnas_summary.csv");
    CHECK(summary.find("darts-tse,0,2,40,") != std::string::npos);

    CommandOptions r;
    r.out = dir / "runs";
    CHECK(run("report", r) == 0);
    const auto report = slurp(dir / "runs" / "report.md");
    CHECK(report.find("## diffnas") != std::string::npos);
    CHECK(report.find("diffnas_summary.csv") != std::string::npos);
}

TEST_CASE("unknown command exits with a validation error") {
    CommandOptions o;
    std::string err;
    CHECK(run("train-everything", o, &err) == 1);
    CHECK(err.find("gen-toy") != std::string::npos);
}

TEST_CASE("shipped configs carry the published defaults") {
    const fs::path configs = fs::path(TSENAS_SOURCE_DIR) / "configs";
    CHECK(defaults::window_E == 1);
    CHECK(defaults::ema_gamma == 0.999);
    CHECK(defaults::overfit_threshold == 0.1);
    CHECK(defaults::n_init == 10);
    CHECK(defaults::tse_window_K == 100);

    const auto rank = RankevalConfig::from_json(read_config_json(configs / "rankeval_default.json"));
    bool saw_e = false;
    bool saw_ema = false;
    for (const auto& text : rank.estimators) {
        const auto spec = EstimatorSpec::parse(text);
        if (spec.kind == EstimatorKind::tse_e) {
            CHECK(spec.E == 1);
            saw_e = true;
        }
        if (spec.kind == EstimatorKind::tse_ema) {
            CHECK(spec.gamma == 0.999);
            saw_ema = true;
        }
    }
    CHECK(saw_e);
    CHECK(saw_ema);
    CHECK(BudgetConfig::from_json(read_config_json(configs / "budget_default.json")).threshold == 0.1);
    CHECK(SearchConfig::from_json(read_config_json(configs / "search_default.json")).n_init == 10);
    CHECK(DiffNasRunConfig::from_json(read_config_json(configs / "diffnas_default.json")).K == 100);
    CHECK(ToyConfig::from_json(read_config_json(configs / "toy_default.json")).space.enumerate().size() == 32);
}

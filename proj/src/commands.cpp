#include "tsenas/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "tsenas/config.hpp"
#include "tsenas/curves.hpp"
#include "tsenas/diffnas.hpp"
#include "tsenas/errors.hpp"
#include "tsenas/estimators.hpp"
#include "tsenas/parallel.hpp"
#include "tsenas/search.hpp"
#include "tsenas/stats.hpp"
#include "tsenas/svg.hpp"
#include "tsenas/toytrain.hpp"

namespace tsenas {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void note(const CommandOptions& options, const std::string& line) {
    if (options.log != nullptr) {
        *options.log << line << '\n';
    }
}

fs::path require_out(const CommandOptions& options) {
    if (options.out.empty()) {
        throw ValidationError("--out is required");
    }
    fs::create_directories(options.out);
    return options.out;
}

Json require_config(const CommandOptions& options) {
    if (options.config.empty()) {
        throw ValidationError("--config is required");
    }
    return read_config_json(options.config);
}

/// Writes `content` to dir/name and records its checksum.
void emit(RunManifest& manifest, const fs::path& dir, const std::string& name, const std::string& content) {
    const fs::path path = dir / name;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError(fmt::format("cannot write {}", path.string()));
    }
    out << content;
    out.close();
    manifest.add_artifact(dir, name);
}

RunManifest start(const std::string& command, const Json& config) {
    RunManifest manifest;
    manifest.command = command;
    manifest.config = config;
    manifest.started_at = utc_timestamp();
    return manifest;
}

RunManifest finish(RunManifest manifest, const fs::path& dir) {
    manifest.finished_at = utc_timestamp();
    manifest.write(dir);
    return manifest;
}

BenchmarkDataset open_benchmark(const CommandOptions& options, std::string& path) {
    if (options.benchmark) {
        path = *options.benchmark;
    }
    return load_benchmark(path);
}

std::string file_safe(const std::string& label) {
    std::string out;
    for (char c : label) {
        const bool plain = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                           c == '.' || c == '_';
        out += plain ? c : '_';
    }
    return out;
}

}  // namespace

RunManifest cmd_gen_toy(const CommandOptions& options) {
    auto cfg = ToyConfig::from_json(require_config(options));
    if (options.seed) {
        cfg.master_seed = *options.seed;
    }
    const auto dir = require_out(options);
    RunManifest manifest = start("gen-toy", cfg.to_json());
    manifest.seeds.push_back(cfg.master_seed);

    const auto space = cfg.space.enumerate();
    const auto data = make_synthetic_dataset(cfg.data_config());
    note(options, fmt::format("gen-toy: training {} architectures x {} seeds for {} epochs", space.size(),
                              cfg.seeds.size(), cfg.train.epochs));
    const auto bench = build_toy_benchmark(space, data, cfg.train_config(), cfg.seeds, options.jobs, cfg.name);

    emit(manifest, dir, "benchmark.jsonl", serialize_benchmark(bench));
    std::string summary = "arch_id,mean_test_acc\n";
    for (const auto& record : bench.records) {
        summary += fmt::format("{},{}\n", record.arch_id, record.mean_test_acc());
    }
    emit(manifest, dir, "summary.csv", summary);
    return finish(std::move(manifest), dir);
}

RunManifest cmd_rankeval(const CommandOptions& options) {
    auto cfg = RankevalConfig::from_json(require_config(options));
    const auto bench = open_benchmark(options, cfg.benchmark);
    const auto dir = require_out(options);
    RunManifest manifest = start("rankeval", cfg.to_json());

    std::vector<EstimatorSpec> grid;
    for (const auto& text : cfg.estimators) {
        const auto spec = EstimatorSpec::parse(text);
        if (spec.T > 0) {
            grid.push_back(spec);
            continue;
        }
        for (int T : cfg.budgets) {
            grid.push_back(spec.with_budget(T));
        }
    }

    std::string table = std::string(RankCorrelationReport::csv_header()) + ",status\n";
    std::string per_seed = "estimator,T,seed,rho\n";
    std::map<std::string, Series> lines;
    std::vector<std::string> line_order;
    for (const auto& spec : grid) {
        const auto result = evaluate_rank_correlation(bench, spec);
        if (!result.available) {
            note(options, fmt::format("rankeval: {} unavailable: {}", spec.to_string(), result.reason));
            table += fmt::format("{},{},nan,0,unavailable\n", spec.label(), spec.T);
            continue;
        }
        table += result.mean.csv_row() + ",ok\n";
        for (std::size_t i = 0; i < result.seeds.size(); ++i) {
            per_seed += fmt::format("{},{},{},{}\n", result.mean.estimator_name, result.mean.budget_T,
                                    result.seeds[i], result.per_seed_rho[i]);
        }
        const auto key = result.mean.estimator_name;
        if (lines.count(key) == 0) {
            line_order.push_back(key);
            lines[key].label = key;
        }
        lines[key].points.emplace_back(result.mean.budget_T, result.mean.rho);
    }

    std::string scores = "arch_id,seed,estimator,T,score\n";
    for (const auto& spec : grid) {
        if (spec.kind == EstimatorKind::tlmini) {
            continue;
        }
        for (const auto& record : bench.records) {
            for (const auto& [seed, curve] : record.seeds) {
                try {
                    scores += fmt::format("{},{},{},{},{}\n", record.arch_id, seed, spec.label(), spec.T,
                                          score(curve, spec));
                } catch (const ValidationError&) {
                    // Already reported as unavailable in the rank table.
                }
            }
        }
    }

    emit(manifest, dir, "rankeval.csv", table);
    emit(manifest, dir, "rankeval_per_seed.csv", per_seed);
    emit(manifest, dir, "scores.csv", scores);
    if (options.svg) {
        LineChart chart;
        chart.title = fmt::format("Rank correlation vs training budget ({})", bench.meta.name);
        chart.x_label = "training epochs T";
        chart.y_label = "Spearman rho with final test accuracy";
        for (const auto& key : line_order) {
            chart.series.push_back(lines[key]);
        }
        emit(manifest, dir, "rankeval.svg", render_svg(chart));
    }
    return finish(std::move(manifest), dir);
}

RunManifest cmd_budget(const CommandOptions& options) {
    auto cfg = BudgetConfig::from_json(require_config(options));
    if (options.seed) {
        cfg.master_seed = *options.seed;
    }
    const auto bench = open_benchmark(options, cfg.benchmark);
    const auto dir = require_out(options);
    RunManifest manifest = start("budget", cfg.to_json());
    manifest.seeds.push_back(cfg.master_seed);

    const std::size_t population = bench.records.size();
    for (int size : cfg.sample_sizes) {
        if (static_cast<std::size_t>(size) > population) {
            throw ValidationError(
                fmt::format("budget: sample size {} exceeds the population of {} architectures", size, population));
        }
    }

    std::string table = "sample_size,repeats,threshold,mean_T,stderr_T\n";
    std::string samples = "sample_size,repeat,T_effective\n";
    Series series{"mean T_effective", {}};
    for (int size : cfg.sample_sizes) {
        std::vector<double> values;
        for (int r = 0; r < cfg.repeats; ++r) {
            Rng rng(derive_seed(cfg.master_seed, fmt::format("budget-{}", size), static_cast<std::uint64_t>(r)));
            std::vector<LearningCurve> curves;
            for (std::size_t index : rng.sample_without_replacement(population, static_cast<std::size_t>(size))) {
                for (const auto& [seed, curve] : bench.records[index].seeds) {
                    curves.push_back(curve);
                }
            }
            const int t = effective_budget(curves, cfg.threshold, bench.meta.t_end);
            values.push_back(t);
            samples += fmt::format("{},{},{}\n", size, r, t);
        }
        const auto agg = aggregate(values);
        table += fmt::format("{},{},{},{},{}\n", size, cfg.repeats, cfg.threshold, agg.mean, agg.stderr_);
        series.points.emplace_back(size, agg.mean);
    }

    emit(manifest, dir, "budget.csv", table);
    emit(manifest, dir, "budget_samples.csv", samples);
    if (options.svg) {
        LineChart chart;
        chart.title = fmt::format("Effective budget (threshold {})", cfg.threshold);
        chart.x_label = "sampled architectures";
        chart.y_label = "T_effective (epochs)";
        chart.series.push_back(std::move(series));
        emit(manifest, dir, "budget.svg", render_svg(chart));
    }
    return finish(std::move(manifest), dir);
}

RunManifest cmd_search(const CommandOptions& options) {
    auto cfg = SearchConfig::from_json(require_config(options));
    if (options.seed) {
        cfg.master_seed = *options.seed;
    }
    const auto bench = open_benchmark(options, cfg.benchmark);
    const auto dir = require_out(options);
    RunManifest manifest = start("search", cfg.to_json());
    manifest.seeds.push_back(cfg.master_seed);

    std::vector<StrategySpec> strategies;
    for (const auto& name : cfg.strategies) {
        auto s = StrategySpec::parse(name);
        s.population_size = cfg.population_size;
        s.sample_size = cfg.sample_size;
        s.tpe.n_init = cfg.n_init;
        s.tpe.gamma_split = cfg.tpe_gamma;
        s.tpe.n_candidates = cfg.tpe_candidates;
        strategies.push_back(s);
    }
    std::vector<Evaluator> evaluators;
    for (const auto& text : cfg.evaluators) {
        evaluators.push_back(Evaluator::parse(text));
    }
    const double exhaustive = static_cast<double>(bench.records.size()) * bench.meta.t_end;
    const double budget = cfg.budget_fraction * exhaustive;
    note(options, fmt::format("search: {} strategies x {} evaluators x {} seeds, budget {} epochs",
                              strategies.size(), evaluators.size(), cfg.n_seeds, budget));
    const auto report = compare_strategies(bench, evaluators, strategies, budget, cfg.n_seeds, cfg.master_seed,
                                           cfg.grid_points, options.jobs);

    double optimum = 0.0;
    for (const auto& record : bench.records) {
        optimum = std::max(optimum, record.mean_test_acc());
    }
    std::string summary = "strategy,evaluator,seed,final_best_true_test_acc,regret,total_cost,queries\n";
    Json traces = Json::array();
    LineChart chart;
    chart.title = fmt::format("Search on {} (budget {} epochs)", bench.meta.name, budget);
    chart.x_label = "cumulative cost (epochs)";
    chart.y_label = "best true test accuracy (mean over seeds)";
    for (const auto& cell : report.cells) {
        for (const auto& trace : cell.traces) {
            summary += fmt::format("{},{},{},{},{},{},{}\n", cell.strategy, cell.evaluator, trace.seed,
                                   trace.final_best_true_test_acc(), optimum - trace.final_best_true_test_acc(),
                                   trace.total_cost(), trace.events.size());
            traces.push_back(Json::parse(trace_to_json(trace)));
        }
        Series series{fmt::format("{} / {}", cell.strategy, cell.evaluator), {}};
        for (const auto& point : cell.curve) {
            series.points.emplace_back(point.cost, point.mean_acc);
        }
        chart.series.push_back(std::move(series));
    }

    emit(manifest, dir, "search.csv", report.to_csv());
    emit(manifest, dir, "search_summary.csv", summary);
    emit(manifest, dir, "traces.json", traces.dump(1) + "\n");
    if (options.svg) {
        emit(manifest, dir, "search.svg", render_svg(chart));
    }
    return finish(std::move(manifest), dir);
}

RunManifest cmd_diffnas(const CommandOptions& options) {
    auto cfg = DiffNasRunConfig::from_json(require_config(options));
    if (options.seed) {
        cfg.master_seed = *options.seed;
    }
    const auto dir = require_out(options);
    RunManifest manifest = start("diffnas", cfg.to_json());
    manifest.seeds.push_back(cfg.master_seed);

    const auto data = make_synthetic_dataset(cfg.data_config());
    const auto menu = cfg.menu_ops();
    struct Job {
        std::string algorithm;
        int seed_index;
    };
    std::vector<Job> jobs;
    for (const auto& algorithm : cfg.algorithms) {
        for (int s = 0; s < cfg.n_seeds; ++s) {
            jobs.push_back({algorithm, s});
        }
    }
    note(options, fmt::format("diffnas: {} runs", jobs.size()));
    std::vector<DiffNasTrace> traces(jobs.size());
    parallel_for(jobs.size(), options.jobs, [&](std::size_t i) {
        const auto run = cfg.run_config(jobs[i].seed_index);
        Rng rng(derive_seed(run.seed, "cell"));
        const auto initial = ToyCell::create(cfg.nodes, cfg.data.dim, cfg.data.classes, menu, rng);
        try {
            traces[i] = jobs[i].algorithm == "darts" ? darts_run(initial, data, run) : darts_tse_run(initial, data, run);
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("{} seed {}: {}", jobs[i].algorithm, jobs[i].seed_index, e.what()));
        } catch (const NumericError& e) {
            throw NumericError(fmt::format("{} seed {}: {}", jobs[i].algorithm, jobs[i].seed_index, e.what()));
        }
    });

    const long long batches = cfg.data.n_train / cfg.batch_size;
    std::string steps = "algorithm,seed,step,weight_updates,derived_encoding,retrain_test_acc\n";
    std::string summary = "algorithm,seed,alpha_updates,weight_updates,final_encoding,final_retrain_test_acc\n";
    LineChart chart;
    chart.title = "Retrained accuracy of the derived cell";
    chart.x_label = "weight updates";
    chart.y_label = "retrained test accuracy";
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& trace = traces[i];
        const long long per_step = jobs[i].algorithm == "darts" ? batches : cfg.K;
        Series series{fmt::format("{} seed {}", jobs[i].algorithm, jobs[i].seed_index), {}};
        for (const auto& s : trace.steps) {
            steps += fmt::format("{},{},{},{},{},{}\n", jobs[i].algorithm, jobs[i].seed_index, s.step,
                                 s.step * per_step, fmt::join(s.derived_encoding, "-"), s.retrain_test_acc);
            series.points.emplace_back(static_cast<double>(s.step * per_step), s.retrain_test_acc);
        }
        const auto& last = trace.steps.back();
        summary += fmt::format("{},{},{},{},{},{}\n", jobs[i].algorithm, jobs[i].seed_index, trace.alpha_updates,
                               trace.weight_updates, fmt::join(last.derived_encoding, "-"), last.retrain_test_acc);
        emit(manifest, dir, fmt::format("traces/{}_seed{}.json", file_safe(jobs[i].algorithm), jobs[i].seed_index),
             trace.to_json() + "\n");
        chart.series.push_back(std::move(series));
    }
    emit(manifest, dir, "diffnas.csv", steps);
    emit(manifest, dir, "diffnas_summary.csv", summary);
    if (options.svg) {
        emit(manifest, dir, "diffnas.svg", render_svg(chart));
    }
    return finish(std::move(manifest), dir);
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string csv_to_markdown(const std::string& csv, std::size_t max_rows) {
    std::istringstream in(csv);
    std::string line;
    std::string out;
    std::size_t row = 0;
    std::size_t columns = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (row == max_rows + 1) {
            out += fmt::format("\n({} more rows in the CSV)\n", std::count(csv.begin(), csv.end(), '\n') - row);
            break;
        }
        std::string cells;
        for (const char ch : line) {
            cells += ch == ',' ? std::string(" | ") : std::string(1, ch);
        }
        out += "| " + cells + " |\n";
        if (row == 0) {
            columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
            out += "|";
            for (std::size_t c = 0; c < columns; ++c) {
                out += " --- |";
            }
            out += "\n";
        }
        ++row;
    }
    return out;
}

}  // namespace

RunManifest cmd_report(const CommandOptions& options) {
    const auto dir = require_out(options);
    std::vector<fs::path> manifests;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename() == "manifest.json") {
            manifests.push_back(entry.path());
        }
    }
    std::sort(manifests.begin(), manifests.end());

    Json inputs = Json::array();
    std::string report = "# Run report\n";
    for (const auto& path : manifests) {
        Json m;
        try {
            m = Json::parse(read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(fmt::format("report: {}: {}", path.string(), e.what()));
        }
        const auto command = m.value("command", std::string());
        if (command.empty() || command == "report") {
            continue;
        }
        const auto run_dir = path.parent_path();
        const auto relative = fs::relative(run_dir, dir).generic_string();
        inputs.push_back(relative);
        report += fmt::format("\n## {} ({})\n\nFinished {}, tool version {}.\n", command, relative,
                              m.value("finished_at", std::string("?")), m.value("tool_version", std::string("?")));
        for (const auto& [file, checksum] : m["artifacts"].items()) {
            const auto name = std::string(file);
            const fs::path artifact = run_dir / name;
            if (!fs::exists(artifact)) {
                report += fmt::format("\n`{}` is missing.\n", name);
                continue;
            }
            if (sha256_file(artifact) != checksum.get<std::string>()) {
                report += fmt::format("\n`{}` no longer matches its recorded checksum.\n", name);
            }
            const bool table = artifact.extension() == ".csv" && name.find("samples") == std::string::npos &&
                               name != "scores.csv" && name != "rankeval_per_seed.csv";
            if (table) {
                report += fmt::format("\n### {}\n\n{}", name, csv_to_markdown(read_file(artifact), 40));
            } else if (artifact.extension() == ".svg") {
                report += fmt::format("\n![{}]({}/{})\n", name, relative, name);
            }
        }
    }
    if (inputs.empty()) {
        report += "\nNo run manifests found.\n";
    }

    Json config;
    config["schema"] = kConfigSchema;
    config["inputs"] = inputs;
    RunManifest manifest = start("report", config);
    emit(manifest, dir, "report.md", report);
    return finish(std::move(manifest), dir);
}

int run_command(const std::string& name, const CommandOptions& options, std::ostream& err) {
    try {
        if (name == "gen-toy") {
            cmd_gen_toy(options);
        } else if (name == "rankeval") {
            cmd_rankeval(options);
        } else if (name == "budget") {
            cmd_budget(options);
        } else if (name == "search") {
            cmd_search(options);
        } else if (name == "diffnas") {
            cmd_diffnas(options);
        } else if (name == "report") {
            cmd_report(options);
        } else {
            throw ValidationError(fmt::format(
                "unknown command '{}' (expected gen-toy, rankeval, budget, search, diffnas or report)", name));
        }
        return 0;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace tsenas

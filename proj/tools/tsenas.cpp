#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tsenas/commands.hpp"
#include "tsenas/manifest.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Training-speed estimation and toy architecture search experiments"};
    app.set_version_flag("--version", tsenas::kToolVersion);
    app.require_subcommand(1);

    tsenas::CommandOptions options;
    std::string config;
    std::string out;
    std::string benchmark;
    std::uint64_t seed = 0;
    bool quiet = false;

    struct Entry {
        const char* name;
        const char* help;
        bool needs_config;
    };
    const Entry entries[] = {
        {"gen-toy", "Train the toy architecture space and write a benchmark", true},
        {"rankeval", "Rank correlation of estimators against final test accuracy", true},
        {"budget", "Effective training budget over sampled populations", true},
        {"search", "Compare search strategies and evaluators", true},
        {"diffnas", "Run DARTS and DARTS-TSE on the toy cell", true},
        {"report", "Summarise the runs found under --out into report.md", false},
    };
    for (const auto& entry : entries) {
        auto* sub = app.add_subcommand(entry.name, entry.help);
        if (entry.needs_config) {
            sub->add_option("--config", config, "JSON config or run manifest")->required()->check(CLI::ExistingFile);
            sub->add_option("--seed", seed, "Override the config's master seed");
            sub->add_option("--jobs", options.jobs, "Worker threads")->check(CLI::PositiveNumber);
            sub->add_flag("--svg", options.svg, "Also write an SVG chart");
        }
        if (std::string(entry.name) == "rankeval" || std::string(entry.name) == "budget" ||
            std::string(entry.name) == "search") {
            sub->add_option("--benchmark", benchmark, "Override the config's benchmark path");
        }
        sub->add_option("--out", out, "Output directory")->required();
        sub->add_flag("--quiet", quiet, "No progress output");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const auto* chosen = app.get_subcommands().front();
    options.config = config;
    options.out = out;
    if (const auto* opt = chosen->get_option_no_throw("--seed"); opt != nullptr && opt->count() > 0) {
        options.seed = seed;
    }
    if (!benchmark.empty()) {
        options.benchmark = benchmark;
    }
    if (!quiet) {
        options.log = &std::cerr;
    }
    return tsenas::run_command(chosen->get_name(), options, std::cerr);
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "tsenas/manifest.hpp"

namespace tsenas {

struct CommandOptions {
    std::filesystem::path config;
    std::filesystem::path out;
    /// Replaces the config's master_seed when set.
    std::optional<std::uint64_t> seed;
    /// Replaces the config's benchmark path when set.
    std::optional<std::string> benchmark;
    unsigned jobs = 1;
    bool svg = false;
    std::ostream* log = nullptr;
};

RunManifest cmd_gen_toy(const CommandOptions& options);
RunManifest cmd_rankeval(const CommandOptions& options);
RunManifest cmd_budget(const CommandOptions& options);
RunManifest cmd_search(const CommandOptions& options);
RunManifest cmd_diffnas(const CommandOptions& options);
/// Collects the manifests and CSV tables found under options.out into report.md.
RunManifest cmd_report(const CommandOptions& options);

/// Runs a subcommand by name and maps failures to exit codes:
/// 0 success, 1 validation error, 2 runtime or numeric failure.
int run_command(const std::string& name, const CommandOptions& options, std::ostream& err);

}  // namespace tsenas

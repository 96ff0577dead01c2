#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace tsenas {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestSchema = 1;

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);
/// Current UTC time, ISO 8601 with second precision.
std::string utc_timestamp();

/// Record of one command invocation. Passing the manifest back as --config
/// replays the run from its config snapshot.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config;
    std::vector<std::uint64_t> seeds;
    std::map<std::string, std::string> artifacts;  // file name -> sha256
    std::string tool_version = kToolVersion;
    std::string started_at;
    std::string finished_at;

    /// Hashes `file` (relative to `dir`) into the artifact table.
    void add_artifact(const std::filesystem::path& dir, const std::string& file);
    nlohmann::ordered_json to_json() const;
    void write(const std::filesystem::path& dir) const;
};

}  // namespace tsenas

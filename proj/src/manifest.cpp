#include "tsenas/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "tsenas/errors.hpp"

namespace tsenas {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw NumericError("sha256: digest failed");
    }
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += fmt::format("{:02x}", digest[i]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError(fmt::format("cannot read {}", path.string()));
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return sha256_hex(buffer.str());
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char text[32];
    std::strftime(text, sizeof text, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return text;
}

void RunManifest::add_artifact(const std::filesystem::path& dir, const std::string& file) {
    artifacts[file] = sha256_file(dir / file);
}

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["manifest_schema"] = kManifestSchema;
    j["command"] = command;
    j["tool_version"] = tool_version;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["seeds"] = seeds;
    j["config"] = config;
    j["artifacts"] = artifacts;
    return j;
}

void RunManifest::write(const std::filesystem::path& dir) const {
    std::ofstream out(dir / "manifest.json");
    if (!out) {
        throw ValidationError(fmt::format("cannot write {}", (dir / "manifest.json").string()));
    }
    out << to_json().dump(2) << '\n';
}

}  // namespace tsenas

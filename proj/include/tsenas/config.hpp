#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsenas/diffnas.hpp"
#include "tsenas/toytrain.hpp"

namespace tsenas {

inline constexpr int kConfigSchema = 1;

/// Reads a JSON config file. A run manifest is accepted too, in which case
/// its embedded config snapshot is returned.
nlohmann::ordered_json read_config_json(const std::filesystem::path& path);

struct ToySpaceConfig {
    std::string layout;  // uniform or per_layer
    std::vector<int> depths;
    std::vector<int> widths;
    std::vector<std::string> activations;

    std::vector<ToyArchSpec> enumerate() const;
};

/// gen-toy. Data and training seeds derive from master_seed.
struct ToyConfig {
    std::string name;
    std::uint64_t master_seed = 0;
    std::vector<int> seeds;
    ToySpaceConfig space;
    SyntheticDataConfig data;
    TrainConfig train;

    static ToyConfig from_json(const nlohmann::ordered_json& j);
    nlohmann::ordered_json to_json() const;
    SyntheticDataConfig data_config() const;
    TrainConfig train_config() const;
};

/// rankeval. Estimators without a budget are evaluated at every entry of `budgets`.
struct RankevalConfig {
    std::string benchmark;
    std::vector<std::string> estimators;
    std::vector<int> budgets;

    static RankevalConfig from_json(const nlohmann::ordered_json& j);
    nlohmann::ordered_json to_json() const;
};

struct BudgetConfig {
    std::string benchmark;
    std::vector<int> sample_sizes;
    int repeats = 0;
    double threshold = 0.0;
    std::uint64_t master_seed = 0;

    static BudgetConfig from_json(const nlohmann::ordered_json& j);
    nlohmann::ordered_json to_json() const;
};

struct SearchConfig {
    std::string benchmark;
    std::vector<std::string> strategies;
    std::vector<std::string> evaluators;
    /// Search budget as a fraction of the ground-truth cost of the whole space.
    double budget_fraction = 0.0;
    int n_seeds = 0;
    std::uint64_t master_seed = 0;
    int grid_points = 0;
    int population_size = 0;
    int sample_size = 0;
    int n_init = 0;
    double tpe_gamma = 0.0;
    int tpe_candidates = 0;

    static SearchConfig from_json(const nlohmann::ordered_json& j);
    nlohmann::ordered_json to_json() const;
};

struct DiffNasRunConfig {
    std::uint64_t master_seed = 0;
    int n_seeds = 0;
    std::vector<std::string> algorithms;  // darts, darts-tse
    int nodes = 0;
    std::vector<std::string> menu;
    SyntheticDataConfig data;
    int K = 0;
    int epochs = 0;
    int batch_size = 0;
    double lr_weights = 0.0;
    double lr_alpha = 0.0;
    TrainConfig retrain;

    static DiffNasRunConfig from_json(const nlohmann::ordered_json& j);
    nlohmann::ordered_json to_json() const;
    std::vector<CellOp> menu_ops() const;
    SyntheticDataConfig data_config() const;
    /// Search config for seed index i.
    DiffNasConfig run_config(int seed_index) const;
};

CellOp parse_cell_op(const std::string& name);

}  // namespace tsenas

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsenas/curves.hpp"
#include "tsenas/estimators.hpp"
#include "tsenas/rng.hpp"

namespace tsenas {

namespace defaults {
inline constexpr int n_init = 10;
inline constexpr int re_sample_size = 3;
inline constexpr double tpe_gamma_split = 0.25;
inline constexpr int tpe_candidates = 24;
}  // namespace defaults

enum class EvaluatorMode { ground_truth, estimator };

/// How a search scores a queried architecture and what each query costs.
///
/// Ground truth looks up the mean final test accuracy and costs t_end
/// epoch-units. Estimator mode scores with the estimator (averaged over the
/// record's seeds) and costs T epoch-units.
struct Evaluator {
    EvaluatorMode mode = EvaluatorMode::ground_truth;
    EstimatorSpec spec;

    static Evaluator ground_truth() { return {}; }
    static Evaluator estimator(const EstimatorSpec& spec);
    /// "gt" or an estimator string with T set, e.g. "tse-ema@T=10".
    static Evaluator parse(const std::string& text);

    Orientation orientation() const;
    double cost_per_query(const BenchmarkDataset& bench) const;
    double score(const ArchitectureRecord& record) const;
    /// Comma-free, e.g. "gt" or "tse-ema:g=0.999@T=10".
    std::string label() const;
};

struct SearchEvent {
    int step = 0;
    std::string arch_id;
    double score = 0.0;
    double cumulative_cost = 0.0;
    bool duplicate = false;
    /// Best evaluator score so far and the architecture holding it.
    double best_score = 0.0;
    std::string incumbent_id;
    double incumbent_test_acc = 0.0;
    /// Highest true test accuracy among all architectures queried so far.
    double best_true_test_acc = 0.0;
};

struct SearchTrace {
    std::string strategy;
    std::string evaluator;
    std::uint64_t seed = 0;
    double budget = 0.0;
    std::vector<SearchEvent> events;
    std::vector<std::string> log;

    double final_best_true_test_acc() const;
    double total_cost() const;
    /// Smallest cumulative cost at which best_true_test_acc reaches `level`;
    /// nullopt if it never does.
    std::optional<double> cost_to_reach(double level) const;
};

std::string trace_to_json(const SearchTrace& trace);

/// Categorical domains of a fixed-length encoding space plus the lookup
/// from encoding to record.
class EncodingSpace {
public:
    explicit EncodingSpace(const BenchmarkDataset& bench);

    std::size_t positions() const { return domains_.size(); }
    const std::vector<int>& domain(std::size_t position) const { return domains_[position]; }
    std::optional<std::size_t> find(const std::vector<int>& encoding) const;

private:
    std::vector<std::vector<int>> domains_;
    std::map<std::vector<int>, std::size_t> index_;
};

/// Changes exactly one position (chosen uniformly among positions with at
/// least two values) to a different value of its domain, chosen uniformly.
std::vector<int> mutate_encoding(const std::vector<int>& parent, const EncodingSpace& space, Rng& rng);

/// Independent per-position categorical distribution with add-one smoothing.
class CategoricalModel {
public:
    CategoricalModel(const EncodingSpace& space, const std::vector<std::vector<int>>& encodings);

    double probability(std::size_t position, int value) const;
    double log_likelihood(const std::vector<int>& encoding) const;
    std::vector<int> sample(Rng& rng) const;

private:
    const EncodingSpace* space_;
    std::vector<std::vector<double>> probs_;  // aligned with space.domain(position)
};

struct GoodBadSplit {
    std::vector<std::size_t> good;  // indices into the observation list
    std::vector<std::size_t> bad;
    bool degenerate = false;        // all scores equal or one side empty
};

/// Best ceil(gamma * n) observations (at least one) form the good set.
/// Score ties keep observation order.
GoodBadSplit split_good_bad(const std::vector<double>& scores, Orientation orientation, double gamma);

SearchTrace random_search(const BenchmarkDataset& bench, const Evaluator& ev, double budget, std::uint64_t seed);

SearchTrace regularized_evolution(const BenchmarkDataset& bench, const Evaluator& ev, double budget,
                                  int population_size, int sample_size, std::uint64_t seed);

struct TpeOptions {
    double gamma_split = defaults::tpe_gamma_split;
    int n_init = defaults::n_init;
    int n_candidates = defaults::tpe_candidates;
};

SearchTrace tpe_search(const BenchmarkDataset& bench, const Evaluator& ev, double budget, const TpeOptions& options,
                       std::uint64_t seed);

struct StrategySpec {
    std::string name;  // rs, re, tpe
    int population_size = defaults::n_init;
    int sample_size = defaults::re_sample_size;
    TpeOptions tpe;

    static StrategySpec parse(const std::string& name);
};

SearchTrace run_strategy(const BenchmarkDataset& bench, const Evaluator& ev, const StrategySpec& strategy,
                         double budget, std::uint64_t seed);

struct GridPoint {
    double cost = 0.0;
    double mean_acc = 0.0;
    double stderr_ = 0.0;
};

struct ComparisonCell {
    std::string strategy;
    std::string evaluator;
    std::vector<GridPoint> curve;
    std::vector<SearchTrace> traces;
};

struct ComparisonReport {
    double budget = 0.0;
    std::vector<ComparisonCell> cells;

    /// strategy,evaluator,cost,mean_acc,stderr
    std::string to_csv() const;
};

/// Seed i of every cell uses derive_seed(master_seed, "search", i), so
/// cells that differ only in evaluator see the same random stream.
/// best_true_test_acc is sampled on `grid_points` evenly spaced costs in
/// (0, budget]; a grid point is emitted once every seed has made a query.
ComparisonReport compare_strategies(const BenchmarkDataset& bench, const std::vector<Evaluator>& evaluators,
                                    const std::vector<StrategySpec>& strategies, double budget, int n_seeds,
                                    std::uint64_t master_seed, int grid_points, unsigned jobs);

/// best_true_test_acc of the last event with cumulative_cost <= cost.
std::optional<double> value_at_cost(const SearchTrace& trace, double cost);

}  // namespace tsenas

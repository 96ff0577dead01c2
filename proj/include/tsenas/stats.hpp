#pragma once

#include <span>
#include <string>
#include <vector>

namespace tsenas {

/// Which direction of an estimator score predicts better generalisation.
/// Kept explicit instead of negating scores, so raw scores stay readable.
enum class Orientation { lower_is_better, higher_is_better };

const char* to_string(Orientation orientation);

/// 1-based ranks; tied values share the average of the ranks they span.
std::vector<double> ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks. Correct under ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct ScoredArch {
    std::string arch_id;
    double score = 0.0;
    double final_test_acc = 0.0;
};

/// Mean final_test_acc of the k best-scored entries. Score ties go to the
/// lexicographically smaller arch_id.
double topk_mean_final_acc(std::span<const ScoredArch> population, std::size_t k, Orientation orientation);

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Mean and standard error (sample sd / sqrt(n)); stderr is 0 for n == 1.
MeanStderr aggregate(std::span<const double> runs);

struct RankCorrelationReport {
    int budget_T = 0;
    std::string estimator_name;
    double rho = 0.0;
    std::size_t n = 0;
    bool mean_over_seeds = false;

    /// estimator,T,rho,n
    std::string csv_row() const;
    static const char* csv_header() { return "estimator,T,rho,n"; }
};

}  // namespace tsenas

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsenas/curves.hpp"
#include "tsenas/stats.hpp"

namespace tsenas {

namespace defaults {
inline constexpr int window_E = 1;
inline constexpr double ema_gamma = 0.999;
inline constexpr double overfit_threshold = 0.1;
inline constexpr double checkpoint_fraction = 0.9;
}  // namespace defaults

enum class EstimatorKind { tse, tse_e, tse_ema, sovl, vacc_es, tlmini, pac_bayes };

/// An estimator and its hyperparameters.
///
/// Textual form is `name@key=value,...`, e.g. `tse-ema@T=10,g=0.999` or
/// `pacbayes@a=0,b=1,d=0.1`. Names: tse, tse-e, tse-ema, sovl, vacc-es,
/// tlmini, pacbayes. Keys: T (budget), E (window), g (decay), a, b, d.
/// T = 0 means "not fixed yet"; a rank-evaluation grid fills it in. For
/// pacbayes an unset T means the full curve.
struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::tse;
    int T = 0;
    int E = defaults::window_E;
    double gamma = defaults::ema_gamma;
    double a = 0.0;
    double b = 1.0;
    double delta = 0.1;

    static EstimatorSpec parse(std::string_view text);

    Orientation orientation() const;
    /// Throws ValidationError on E < 1, gamma outside (0, 1], delta outside
    /// (0, 1], or a >= b. Checks against a curve happen at scoring time.
    void validate() const;
    EstimatorSpec with_budget(int budget) const;

    /// Name plus non-budget hyperparameters, safe for a CSV cell.
    std::string label() const;
    /// Round-trips through parse().
    std::string to_string() const;
};

/// Sum over epochs 1..T of the mean minibatch training loss.
double tse(const LearningCurve& curve, int T);
/// Same sum restricted to epochs T-E+1..T.
double tse_e(const LearningCurve& curve, int T, int E);
/// Sum over epochs 1..T of gamma^(T-t) times the epoch's mean minibatch loss.
double tse_ema(const LearningCurve& curve, int T, double gamma);
/// Sum of per-epoch validation losses up to T.
double sovl(const LearningCurve& curve, int T);
/// Validation accuracy at epoch T.
double vacc_es(const LearningCurve& curve, int T);
/// Raw minibatch losses of epoch T. Each minibatch index is ranked
/// separately by the evaluation layer.
std::vector<double> tlmini_scores(const LearningCurve& curve, int T);

/// a + c * [1 - e^a * (e^{-sum_nll} * delta)^{1/n}], c = (b - a) / (1 - e^{a-b}).
double pac_bayes_bound(double sum_nll, long long n, double a, double b, double delta);
/// Bound fed with the sum of minibatch mean losses over epochs 1..T,
/// counting n = T * B terms.
double pac_bayes_score(const LearningCurve& curve, int T, double a, double b, double delta);

/// Scalar score for every kind except tlmini. spec.T must be set, except
/// for pacbayes where 0 means the whole curve.
double score(const LearningCurve& curve, const EstimatorSpec& spec);

/// Effective training budget for the TSE family.
///
/// For each curve, T_o is the first epoch whose mean minibatch loss falls
/// below `threshold` (t_end if none does). Returns floor(0.9 * min T_o),
/// clamped to at least 1. Every curve must cover t_end epochs.
int effective_budget(std::span<const LearningCurve> curves, double threshold, int t_end);

struct RankEvalResult {
    EstimatorSpec spec;
    bool available = true;
    std::string reason;
    /// Orientation-corrected rho averaged over seeds.
    RankCorrelationReport mean;
    std::vector<int> seeds;
    std::vector<double> per_seed_rho;
};

/// Spearman correlation between estimator scores and final test accuracy
/// across the population, computed separately for every seed common to all
/// records and then averaged. Lower-is-better estimators have their rho
/// negated so that 1 always means a perfect ranking. TLmini averages the
/// per-minibatch-index correlations. Failures that make an estimator
/// inapplicable (missing validation data, constant scores) come back as
/// `available == false` rather than an exception.
RankEvalResult evaluate_rank_correlation(const BenchmarkDataset& bench, const EstimatorSpec& spec);

}  // namespace tsenas

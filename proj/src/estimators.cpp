#include "tsenas/estimators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "tsenas/errors.hpp"

namespace tsenas {

namespace {

struct KindName {
    EstimatorKind kind;
    std::string_view name;
};

constexpr KindName kKindNames[] = {
    {EstimatorKind::tse, "tse"},         {EstimatorKind::tse_e, "tse-e"},   {EstimatorKind::tse_ema, "tse-ema"},
    {EstimatorKind::sovl, "sovl"},       {EstimatorKind::vacc_es, "vacc-es"}, {EstimatorKind::tlmini, "tlmini"},
    {EstimatorKind::pac_bayes, "pacbayes"},
};

std::string_view kind_name(EstimatorKind kind) {
    for (const auto& entry : kKindNames) {
        if (entry.kind == kind) {
            return entry.name;
        }
    }
    return "?";
}

void check_budget(const LearningCurve& curve, int T, const char* who) {
    if (T < 1 || T > curve.t_end()) {
        throw ValidationError(fmt::format("{}: T={} outside [1, {}]", who, T, curve.t_end()));
    }
}

double epoch_mean(const std::vector<double>& epoch) {
    double total = 0.0;
    for (double loss : epoch) {
        total += loss;
    }
    return total / static_cast<double>(epoch.size());
}

double parse_number(std::string_view key, std::string_view text) {
    // std::from_chars for double is not available on every toolchain we build with.
    const std::string s(text);
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) {
        throw ValidationError(fmt::format("estimator: value for '{}' is not a number: '{}'", key, text));
    }
    return value;
}

int parse_int(std::string_view key, std::string_view text) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError(fmt::format("estimator: value for '{}' is not an integer: '{}'", key, text));
    }
    return value;
}

}  // namespace

EstimatorSpec EstimatorSpec::parse(std::string_view text) {
    const auto at = text.find('@');
    const std::string_view name = text.substr(0, at);
    EstimatorSpec spec;
    bool known = false;
    for (const auto& entry : kKindNames) {
        if (entry.name == name) {
            spec.kind = entry.kind;
            known = true;
        }
    }
    if (!known) {
        throw ValidationError(fmt::format(
            "estimator: unknown name '{}' (valid: tse, tse-e, tse-ema, sovl, vacc-es, tlmini, pacbayes)", name));
    }
    if (at != std::string_view::npos) {
        std::string_view rest = text.substr(at + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string_view item = rest.substr(0, comma);
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
            const auto eq = item.find('=');
            if (eq == std::string_view::npos) {
                throw ValidationError(fmt::format("estimator: expected key=value, got '{}'", item));
            }
            const std::string_view key = item.substr(0, eq);
            const std::string_view value = item.substr(eq + 1);
            if (key == "T") {
                spec.T = parse_int(key, value);
            } else if (key == "E") {
                spec.E = parse_int(key, value);
            } else if (key == "g" || key == "gamma") {
                spec.gamma = parse_number(key, value);
            } else if (key == "a") {
                spec.a = parse_number(key, value);
            } else if (key == "b") {
                spec.b = parse_number(key, value);
            } else if (key == "d" || key == "delta") {
                spec.delta = parse_number(key, value);
            } else {
                throw ValidationError(fmt::format("estimator: unknown key '{}' in '{}'", key, text));
            }
        }
    }
    spec.validate();
    return spec;
}

Orientation EstimatorSpec::orientation() const {
    return kind == EstimatorKind::vacc_es ? Orientation::higher_is_better : Orientation::lower_is_better;
}

void EstimatorSpec::validate() const {
    if (T < 0) {
        throw ValidationError(fmt::format("estimator: T={} must be positive", T));
    }
    if (kind == EstimatorKind::tse_e && (E < 1 || (T > 0 && E > T))) {
        throw ValidationError(fmt::format("estimator: E={} outside [1, T={}]", E, T));
    }
    if (kind == EstimatorKind::tse_ema && !(gamma > 0.0 && gamma <= 1.0)) {
        throw ValidationError(fmt::format("estimator: gamma={} outside (0, 1]", gamma));
    }
    if (kind == EstimatorKind::pac_bayes) {
        if (!(delta > 0.0 && delta <= 1.0)) {
            throw ValidationError(fmt::format("estimator: delta={} outside (0, 1]", delta));
        }
        if (!(a < b)) {
            throw ValidationError(fmt::format("estimator: need a < b, got a={} b={}", a, b));
        }
    }
}

EstimatorSpec EstimatorSpec::with_budget(int budget) const {
    EstimatorSpec copy = *this;
    copy.T = budget;
    copy.validate();
    return copy;
}

std::string EstimatorSpec::label() const {
    switch (kind) {
        case EstimatorKind::tse_e:
            return fmt::format("tse-e:E={}", E);
        case EstimatorKind::tse_ema:
            return fmt::format("tse-ema:g={}", gamma);
        case EstimatorKind::pac_bayes:
            return fmt::format("pacbayes:a={};b={};d={}", a, b, delta);
        default:
            return std::string(kind_name(kind));
    }
}

std::string EstimatorSpec::to_string() const {
    std::vector<std::string> parts;
    if (T > 0) {
        parts.push_back(fmt::format("T={}", T));
    }
    switch (kind) {
        case EstimatorKind::tse_e:
            parts.push_back(fmt::format("E={}", E));
            break;
        case EstimatorKind::tse_ema:
            parts.push_back(fmt::format("g={}", gamma));
            break;
        case EstimatorKind::pac_bayes:
            parts.push_back(fmt::format("a={}", a));
            parts.push_back(fmt::format("b={}", b));
            parts.push_back(fmt::format("d={}", delta));
            break;
        default:
            break;
    }
    std::string out(kind_name(kind));
    if (!parts.empty()) {
        out += '@' + fmt::format("{}", fmt::join(parts, ","));
    }
    return out;
}

double tse(const LearningCurve& curve, int T) {
    check_budget(curve, T, "tse");
    const auto& losses = curve.minibatch_train_losses();
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
        total += epoch_mean(losses[static_cast<std::size_t>(t)]);
    }
    return total;
}

double tse_e(const LearningCurve& curve, int T, int E) {
    check_budget(curve, T, "tse_e");
    if (E < 1 || E > T) {
        throw ValidationError(fmt::format("tse_e: E={} outside [1, T={}]", E, T));
    }
    const auto& losses = curve.minibatch_train_losses();
    double total = 0.0;
    for (int t = T - E; t < T; ++t) {
        total += epoch_mean(losses[static_cast<std::size_t>(t)]);
    }
    return total;
}

double tse_ema(const LearningCurve& curve, int T, double gamma) {
    check_budget(curve, T, "tse_ema");
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw ValidationError(fmt::format("tse_ema: gamma={} outside (0, 1]", gamma));
    }
    const auto& losses = curve.minibatch_train_losses();
    // Horner form: after epoch t the accumulator holds sum_{s<=t} gamma^{t-s} * mean_s.
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
        total = total * gamma + epoch_mean(losses[static_cast<std::size_t>(t)]);
    }
    return total;
}

double sovl(const LearningCurve& curve, int T) {
    check_budget(curve, T, "sovl");
    if (!curve.epoch_val_loss()) {
        throw ValidationError("sovl: validation losses unavailable");
    }
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
        total += (*curve.epoch_val_loss())[static_cast<std::size_t>(t)];
    }
    return total;
}

double vacc_es(const LearningCurve& curve, int T) {
    check_budget(curve, T, "vacc_es");
    if (curve.epoch_val_acc().empty()) {
        throw ValidationError("vacc_es: validation accuracies unavailable");
    }
    return curve.epoch_val_acc()[static_cast<std::size_t>(T - 1)];
}

std::vector<double> tlmini_scores(const LearningCurve& curve, int T) {
    check_budget(curve, T, "tlmini");
    return curve.minibatch_train_losses()[static_cast<std::size_t>(T - 1)];
}

double pac_bayes_bound(double sum_nll, long long n, double a, double b, double delta) {
    if (n < 1) {
        throw ValidationError(fmt::format("pac_bayes_bound: n={} must be positive", n));
    }
    if (!(a < b)) {
        throw ValidationError(fmt::format("pac_bayes_bound: need a < b, got a={} b={}", a, b));
    }
    if (!(delta > 0.0 && delta <= 1.0)) {
        throw ValidationError(fmt::format("pac_bayes_bound: delta={} outside (0, 1]", delta));
    }
    const double count = static_cast<double>(n);
    if (!std::isfinite(sum_nll) || sum_nll < count * a) {
        throw ValidationError(fmt::format("pac_bayes_bound: sum_nll={} below n*a={}", sum_nll, count * a));
    }
    const double c = (b - a) / (1.0 - std::exp(a - b));
    // e^a * (e^{-L} * delta)^{1/n}, evaluated in log space.
    const double shrink = std::exp(a + (std::log(delta) - sum_nll) / count);
    return a + c * (1.0 - shrink);
}

double pac_bayes_score(const LearningCurve& curve, int T, double a, double b, double delta) {
    check_budget(curve, T, "pacbayes");
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
        for (double loss : curve.minibatch_train_losses()[static_cast<std::size_t>(t)]) {
            total += loss;
        }
    }
    const long long n = static_cast<long long>(T) * curve.batches_per_epoch();
    return pac_bayes_bound(total, n, a, b, delta);
}

double score(const LearningCurve& curve, const EstimatorSpec& spec) {
    switch (spec.kind) {
        case EstimatorKind::tse:
            return tse(curve, spec.T);
        case EstimatorKind::tse_e:
            return tse_e(curve, spec.T, spec.E);
        case EstimatorKind::tse_ema:
            return tse_ema(curve, spec.T, spec.gamma);
        case EstimatorKind::sovl:
            return sovl(curve, spec.T);
        case EstimatorKind::vacc_es:
            return vacc_es(curve, spec.T);
        case EstimatorKind::pac_bayes:
            return pac_bayes_score(curve, spec.T == 0 ? curve.t_end() : spec.T, spec.a, spec.b, spec.delta);
        case EstimatorKind::tlmini:
            throw ValidationError("score: tlmini yields one score per minibatch; use tlmini_scores");
    }
    throw ValidationError("score: unknown estimator kind");
}

int effective_budget(std::span<const LearningCurve> curves, double threshold, int t_end) {
    if (curves.empty()) {
        throw ValidationError("effective_budget: empty curve set");
    }
    if (!(threshold > 0.0)) {
        throw ValidationError(fmt::format("effective_budget: threshold={} must be positive", threshold));
    }
    int earliest = t_end;
    for (const auto& curve : curves) {
        if (curve.t_end() < t_end) {
            throw ValidationError(
                fmt::format("effective_budget: curve has {} epochs, expected t_end={}", curve.t_end(), t_end));
        }
        const auto sums = epoch_sums(curve);
        int overfit_at = t_end;
        for (int t = 1; t <= t_end; ++t) {
            if (sums[static_cast<std::size_t>(t - 1)] < threshold) {
                overfit_at = t;
                break;
            }
        }
        earliest = std::min(earliest, overfit_at);
    }
    // Integer form of floor(0.9 * T_o); avoids 0.9 * 50 = 44.999... style rounding.
    const int budget = (earliest * 9) / 10;
    return std::max(budget, 1);
}

RankEvalResult evaluate_rank_correlation(const BenchmarkDataset& bench, const EstimatorSpec& spec) {
    RankEvalResult result;
    result.spec = spec;
    result.mean.budget_T = spec.T;
    result.mean.estimator_name = spec.label();
    result.mean.n = bench.records.size();
    result.mean.mean_over_seeds = true;
    result.seeds = bench.common_seeds();
    if (result.seeds.empty()) {
        result.available = false;
        result.reason = "no seed common to all records";
        return result;
    }
    const double sign = spec.orientation() == Orientation::lower_is_better ? -1.0 : 1.0;
    const std::size_t n = bench.records.size();
    try {
        for (int seed : result.seeds) {
            std::vector<double> acc(n);
            for (std::size_t r = 0; r < n; ++r) {
                acc[r] = bench.records[r].seeds.at(seed).final_test_acc();
            }
            double rho = 0.0;
            if (spec.kind == EstimatorKind::tlmini) {
                std::vector<std::vector<double>> per_arch(n);
                for (std::size_t r = 0; r < n; ++r) {
                    per_arch[r] = tlmini_scores(bench.records[r].seeds.at(seed), spec.T);
                }
                const std::size_t batches = per_arch.front().size();
                double total = 0.0;
                for (std::size_t i = 0; i < batches; ++i) {
                    std::vector<double> column(n);
                    for (std::size_t r = 0; r < n; ++r) {
                        column[r] = per_arch[r][i];
                    }
                    total += spearman(column, acc);
                }
                rho = total / static_cast<double>(batches);
            } else {
                std::vector<double> scores(n);
                for (std::size_t r = 0; r < n; ++r) {
                    scores[r] = score(bench.records[r].seeds.at(seed), spec);
                }
                rho = spearman(scores, acc);
            }
            result.per_seed_rho.push_back(sign * rho);
        }
    } catch (const ValidationError& e) {
        result.available = false;
        result.reason = e.what();
        result.per_seed_rho.clear();
        return result;
    }
    double total = 0.0;
    for (double rho : result.per_seed_rho) {
        total += rho;
    }
    result.mean.rho = total / static_cast<double>(result.per_seed_rho.size());
    return result;
}

}  // namespace tsenas

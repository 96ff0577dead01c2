#include "tsenas/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "tsenas/errors.hpp"

namespace tsenas {

const char* to_string(Orientation orientation) {
    return orientation == Orientation::lower_is_better ? "lower-is-better" : "higher-is-better";
}

std::vector<double> ranks(std::span<const double> values) {
    if (values.empty()) {
        throw ValidationError("ranks: empty input");
    }
    for (double v : values) {
        if (std::isnan(v)) {
            throw ValidationError("ranks: NaN input");
        }
    }
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> result(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) {
            ++j;
        }
        // Positions i..j-1 hold ranks i+1..j; their average is (i+1+j)/2.
        const double shared = static_cast<double>(i + 1 + j) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            result[order[k]] = shared;
        }
        i = j;
    }
    return result;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw ValidationError(fmt::format("pearson: length mismatch ({} vs {})", x.size(), y.size()));
    }
    if (x.size() < 2) {
        throw ValidationError("pearson: need at least two values");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw ValidationError("pearson: constant sequence, correlation undefined");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw ValidationError(fmt::format("spearman: length mismatch ({} vs {})", x.size(), y.size()));
    }
    if (x.size() < 2) {
        throw ValidationError("spearman: need at least two values");
    }
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    return pearson(rx, ry);
}

double topk_mean_final_acc(std::span<const ScoredArch> population, std::size_t k, Orientation orientation) {
    if (k < 1 || k > population.size()) {
        throw ValidationError(fmt::format("topk_mean_final_acc: k={} outside [1, {}]", k, population.size()));
    }
    std::vector<const ScoredArch*> order;
    order.reserve(population.size());
    for (const auto& entry : population) {
        order.push_back(&entry);
    }
    std::sort(order.begin(), order.end(), [orientation](const ScoredArch* a, const ScoredArch* b) {
        if (a->score != b->score) {
            return orientation == Orientation::lower_is_better ? a->score < b->score : a->score > b->score;
        }
        return a->arch_id < b->arch_id;
    });
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        total += order[i]->final_test_acc;
    }
    return total / static_cast<double>(k);
}

MeanStderr aggregate(std::span<const double> runs) {
    if (runs.empty()) {
        throw ValidationError("aggregate: empty input");
    }
    const double n = static_cast<double>(runs.size());
    const double mean = std::accumulate(runs.begin(), runs.end(), 0.0) / n;
    if (runs.size() == 1) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double v : runs) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    return {mean, sd / std::sqrt(n)};
}

std::string RankCorrelationReport::csv_row() const {
    return fmt::format("{},{},{},{}", estimator_name, budget_T, rho, n);
}

}  // namespace tsenas

#include "tsenas/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "tsenas/errors.hpp"
#include "tsenas/parallel.hpp"

namespace tsenas {

Evaluator Evaluator::estimator(const EstimatorSpec& spec) {
    if (spec.kind == EstimatorKind::tlmini) {
        throw ValidationError("evaluator: tlmini has no scalar score and cannot drive a search");
    }
    if (spec.T < 1 && spec.kind != EstimatorKind::pac_bayes) {
        throw ValidationError(fmt::format("evaluator: '{}' needs a budget T", spec.to_string()));
    }
    spec.validate();
    Evaluator ev;
    ev.mode = EvaluatorMode::estimator;
    ev.spec = spec;
    return ev;
}

Evaluator Evaluator::parse(const std::string& text) {
    if (text == "gt" || text == "ground-truth") {
        return ground_truth();
    }
    return estimator(EstimatorSpec::parse(text));
}

Orientation Evaluator::orientation() const {
    return mode == EvaluatorMode::ground_truth ? Orientation::higher_is_better : spec.orientation();
}

double Evaluator::cost_per_query(const BenchmarkDataset& bench) const {
    if (mode == EvaluatorMode::ground_truth) {
        return bench.meta.t_end;
    }
    return spec.T > 0 ? spec.T : bench.meta.t_end;
}

double Evaluator::score(const ArchitectureRecord& record) const {
    if (mode == EvaluatorMode::ground_truth) {
        return record.mean_test_acc();
    }
    double total = 0.0;
    for (const auto& [seed, curve] : record.seeds) {
        total += tsenas::score(curve, spec);
    }
    return total / static_cast<double>(record.seeds.size());
}

std::string Evaluator::label() const {
    return mode == EvaluatorMode::ground_truth ? std::string("gt") : fmt::format("{}@T={}", spec.label(), spec.T);
}

double SearchTrace::final_best_true_test_acc() const {
    return events.empty() ? 0.0 : events.back().best_true_test_acc;
}

double SearchTrace::total_cost() const {
    return events.empty() ? 0.0 : events.back().cumulative_cost;
}

std::optional<double> SearchTrace::cost_to_reach(double level) const {
    for (const auto& event : events) {
        if (event.best_true_test_acc >= level) {
            return event.cumulative_cost;
        }
    }
    return std::nullopt;
}

std::string trace_to_json(const SearchTrace& trace) {
    nlohmann::ordered_json out;
    out["strategy"] = trace.strategy;
    out["evaluator"] = trace.evaluator;
    out["seed"] = trace.seed;
    out["budget"] = trace.budget;
    auto events = nlohmann::ordered_json::array();
    for (const auto& e : trace.events) {
        nlohmann::ordered_json j;
        j["step"] = e.step;
        j["arch_id"] = e.arch_id;
        j["score"] = e.score;
        j["cumulative_cost"] = e.cumulative_cost;
        j["duplicate"] = e.duplicate;
        j["best_score"] = e.best_score;
        j["incumbent"] = e.incumbent_id;
        j["incumbent_test_acc"] = e.incumbent_test_acc;
        j["best_true_test_acc"] = e.best_true_test_acc;
        events.push_back(std::move(j));
    }
    out["events"] = std::move(events);
    out["log"] = trace.log;
    out["summary"] = {{"queries", trace.events.size()},
                      {"total_cost", trace.total_cost()},
                      {"final_best_true_test_acc", trace.final_best_true_test_acc()}};
    return out.dump(2);
}

EncodingSpace::EncodingSpace(const BenchmarkDataset& bench) {
    if (bench.records.empty()) {
        throw ValidationError("search: benchmark has no records");
    }
    const std::size_t length = bench.records.front().encoding.size();
    if (length == 0) {
        throw ValidationError("search: records need non-empty encodings");
    }
    std::vector<std::set<int>> values(length);
    for (std::size_t r = 0; r < bench.records.size(); ++r) {
        const auto& record = bench.records[r];
        if (record.encoding.size() != length) {
            throw ValidationError(fmt::format("search: record '{}' encoding length {} differs from {}",
                                              record.arch_id, record.encoding.size(), length));
        }
        if (!index_.emplace(record.encoding, r).second) {
            throw ValidationError(fmt::format("search: record '{}' repeats another record's encoding", record.arch_id));
        }
        for (std::size_t p = 0; p < length; ++p) {
            values[p].insert(record.encoding[p]);
        }
    }
    for (const auto& v : values) {
        domains_.emplace_back(v.begin(), v.end());
    }
}

std::optional<std::size_t> EncodingSpace::find(const std::vector<int>& encoding) const {
    auto it = index_.find(encoding);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<int> mutate_encoding(const std::vector<int>& parent, const EncodingSpace& space, Rng& rng) {
    std::vector<std::size_t> mutable_positions;
    for (std::size_t p = 0; p < space.positions(); ++p) {
        if (space.domain(p).size() >= 2) {
            mutable_positions.push_back(p);
        }
    }
    if (mutable_positions.empty()) {
        throw ValidationError("mutate: every encoding position has a single value");
    }
    const std::size_t position = mutable_positions[rng.below(mutable_positions.size())];
    std::vector<int> others;
    for (int v : space.domain(position)) {
        if (v != parent[position]) {
            others.push_back(v);
        }
    }
    std::vector<int> child = parent;
    child[position] = others[rng.below(others.size())];
    return child;
}

CategoricalModel::CategoricalModel(const EncodingSpace& space, const std::vector<std::vector<int>>& encodings)
    : space_(&space) {
    probs_.resize(space.positions());
    for (std::size_t p = 0; p < space.positions(); ++p) {
        const auto& dom = space.domain(p);
        std::vector<double> counts(dom.size(), 1.0);
        for (const auto& enc : encodings) {
            const auto it = std::lower_bound(dom.begin(), dom.end(), enc[p]);
            counts[static_cast<std::size_t>(it - dom.begin())] += 1.0;
        }
        const double total = static_cast<double>(encodings.size() + dom.size());
        for (double& c : counts) {
            c /= total;
        }
        probs_[p] = std::move(counts);
    }
}

double CategoricalModel::probability(std::size_t position, int value) const {
    const auto& dom = space_->domain(position);
    const auto it = std::lower_bound(dom.begin(), dom.end(), value);
    if (it == dom.end() || *it != value) {
        return 0.0;
    }
    return probs_[position][static_cast<std::size_t>(it - dom.begin())];
}

double CategoricalModel::log_likelihood(const std::vector<int>& encoding) const {
    double total = 0.0;
    for (std::size_t p = 0; p < probs_.size(); ++p) {
        total += std::log(probability(p, encoding[p]));
    }
    return total;
}

std::vector<int> CategoricalModel::sample(Rng& rng) const {
    std::vector<int> out(probs_.size());
    for (std::size_t p = 0; p < probs_.size(); ++p) {
        const double u = rng.uniform();
        double cumulative = 0.0;
        std::size_t pick = probs_[p].size() - 1;
        for (std::size_t k = 0; k < probs_[p].size(); ++k) {
            cumulative += probs_[p][k];
            if (u < cumulative) {
                pick = k;
                break;
            }
        }
        out[p] = space_->domain(p)[pick];
    }
    return out;
}

GoodBadSplit split_good_bad(const std::vector<double>& scores, Orientation orientation, double gamma) {
    GoodBadSplit split;
    if (scores.empty()) {
        split.degenerate = true;
        return split;
    }
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return orientation == Orientation::lower_is_better ? scores[a] < scores[b] : scores[a] > scores[b];
    });
    const auto n_good = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(scores.size()))));
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_good ? split.good : split.bad).push_back(order[i]);
    }
    const bool all_equal = std::all_of(scores.begin(), scores.end(), [&](double s) { return s == scores.front(); });
    split.degenerate = all_equal || split.bad.empty();
    return split;
}

namespace {

// Cost accounting, score cache and trace bookkeeping shared by all strategies.
class QueryEngine {
public:
    QueryEngine(const BenchmarkDataset& bench, const Evaluator& ev, double budget, std::string strategy,
                std::uint64_t seed)
        : bench_(bench), ev_(ev), cost_(ev.cost_per_query(bench)), scores_(bench.records.size()) {
        if (budget < cost_) {
            throw ValidationError(
                fmt::format("search: budget {} is below the cost of one query ({})", budget, cost_));
        }
        trace_.strategy = std::move(strategy);
        trace_.evaluator = ev.label();
        trace_.seed = seed;
        trace_.budget = budget;
    }

    double query_cost(std::size_t record) const {
        if (scores_[record] && ev_.mode == EvaluatorMode::ground_truth) {
            return 0.0;
        }
        return cost_;
    }

    bool can_afford(std::size_t record) const { return spent_ + query_cost(record) <= trace_.budget; }
    bool seen(std::size_t record) const { return scores_[record].has_value(); }
    std::size_t queries() const { return trace_.events.size(); }

    double query(std::size_t record) {
        const auto& rec = bench_.records[record];
        const bool duplicate = scores_[record].has_value();
        spent_ += query_cost(record);
        if (!duplicate) {
            scores_[record] = ev_.score(rec);
        } else {
            log(fmt::format("re-queried '{}' (cached score{})", rec.arch_id,
                            ev_.mode == EvaluatorMode::ground_truth ? ", no charge" : ", charged"));
        }
        const double score = *scores_[record];
        const double true_acc = rec.mean_test_acc();

        SearchEvent event;
        event.step = static_cast<int>(trace_.events.size()) + 1;
        event.arch_id = rec.arch_id;
        event.score = score;
        event.cumulative_cost = spent_;
        event.duplicate = duplicate;
        const bool improves = !incumbent_ || better(score, incumbent_score_);
        if (improves) {
            incumbent_ = record;
            incumbent_score_ = score;
        }
        event.best_score = incumbent_score_;
        event.incumbent_id = bench_.records[*incumbent_].arch_id;
        event.incumbent_test_acc = bench_.records[*incumbent_].mean_test_acc();
        best_true_ = std::max(best_true_, true_acc);
        event.best_true_test_acc = best_true_;
        trace_.events.push_back(std::move(event));
        return score;
    }

    bool better(double a, double b) const {
        return ev_.orientation() == Orientation::lower_is_better ? a < b : a > b;
    }

    void log(std::string message) { trace_.log.push_back(std::move(message)); }
    SearchTrace finish() { return std::move(trace_); }

private:
    const BenchmarkDataset& bench_;
    const Evaluator& ev_;
    double cost_;
    double spent_ = 0.0;
    std::vector<std::optional<double>> scores_;
    std::optional<std::size_t> incumbent_;
    double incumbent_score_ = 0.0;
    double best_true_ = 0.0;
    SearchTrace trace_;
};

std::optional<std::size_t> random_unseen(const QueryEngine& engine, std::size_t n, Rng& rng) {
    std::vector<std::size_t> unseen;
    for (std::size_t i = 0; i < n; ++i) {
        if (!engine.seen(i)) {
            unseen.push_back(i);
        }
    }
    if (unseen.empty()) {
        return std::nullopt;
    }
    return unseen[rng.below(unseen.size())];
}

}  // namespace

SearchTrace random_search(const BenchmarkDataset& bench, const Evaluator& ev, double budget, std::uint64_t seed) {
    QueryEngine engine(bench, ev, budget, "rs", seed);
    Rng rng(derive_seed(seed, "rs"));
    const auto order = rng.sample_without_replacement(bench.records.size(), bench.records.size());
    for (std::size_t record : order) {
        if (!engine.can_afford(record)) {
            break;
        }
        engine.query(record);
    }
    return engine.finish();
}

SearchTrace regularized_evolution(const BenchmarkDataset& bench, const Evaluator& ev, double budget,
                                  int population_size, int sample_size, std::uint64_t seed) {
    const auto n = bench.records.size();
    if (population_size < 1 || sample_size < 1 || sample_size > population_size) {
        throw ValidationError(
            fmt::format("re: need 1 <= S <= P, got P={} S={}", population_size, sample_size));
    }
    if (static_cast<std::size_t>(population_size) > n) {
        throw ValidationError(fmt::format("re: population {} exceeds {} architectures", population_size, n));
    }
    const double cost = ev.cost_per_query(bench);
    const EncodingSpace space(bench);
    QueryEngine engine(bench, ev, budget, "re", seed);
    Rng rng(derive_seed(seed, "re"));
    const auto affordable = static_cast<int>(std::floor(budget / cost));
    if (affordable < population_size) {
        engine.log(fmt::format("budget pays for {} of the {} initial members; population shrunk", affordable,
                               population_size));
        population_size = affordable;
        sample_size = std::min(sample_size, population_size);
    }

    struct Member {
        std::size_t record;
        double score;
    };
    std::vector<Member> population;  // front is oldest
    for (std::size_t record : rng.sample_without_replacement(n, static_cast<std::size_t>(population_size))) {
        population.push_back({record, engine.query(record)});
    }

    constexpr int kNoveltyAttempts = 32;
    const std::size_t max_queries = 100 * n + static_cast<std::size_t>(population_size);
    while (engine.queries() < max_queries) {
        const auto picks =
            rng.sample_without_replacement(population.size(), static_cast<std::size_t>(sample_size));
        std::size_t parent_pos = picks.front();
        for (std::size_t pos : picks) {
            const double s = population[pos].score;
            const double best = population[parent_pos].score;
            // Equal scores favour the younger member (larger queue position).
            if (engine.better(s, best) || (s == best && pos > parent_pos)) {
                parent_pos = pos;
            }
        }
        const auto& parent = bench.records[population[parent_pos].record].encoding;

        std::optional<std::size_t> child;
        std::optional<std::size_t> fallback;
        for (int attempt = 0; attempt < kNoveltyAttempts && !child; ++attempt) {
            const auto candidate = space.find(mutate_encoding(parent, space, rng));
            if (!candidate) {
                continue;
            }
            if (!engine.seen(*candidate)) {
                child = candidate;
            } else if (!fallback) {
                fallback = candidate;
            }
        }
        if (!child) {
            if (!fallback) {
                engine.log(fmt::format("no mutation of '{}' exists in the benchmark; stopping",
                                       bench.records[population[parent_pos].record].arch_id));
                break;
            }
            engine.log("no novel mutation found; falling back to an already-queried encoding");
            child = fallback;
        }
        if (!engine.can_afford(*child)) {
            break;
        }
        const double score = engine.query(*child);
        population.push_back({*child, score});
        population.erase(population.begin());
    }
    if (engine.queries() >= max_queries) {
        engine.log("query cap reached");
    }
    return engine.finish();
}

SearchTrace tpe_search(const BenchmarkDataset& bench, const Evaluator& ev, double budget, const TpeOptions& options,
                       std::uint64_t seed) {
    const auto n = bench.records.size();
    if (!(options.gamma_split > 0.0 && options.gamma_split < 1.0)) {
        throw ValidationError(fmt::format("tpe: gamma_split={} outside (0, 1)", options.gamma_split));
    }
    if (options.n_init < 1 || options.n_candidates < 1) {
        throw ValidationError("tpe: n_init and n_candidates must be positive");
    }
    const double cost = ev.cost_per_query(bench);
    std::size_t n_init = std::min(static_cast<std::size_t>(options.n_init), n);
    const EncodingSpace space(bench);
    QueryEngine engine(bench, ev, budget, "tpe", seed);
    Rng rng(derive_seed(seed, "tpe"));
    const auto affordable = static_cast<std::size_t>(std::floor(budget / cost));
    if (affordable < n_init) {
        engine.log(fmt::format("budget pays for {} of the {} initial queries", affordable, n_init));
        n_init = affordable;
    }

    std::vector<std::size_t> observed;
    std::vector<double> scores;
    for (std::size_t record : rng.sample_without_replacement(n, n_init)) {
        observed.push_back(record);
        scores.push_back(engine.query(record));
    }

    while (true) {
        std::optional<std::size_t> next;
        const auto split = split_good_bad(scores, ev.orientation(), options.gamma_split);
        if (split.degenerate) {
            next = random_unseen(engine, n, rng);
            if (next) {
                engine.log("good/bad split degenerate; sampling uniformly");
            }
        } else {
            std::vector<std::vector<int>> good;
            std::vector<std::vector<int>> bad;
            for (std::size_t i : split.good) {
                good.push_back(bench.records[observed[i]].encoding);
            }
            for (std::size_t i : split.bad) {
                bad.push_back(bench.records[observed[i]].encoding);
            }
            const CategoricalModel good_model(space, good);
            const CategoricalModel bad_model(space, bad);
            double best_ratio = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < options.n_candidates; ++c) {
                const auto candidate = good_model.sample(rng);
                const auto record = space.find(candidate);
                if (!record || engine.seen(*record)) {
                    continue;
                }
                const double ratio = good_model.log_likelihood(candidate) - bad_model.log_likelihood(candidate);
                if (ratio > best_ratio) {
                    best_ratio = ratio;
                    next = record;
                }
            }
            if (!next) {
                next = random_unseen(engine, n, rng);
                if (next) {
                    engine.log("no unseen candidate sampled; falling back to a uniform draw");
                }
            }
        }
        if (!next) {
            engine.log("every architecture has been queried");
            break;
        }
        if (!engine.can_afford(*next)) {
            break;
        }
        observed.push_back(*next);
        scores.push_back(engine.query(*next));
    }
    return engine.finish();
}

StrategySpec StrategySpec::parse(const std::string& name) {
    if (name != "rs" && name != "re" && name != "tpe") {
        throw ValidationError(fmt::format("unknown strategy '{}' (valid: rs, re, tpe)", name));
    }
    StrategySpec spec;
    spec.name = name;
    return spec;
}

SearchTrace run_strategy(const BenchmarkDataset& bench, const Evaluator& ev, const StrategySpec& strategy,
                         double budget, std::uint64_t seed) {
    if (strategy.name == "rs") {
        return random_search(bench, ev, budget, seed);
    }
    if (strategy.name == "re") {
        return regularized_evolution(bench, ev, budget, strategy.population_size, strategy.sample_size, seed);
    }
    if (strategy.name == "tpe") {
        return tpe_search(bench, ev, budget, strategy.tpe, seed);
    }
    throw ValidationError(fmt::format("unknown strategy '{}' (valid: rs, re, tpe)", strategy.name));
}

std::optional<double> value_at_cost(const SearchTrace& trace, double cost) {
    std::optional<double> value;
    for (const auto& event : trace.events) {
        if (event.cumulative_cost > cost) {
            break;
        }
        value = event.best_true_test_acc;
    }
    return value;
}

std::string ComparisonReport::to_csv() const {
    std::string out = "strategy,evaluator,cost,mean_acc,stderr\n";
    for (const auto& cell : cells) {
        for (const auto& point : cell.curve) {
            out += fmt::format("{},{},{},{},{}\n", cell.strategy, cell.evaluator, point.cost, point.mean_acc,
                               point.stderr_);
        }
    }
    return out;
}

ComparisonReport compare_strategies(const BenchmarkDataset& bench, const std::vector<Evaluator>& evaluators,
                                    const std::vector<StrategySpec>& strategies, double budget, int n_seeds,
                                    std::uint64_t master_seed, int grid_points, unsigned jobs) {
    if (evaluators.empty() || strategies.empty()) {
        throw ValidationError("compare: need at least one evaluator and one strategy");
    }
    if (n_seeds < 1 || grid_points < 1) {
        throw ValidationError("compare: n_seeds and grid_points must be positive");
    }
    ComparisonReport report;
    report.budget = budget;
    for (const auto& strategy : strategies) {
        for (const auto& ev : evaluators) {
            ComparisonCell cell;
            cell.strategy = strategy.name;
            cell.evaluator = ev.label();
            cell.traces.resize(static_cast<std::size_t>(n_seeds));
            report.cells.push_back(std::move(cell));
        }
    }
    const std::size_t per_cell = static_cast<std::size_t>(n_seeds);
    const std::size_t total = report.cells.size() * per_cell;
    parallel_for(total, jobs, [&](std::size_t i) {
        const std::size_t cell = i / per_cell;
        const std::size_t s = i % per_cell;
        const auto& strategy = strategies[cell / evaluators.size()];
        const auto& ev = evaluators[cell % evaluators.size()];
        report.cells[cell].traces[s] = run_strategy(bench, ev, strategy, budget, derive_seed(master_seed, "search", s));
    });

    for (auto& cell : report.cells) {
        for (int g = 1; g <= grid_points; ++g) {
            const double cost = budget * g / grid_points;
            std::vector<double> values;
            for (const auto& trace : cell.traces) {
                if (auto v = value_at_cost(trace, cost)) {
                    values.push_back(*v);
                }
            }
            if (values.size() != cell.traces.size()) {
                continue;
            }
            const auto agg = aggregate(values);
            cell.curve.push_back({cost, agg.mean, agg.stderr_});
        }
    }
    return report;
}

}  // namespace tsenas

#include "tsenas/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "tsenas/errors.hpp"
#include "tsenas/search.hpp"

namespace tsenas {

using Json = nlohmann::ordered_json;

namespace {

/// Strict view of one JSON object: every read field is required and
/// fields nobody read are rejected by finish().
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ValidationError(fmt::format("config: {} must be an object", where()));
        }
    }

    Reader child(const std::string& key) { return Reader(field(key), join(key)); }

    int integer(const std::string& key) {
        const auto& v = field(key);
        if (!v.is_number_integer()) {
            throw ValidationError(fmt::format("config: {} must be an integer", join(key)));
        }
        return v.get<int>();
    }

    std::uint64_t seed(const std::string& key) {
        const auto& v = field(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ValidationError(fmt::format("config: {} must be a non-negative integer", join(key)));
        }
        return v.get<std::uint64_t>();
    }

    double number(const std::string& key) {
        const auto& v = field(key);
        if (!v.is_number()) {
            throw ValidationError(fmt::format("config: {} must be a number", join(key)));
        }
        return v.get<double>();
    }

    std::string text(const std::string& key) {
        const auto& v = field(key);
        if (!v.is_string()) {
            throw ValidationError(fmt::format("config: {} must be a string", join(key)));
        }
        return v.get<std::string>();
    }

    std::vector<int> integers(const std::string& key) {
        const auto& v = array(key);
        std::vector<int> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer()) {
                throw ValidationError(fmt::format("config: {}[{}] must be an integer", join(key), i));
            }
            out.push_back(v[i].get<int>());
        }
        return out;
    }

    std::vector<std::string> texts(const std::string& key) {
        const auto& v = array(key);
        std::vector<std::string> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_string()) {
                throw ValidationError(fmt::format("config: {}[{}] must be a string", join(key), i));
            }
            out.push_back(v[i].get<std::string>());
        }
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (used_.count(key) == 0) {
                throw ValidationError(fmt::format("config: unknown field {}", join(key)));
            }
        }
    }

    const std::string& path() const { return path_; }
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const Json& field(const std::string& key) {
        used_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) {
            throw ValidationError(fmt::format("config: missing required field {}", join(key)));
        }
        return *it;
    }

    const Json& array(const std::string& key) {
        const auto& v = field(key);
        if (!v.is_array() || v.empty()) {
            throw ValidationError(fmt::format("config: {} must be a non-empty array", join(key)));
        }
        return v;
    }

    std::string where() const { return path_.empty() ? "top level" : path_; }

    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

Reader top_level(const Json& j) {
    Reader r(j, "");
    if (r.integer("schema") != kConfigSchema) {
        throw ValidationError(fmt::format("config: schema must be {}", kConfigSchema));
    }
    return r;
}

void require(bool ok, const std::string& field, const std::string& rule) {
    if (!ok) {
        throw ValidationError(fmt::format("config: {} {}", field, rule));
    }
}

SyntheticDataConfig read_data(Reader r) {
    SyntheticDataConfig d;
    d.dim = r.integer("dim");
    d.classes = r.integer("classes");
    d.clusters_per_class = r.integer("clusters_per_class");
    d.n_train = r.integer("n_train");
    d.n_val = r.integer("n_val");
    d.n_test = r.integer("n_test");
    d.difficulty = r.number("difficulty");
    r.finish();
    require(d.dim >= 1, r.join("dim"), "must be at least 1");
    require(d.classes >= 2, r.join("classes"), "must be at least 2");
    require(d.clusters_per_class >= 1, r.join("clusters_per_class"), "must be at least 1");
    require(d.n_train >= 1 && d.n_val >= 1 && d.n_test >= 1, r.join("n_train"),
            "and the other split sizes must be positive");
    require(d.difficulty > 0.0, r.join("difficulty"), "must be positive");
    return d;
}

Json write_data(const SyntheticDataConfig& d) {
    Json j;
    j["dim"] = d.dim;
    j["classes"] = d.classes;
    j["clusters_per_class"] = d.clusters_per_class;
    j["n_train"] = d.n_train;
    j["n_val"] = d.n_val;
    j["n_test"] = d.n_test;
    j["difficulty"] = d.difficulty;
    return j;
}

LrSchedule parse_schedule(const std::string& name, const std::string& field) {
    if (name == "constant") {
        return LrSchedule::constant;
    }
    if (name == "cosine") {
        return LrSchedule::cosine;
    }
    throw ValidationError(fmt::format("config: {} must be constant or cosine, got '{}'", field, name));
}

TrainConfig read_train(Reader r) {
    TrainConfig t;
    t.epochs = r.integer("epochs");
    t.batch_size = r.integer("batch_size");
    t.learning_rate = r.number("learning_rate");
    t.schedule = parse_schedule(r.text("schedule"), r.join("schedule"));
    t.momentum = r.number("momentum");
    t.weight_decay = r.number("weight_decay");
    r.finish();
    try {
        t.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("config: {}: {}", r.path(), e.what()));
    }
    return t;
}

Json write_train(const TrainConfig& t) {
    Json j;
    j["epochs"] = t.epochs;
    j["batch_size"] = t.batch_size;
    j["learning_rate"] = t.learning_rate;
    j["schedule"] = t.schedule == LrSchedule::cosine ? "cosine" : "constant";
    j["momentum"] = t.momentum;
    j["weight_decay"] = t.weight_decay;
    return j;
}

}  // namespace

Json read_config_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(fmt::format("config: cannot open {}", path.string()));
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    Json j;
    try {
        j = Json::parse(buffer.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(fmt::format("config: {}: {}", path.string(), e.what()));
    }
    if (j.is_object() && j.contains("manifest_schema")) {
        if (!j.contains("config")) {
            throw ValidationError(fmt::format("config: manifest {} has no config snapshot", path.string()));
        }
        return j["config"];
    }
    return j;
}

CellOp parse_cell_op(const std::string& name) {
    for (CellOp op : {CellOp::identity, CellOp::zero, CellOp::linear, CellOp::linear_relu}) {
        if (name == to_string(op)) {
            return op;
        }
    }
    throw ValidationError(
        fmt::format("unknown cell operation '{}' (expected identity, zero, linear or linear_relu)", name));
}

std::vector<ToyArchSpec> ToySpaceConfig::enumerate() const {
    std::vector<Activation> acts;
    for (const auto& a : activations) {
        acts.push_back(parse_activation(a));
    }
    SpaceLayout l;
    if (layout == "uniform") {
        l = SpaceLayout::uniform;
    } else if (layout == "per_layer") {
        l = SpaceLayout::per_layer;
    } else {
        throw ValidationError(fmt::format("config: space.layout must be uniform or per_layer, got '{}'", layout));
    }
    return enumerate_toy_space(widths, depths, acts, l);
}

ToyConfig ToyConfig::from_json(const Json& j) {
    Reader r = top_level(j);
    ToyConfig c;
    c.name = r.text("name");
    c.master_seed = r.seed("master_seed");
    c.seeds = r.integers("seeds");
    {
        Reader s = r.child("space");
        c.space.layout = s.text("layout");
        c.space.depths = s.integers("depths");
        c.space.widths = s.integers("widths");
        c.space.activations = s.texts("activations");
        s.finish();
    }
    c.data = read_data(r.child("data"));
    c.train = read_train(r.child("train"));
    r.finish();
    c.space.enumerate();
    return c;
}

Json ToyConfig::to_json() const {
    Json j;
    j["schema"] = kConfigSchema;
    j["name"] = name;
    j["master_seed"] = master_seed;
    j["seeds"] = seeds;
    j["space"]["layout"] = space.layout;
    j["space"]["depths"] = space.depths;
    j["space"]["widths"] = space.widths;
    j["space"]["activations"] = space.activations;
    j["data"] = write_data(data);
    j["train"] = write_train(train);
    return j;
}

SyntheticDataConfig ToyConfig::data_config() const {
    auto d = data;
    d.seed = derive_seed(master_seed, "data");
    return d;
}

TrainConfig ToyConfig::train_config() const {
    auto t = train;
    t.seed = derive_seed(master_seed, "train");
    return t;
}

RankevalConfig RankevalConfig::from_json(const Json& j) {
    Reader r = top_level(j);
    RankevalConfig c;
    c.benchmark = r.text("benchmark");
    c.estimators = r.texts("estimators");
    c.budgets = r.integers("budgets");
    r.finish();
    for (std::size_t i = 0; i < c.budgets.size(); ++i) {
        require(c.budgets[i] >= 1, fmt::format("budgets[{}]", i), "must be at least 1");
    }
    for (const auto& e : c.estimators) {
        EstimatorSpec::parse(e).validate();
    }
    return c;
}

Json RankevalConfig::to_json() const {
    Json j;
    j["schema"] = kConfigSchema;
    j["benchmark"] = benchmark;
    j["estimators"] = estimators;
    j["budgets"] = budgets;
    return j;
}

BudgetConfig BudgetConfig::from_json(const Json& j) {
    Reader r = top_level(j);
    BudgetConfig c;
    c.benchmark = r.text("benchmark");
    c.sample_sizes = r.integers("sample_sizes");
    c.repeats = r.integer("repeats");
    c.threshold = r.number("threshold");
    c.master_seed = r.seed("master_seed");
    r.finish();
    require(c.repeats >= 1, "repeats", "must be at least 1");
    for (std::size_t i = 0; i < c.sample_sizes.size(); ++i) {
        require(c.sample_sizes[i] >= 1, fmt::format("sample_sizes[{}]", i), "must be at least 1");
    }
    return c;
}

Json BudgetConfig::to_json() const {
    Json j;
    j["schema"] = kConfigSchema;
    j["benchmark"] = benchmark;
    j["sample_sizes"] = sample_sizes;
    j["repeats"] = repeats;
    j["threshold"] = threshold;
    j["master_seed"] = master_seed;
    return j;
}

SearchConfig SearchConfig::from_json(const Json& j) {
    Reader r = top_level(j);
    SearchConfig c;
    c.benchmark = r.text("benchmark");
    c.strategies = r.texts("strategies");
    c.evaluators = r.texts("evaluators");
    c.budget_fraction = r.number("budget_fraction");
    c.n_seeds = r.integer("n_seeds");
    c.master_seed = r.seed("master_seed");
    c.grid_points = r.integer("grid_points");
    {
        Reader re = r.child("re");
        c.population_size = re.integer("population_size");
        c.sample_size = re.integer("sample_size");
        re.finish();
    }
    {
        Reader tpe = r.child("tpe");
        c.n_init = tpe.integer("n_init");
        c.tpe_gamma = tpe.number("gamma");
        c.tpe_candidates = tpe.integer("candidates");
        tpe.finish();
    }
    r.finish();
    require(c.budget_fraction > 0.0, "budget_fraction", "must be positive");
    require(c.n_seeds >= 1, "n_seeds", "must be at least 1");
    require(c.grid_points >= 1, "grid_points", "must be at least 1");
    require(c.population_size >= 1, "re.population_size", "must be at least 1");
    require(c.sample_size >= 1 && c.sample_size <= c.population_size, "re.sample_size",
            "must be in [1, population_size]");
    require(c.n_init >= 1, "tpe.n_init", "must be at least 1");
    require(c.tpe_gamma > 0.0 && c.tpe_gamma < 1.0, "tpe.gamma", "must be in (0, 1)");
    require(c.tpe_candidates >= 1, "tpe.candidates", "must be at least 1");
    for (const auto& s : c.strategies) {
        StrategySpec::parse(s);
    }
    for (const auto& e : c.evaluators) {
        Evaluator::parse(e);
    }
    return c;
}

Json SearchConfig::to_json() const {
    Json j;
    j["schema"] = kConfigSchema;
    j["benchmark"] = benchmark;
    j["strategies"] = strategies;
    j["evaluators"] = evaluators;
    j["budget_fraction"] = budget_fraction;
    j["n_seeds"] = n_seeds;
    j["master_seed"] = master_seed;
    j["grid_points"] = grid_points;
    j["re"]["population_size"] = population_size;
    j["re"]["sample_size"] = sample_size;
    j["tpe"]["n_init"] = n_init;
    j["tpe"]["gamma"] = tpe_gamma;
    j["tpe"]["candidates"] = tpe_candidates;
    return j;
}

DiffNasRunConfig DiffNasRunConfig::from_json(const Json& j) {
    Reader r = top_level(j);
    DiffNasRunConfig c;
    c.master_seed = r.seed("master_seed");
    c.n_seeds = r.integer("n_seeds");
    c.algorithms = r.texts("algorithms");
    c.nodes = r.integer("nodes");
    c.menu = r.texts("menu");
    c.data = read_data(r.child("data"));
    {
        Reader s = r.child("search");
        c.K = s.integer("K");
        c.epochs = s.integer("epochs");
        c.batch_size = s.integer("batch_size");
        c.lr_weights = s.number("lr_weights");
        c.lr_alpha = s.number("lr_alpha");
        s.finish();
    }
    c.retrain = read_train(r.child("retrain"));
    r.finish();
    require(c.n_seeds >= 1, "n_seeds", "must be at least 1");
    require(c.nodes >= 1, "nodes", "must be at least 1");
    for (const auto& a : c.algorithms) {
        require(a == "darts" || a == "darts-tse", "algorithms", fmt::format("entry '{}' must be darts or darts-tse", a));
    }
    c.menu_ops();
    c.run_config(0).validate();
    return c;
}

Json DiffNasRunConfig::to_json() const {
    Json j;
    j["schema"] = kConfigSchema;
    j["master_seed"] = master_seed;
    j["n_seeds"] = n_seeds;
    j["algorithms"] = algorithms;
    j["nodes"] = nodes;
    j["menu"] = menu;
    j["data"] = write_data(data);
    j["search"]["K"] = K;
    j["search"]["epochs"] = epochs;
    j["search"]["batch_size"] = batch_size;
    j["search"]["lr_weights"] = lr_weights;
    j["search"]["lr_alpha"] = lr_alpha;
    j["retrain"] = write_train(retrain);
    return j;
}

std::vector<CellOp> DiffNasRunConfig::menu_ops() const {
    std::vector<CellOp> ops;
    for (const auto& m : menu) {
        ops.push_back(parse_cell_op(m));
    }
    return ops;
}

SyntheticDataConfig DiffNasRunConfig::data_config() const {
    auto d = data;
    d.seed = derive_seed(master_seed, "data");
    return d;
}

DiffNasConfig DiffNasRunConfig::run_config(int seed_index) const {
    DiffNasConfig cfg;
    cfg.K = K;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.lr_weights = lr_weights;
    cfg.lr_alpha = lr_alpha;
    cfg.seed = derive_seed(master_seed, "diffnas", static_cast<std::uint64_t>(seed_index));
    cfg.retrain = retrain;
    cfg.retrain.seed = derive_seed(master_seed, "retrain");
    return cfg;
}

}  // namespace tsenas

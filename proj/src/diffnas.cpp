#include "tsenas/diffnas.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "tsenas/errors.hpp"

namespace tsenas {

const char* to_string(CellOp op) {
    switch (op) {
        case CellOp::identity:
            return "identity";
        case CellOp::zero:
            return "zero";
        case CellOp::linear:
            return "linear";
        case CellOp::linear_relu:
            return "linear_relu";
    }
    return "?";
}

namespace {

constexpr std::size_t kNoMatrix = static_cast<std::size_t>(-1);

bool has_matrix(CellOp op) { return op == CellOp::linear || op == CellOp::linear_relu; }

struct Layout {
    std::vector<std::vector<std::size_t>> matrix;  // [edge][menu index] -> offset or kNoMatrix
    std::size_t classifier = 0;
    std::size_t bias = 0;
    std::size_t total = 0;
};

Layout layout_of(int nodes, int dim, int classes, const std::vector<CellOp>& menu) {
    Layout layout;
    const auto square = static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim);
    const auto edges = static_cast<std::size_t>(nodes * (nodes + 1) / 2);
    std::size_t offset = 0;
    layout.matrix.assign(edges, std::vector<std::size_t>(menu.size(), kNoMatrix));
    for (std::size_t e = 0; e < edges; ++e) {
        for (std::size_t o = 0; o < menu.size(); ++o) {
            if (has_matrix(menu[o])) {
                layout.matrix[e][o] = offset;
                offset += square;
            }
        }
    }
    layout.classifier = offset;
    offset += static_cast<std::size_t>(classes) * static_cast<std::size_t>(dim);
    layout.bias = offset;
    offset += static_cast<std::size_t>(classes);
    layout.total = offset;
    return layout;
}

void check_cell(const ToyCell& cell) {
    if (cell.nodes < 1 || cell.dim < 1 || cell.classes < 2 || cell.menu.empty()) {
        throw ValidationError("cell: nodes, dim and menu must be non-empty and classes at least 2");
    }
    const auto layout = layout_of(cell.nodes, cell.dim, cell.classes, cell.menu);
    if (cell.weights.size() != layout.total) {
        throw ValidationError(fmt::format("cell: {} weights, expected {}", cell.weights.size(), layout.total));
    }
    if (cell.alpha.size() != cell.edge_count()) {
        throw ValidationError(fmt::format("cell: {} alpha vectors, expected {}", cell.alpha.size(), cell.edge_count()));
    }
    for (const auto& a : cell.alpha) {
        if (a.size() != cell.menu.size()) {
            throw ValidationError("cell: every alpha vector needs one entry per menu operation");
        }
        for (double v : a) {
            if (!std::isfinite(v)) {
                throw NumericError("cell: non-finite alpha");
            }
        }
    }
    if (cell.fixed_ops) {
        if (cell.fixed_ops->size() != cell.edge_count()) {
            throw ValidationError("cell: discrete cell needs one op per edge");
        }
        for (int op : *cell.fixed_ops) {
            if (op < 0 || op >= static_cast<int>(cell.menu.size())) {
                throw ValidationError(fmt::format("cell: op index {} outside the menu", op));
            }
        }
    }
}

std::vector<double> random_weights(const Layout& layout, int dim, Rng& rng) {
    std::vector<double> w(layout.total, 0.0);
    const double bound = std::sqrt(3.0 / static_cast<double>(dim));
    for (std::size_t k = 0; k < layout.bias; ++k) {
        w[k] = rng.uniform(-bound, bound);
    }
    return w;
}

// Matrix-vector product: out = M x, M row-major dim x dim.
void matvec(const double* m, std::span<const double> x, std::vector<double>& out) {
    const std::size_t n = x.size();
    out.assign(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            acc += m[r * n + c] * x[c];
        }
        out[r] = acc;
    }
}

struct Forward {
    std::vector<std::vector<double>> phi;                    // nodes 0..J
    std::vector<std::vector<std::vector<double>>> op_out;    // [edge][op] -> o(phi_i)
    std::vector<std::vector<std::vector<double>>> pre_relu;  // [edge][op] -> A phi_i for linear_relu
    std::vector<double> summed;                              // sum of nodes 1..J
    std::vector<double> logits;
};

void forward(const ToyCell& cell, const Layout& layout, const std::vector<std::vector<double>>& mix,
             std::span<const double> input, Forward& f) {
    const auto dim = static_cast<std::size_t>(cell.dim);
    const auto edges = cell.edges();
    f.phi.assign(static_cast<std::size_t>(cell.nodes) + 1, std::vector<double>(dim, 0.0));
    f.phi[0].assign(input.begin(), input.end());
    f.op_out.assign(edges.size(), std::vector<std::vector<double>>(cell.menu.size()));
    f.pre_relu.assign(edges.size(), std::vector<std::vector<double>>(cell.menu.size()));
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [i, j] = edges[e];
        const auto& src = f.phi[static_cast<std::size_t>(i)];
        auto& dst = f.phi[static_cast<std::size_t>(j)];
        for (std::size_t o = 0; o < cell.menu.size(); ++o) {
            const double p = mix[e][o];
            if (p == 0.0 && cell.fixed_ops) {
                continue;
            }
            auto& out = f.op_out[e][o];
            switch (cell.menu[o]) {
                case CellOp::identity:
                    out = src;
                    break;
                case CellOp::zero:
                    out.assign(dim, 0.0);
                    break;
                case CellOp::linear:
                    matvec(cell.weights.data() + layout.matrix[e][o], src, out);
                    break;
                case CellOp::linear_relu: {
                    auto& pre = f.pre_relu[e][o];
                    matvec(cell.weights.data() + layout.matrix[e][o], src, pre);
                    out.resize(dim);
                    for (std::size_t k = 0; k < dim; ++k) {
                        out[k] = std::max(pre[k], 0.0);
                    }
                    break;
                }
            }
            for (std::size_t k = 0; k < dim; ++k) {
                dst[k] += p * out[k];
            }
        }
    }
    f.summed.assign(dim, 0.0);
    for (int j = 1; j <= cell.nodes; ++j) {
        for (std::size_t k = 0; k < dim; ++k) {
            f.summed[k] += f.phi[static_cast<std::size_t>(j)][k];
        }
    }
    const auto classes = static_cast<std::size_t>(cell.classes);
    f.logits.assign(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
        double acc = cell.weights[layout.bias + c];
        for (std::size_t k = 0; k < dim; ++k) {
            acc += cell.weights[layout.classifier + c * dim + k] * f.summed[k];
        }
        f.logits[c] = acc;
    }
}

double cross_entropy(const std::vector<double>& logits, int label, std::vector<double>* probs) {
    const double shift = *std::max_element(logits.begin(), logits.end());
    double norm = 0.0;
    for (double v : logits) {
        norm += std::exp(v - shift);
    }
    if (probs != nullptr) {
        probs->resize(logits.size());
        for (std::size_t k = 0; k < logits.size(); ++k) {
            (*probs)[k] = std::exp(logits[k] - shift) / norm;
        }
    }
    return std::log(norm) + shift - logits[static_cast<std::size_t>(label)];
}

double max_softmax_deviation(const ToyCell& cell) {
    double worst = 0.0;
    for (const auto& row : cell.op_weights()) {
        double total = 0.0;
        for (double p : row) {
            total += p;
        }
        worst = std::max(worst, std::abs(total - 1.0));
    }
    return worst;
}

void check_finite(const CellGradients& g, const char* what) {
    if (!std::isfinite(g.loss)) {
        throw NumericError(fmt::format("{}: non-finite loss", what));
    }
    for (double v : g.weights) {
        if (!std::isfinite(v)) {
            throw NumericError(fmt::format("{}: non-finite weight gradient", what));
        }
    }
    for (const auto& row : g.alpha) {
        for (double v : row) {
            if (!std::isfinite(v)) {
                throw NumericError(fmt::format("{}: non-finite alpha gradient", what));
            }
        }
    }
}

// Successive minibatches over epochs 1..T, reshuffled per epoch.
class BatchStream {
public:
    BatchStream(std::size_t n, int batch_size, std::uint64_t seed)
        : n_(n), batch_(static_cast<std::size_t>(batch_size)), seed_(seed) {}

    std::vector<std::size_t> next() {
        if (order_.empty() || cursor_ + batch_ > order_.size()) {
            ++epoch_;
            order_ = epoch_order(n_, seed_, epoch_);
            cursor_ = 0;
        }
        std::vector<std::size_t> rows(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                      order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
        cursor_ += batch_;
        return rows;
    }

private:
    std::size_t n_;
    std::size_t batch_;
    std::uint64_t seed_;
    int epoch_ = 0;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

std::string encoding_key(const std::vector<int>& ops) {
    return fmt::format("{}", fmt::join(ops, "-"));
}

class RetrainCache {
public:
    RetrainCache(const ToyCell& shape, const SyntheticDataset& data, const TrainConfig& cfg)
        : shape_(shape), data_(data), cfg_(cfg) {}

    double get(const std::vector<int>& ops) {
        const auto key = encoding_key(ops);
        if (auto it = cache_.find(key); it != cache_.end()) {
            return it->second;
        }
        const double acc = retrain_discrete(shape_, ops, data_, cfg_);
        cache_.emplace(key, acc);
        return acc;
    }

private:
    const ToyCell& shape_;
    const SyntheticDataset& data_;
    const TrainConfig& cfg_;
    std::map<std::string, double> cache_;
};

}  // namespace

ToyCell ToyCell::create(int nodes, int dim, int classes, std::vector<CellOp> menu, Rng& rng) {
    ToyCell cell;
    cell.nodes = nodes;
    cell.dim = dim;
    cell.classes = classes;
    cell.menu = std::move(menu);
    if (nodes < 1 || dim < 1 || classes < 2 || cell.menu.empty()) {
        throw ValidationError("cell: nodes, dim and menu must be non-empty and classes at least 2");
    }
    cell.alpha.assign(cell.edge_count(), std::vector<double>(cell.menu.size(), 0.0));
    for (auto& row : cell.alpha) {
        for (double& a : row) {
            a = 1e-3 * rng.normal();
        }
    }
    cell.weights = random_weights(layout_of(nodes, dim, classes, cell.menu), dim, rng);
    return cell;
}

ToyCell ToyCell::discrete(int nodes, int dim, int classes, std::vector<CellOp> menu, std::vector<int> ops, Rng& rng) {
    ToyCell cell;
    cell.nodes = nodes;
    cell.dim = dim;
    cell.classes = classes;
    cell.menu = std::move(menu);
    cell.alpha.assign(cell.edge_count(), std::vector<double>(cell.menu.size(), 0.0));
    cell.weights = random_weights(layout_of(nodes, dim, classes, cell.menu), dim, rng);
    cell.fixed_ops = std::move(ops);
    check_cell(cell);
    return cell;
}

std::vector<std::pair<int, int>> ToyCell::edges() const {
    std::vector<std::pair<int, int>> out;
    for (int j = 1; j <= nodes; ++j) {
        for (int i = 0; i < j; ++i) {
            out.emplace_back(i, j);
        }
    }
    return out;
}

std::vector<std::vector<double>> ToyCell::op_weights() const {
    std::vector<std::vector<double>> mix(alpha.size());
    for (std::size_t e = 0; e < alpha.size(); ++e) {
        mix[e].assign(menu.size(), 0.0);
        if (fixed_ops) {
            mix[e][static_cast<std::size_t>((*fixed_ops)[e])] = 1.0;
            continue;
        }
        const double shift = *std::max_element(alpha[e].begin(), alpha[e].end());
        double norm = 0.0;
        for (std::size_t o = 0; o < menu.size(); ++o) {
            mix[e][o] = std::exp(alpha[e][o] - shift);
            norm += mix[e][o];
        }
        for (double& p : mix[e]) {
            p /= norm;
        }
    }
    return mix;
}

std::vector<std::vector<double>> mixed_op_forward(const ToyCell& cell, std::span<const double> input) {
    check_cell(cell);
    if (input.size() != static_cast<std::size_t>(cell.dim)) {
        throw ValidationError(fmt::format("cell: input has {} features, expected {}", input.size(), cell.dim));
    }
    Forward f;
    forward(cell, layout_of(cell.nodes, cell.dim, cell.classes, cell.menu), cell.op_weights(), input, f);
    for (const auto& node : f.phi) {
        for (double v : node) {
            if (!std::isfinite(v)) {
                throw NumericError("cell: non-finite node activation");
            }
        }
    }
    return f.phi;
}

CellGradients cell_loss_and_gradients(const ToyCell& cell, const DataSplit& split, std::span<const std::size_t> rows) {
    check_cell(cell);
    if (split.dim != cell.dim) {
        throw ValidationError(fmt::format("cell: data has {} features, cell expects {}", split.dim, cell.dim));
    }
    if (rows.empty()) {
        throw ValidationError("cell: empty minibatch");
    }
    const auto layout = layout_of(cell.nodes, cell.dim, cell.classes, cell.menu);
    const auto mix = cell.op_weights();
    const auto edges = cell.edges();
    const auto dim = static_cast<std::size_t>(cell.dim);
    const auto classes = static_cast<std::size_t>(cell.classes);
    const double scale = 1.0 / static_cast<double>(rows.size());

    CellGradients g;
    g.weights.assign(layout.total, 0.0);
    g.alpha.assign(edges.size(), std::vector<double>(cell.menu.size(), 0.0));
    // dL/dp per edge and op, accumulated over the batch; mapped to alpha at the end.
    std::vector<std::vector<double>> d_mix(edges.size(), std::vector<double>(cell.menu.size(), 0.0));

    Forward f;
    std::vector<double> probs;
    std::vector<std::vector<double>> d_phi;
    std::vector<double> masked(dim);
    for (std::size_t r : rows) {
        forward(cell, layout, mix, split.row(r), f);
        g.loss += cross_entropy(f.logits, split.labels[r], &probs);

        std::vector<double> d_logits(classes);
        for (std::size_t c = 0; c < classes; ++c) {
            d_logits[c] = probs[c] * scale;
        }
        d_logits[static_cast<std::size_t>(split.labels[r])] -= scale;

        std::vector<double> d_summed(dim, 0.0);
        for (std::size_t c = 0; c < classes; ++c) {
            g.weights[layout.bias + c] += d_logits[c];
            for (std::size_t k = 0; k < dim; ++k) {
                g.weights[layout.classifier + c * dim + k] += d_logits[c] * f.summed[k];
                d_summed[k] += cell.weights[layout.classifier + c * dim + k] * d_logits[c];
            }
        }
        d_phi.assign(static_cast<std::size_t>(cell.nodes) + 1, std::vector<double>(dim, 0.0));
        for (int j = 1; j <= cell.nodes; ++j) {
            d_phi[static_cast<std::size_t>(j)] = d_summed;
        }
        // Later edges feed later nodes, so walking edges backwards completes
        // d_phi[j] before any edge out of node j is processed.
        for (std::size_t e = edges.size(); e-- > 0;) {
            const auto [i, j] = edges[e];
            const auto& upstream = d_phi[static_cast<std::size_t>(j)];
            const auto& src = f.phi[static_cast<std::size_t>(i)];
            auto& d_src = d_phi[static_cast<std::size_t>(i)];
            for (std::size_t o = 0; o < cell.menu.size(); ++o) {
                const double p = mix[e][o];
                if (cell.fixed_ops && p == 0.0) {
                    continue;
                }
                const auto& out = f.op_out[e][o];
                double dot = 0.0;
                for (std::size_t k = 0; k < dim; ++k) {
                    dot += upstream[k] * out[k];
                }
                d_mix[e][o] += dot;
                switch (cell.menu[o]) {
                    case CellOp::identity:
                        for (std::size_t k = 0; k < dim; ++k) {
                            d_src[k] += p * upstream[k];
                        }
                        break;
                    case CellOp::zero:
                        break;
                    case CellOp::linear:
                    case CellOp::linear_relu: {
                        const std::size_t base = layout.matrix[e][o];
                        for (std::size_t k = 0; k < dim; ++k) {
                            const bool open = cell.menu[o] == CellOp::linear || f.pre_relu[e][o][k] > 0.0;
                            masked[k] = open ? p * upstream[k] : 0.0;
                        }
                        for (std::size_t row = 0; row < dim; ++row) {
                            const double m = masked[row];
                            if (m == 0.0) {
                                continue;
                            }
                            for (std::size_t col = 0; col < dim; ++col) {
                                g.weights[base + row * dim + col] += m * src[col];
                                d_src[col] += cell.weights[base + row * dim + col] * m;
                            }
                        }
                        break;
                    }
                }
            }
        }
    }
    g.loss *= scale;
    if (!cell.fixed_ops) {
        for (std::size_t e = 0; e < edges.size(); ++e) {
            double expected = 0.0;
            for (std::size_t o = 0; o < cell.menu.size(); ++o) {
                expected += mix[e][o] * d_mix[e][o];
            }
            for (std::size_t o = 0; o < cell.menu.size(); ++o) {
                g.alpha[e][o] = mix[e][o] * (d_mix[e][o] - expected);
            }
        }
    }
    return g;
}

double cell_loss(const ToyCell& cell, const DataSplit& split, std::span<const std::size_t> rows) {
    check_cell(cell);
    const auto layout = layout_of(cell.nodes, cell.dim, cell.classes, cell.menu);
    const auto mix = cell.op_weights();
    Forward f;
    double total = 0.0;
    for (std::size_t r : rows) {
        forward(cell, layout, mix, split.row(r), f);
        total += cross_entropy(f.logits, split.labels[r], nullptr);
    }
    return total / static_cast<double>(rows.size());
}

double cell_accuracy(const ToyCell& cell, const DataSplit& split) {
    check_cell(cell);
    const auto layout = layout_of(cell.nodes, cell.dim, cell.classes, cell.menu);
    const auto mix = cell.op_weights();
    Forward f;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < split.size(); ++r) {
        forward(cell, layout, mix, split.row(r), f);
        const auto best = std::max_element(f.logits.begin(), f.logits.end()) - f.logits.begin();
        if (best == split.labels[r]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

ToyCell darts_step(const ToyCell& cell, const DataSplit& train, std::span<const std::size_t> train_rows,
                   const DataSplit& val, std::span<const std::size_t> val_rows, const DartsRates& rates) {
    ToyCell next = cell;
    const auto val_grad = cell_loss_and_gradients(next, val, val_rows);
    check_finite(val_grad, "darts_step (validation)");
    for (std::size_t e = 0; e < next.alpha.size(); ++e) {
        for (std::size_t o = 0; o < next.alpha[e].size(); ++o) {
            next.alpha[e][o] -= rates.alpha * val_grad.alpha[e][o];
        }
    }
    const auto train_grad = cell_loss_and_gradients(next, train, train_rows);
    check_finite(train_grad, "darts_step (training)");
    for (std::size_t k = 0; k < next.weights.size(); ++k) {
        next.weights[k] -= rates.weights * train_grad.weights[k];
    }
    return next;
}

std::vector<int> derive_architecture(const std::vector<std::vector<double>>& alpha) {
    std::vector<int> ops;
    ops.reserve(alpha.size());
    for (const auto& row : alpha) {
        if (row.empty()) {
            throw ValidationError("derive_architecture: empty alpha vector");
        }
        // max_element returns the first maximum, i.e. the lowest menu index.
        ops.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
    return ops;
}

double retrain_discrete(const ToyCell& shape, const std::vector<int>& ops, const SyntheticDataset& data,
                        const TrainConfig& cfg) {
    cfg.validate();
    Rng init_rng(derive_seed(cfg.seed, "cell-init"));
    ToyCell cell = ToyCell::discrete(shape.nodes, shape.dim, shape.classes, shape.menu, ops, init_rng);
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t batches = data.train.size() / batch;
    if (batches == 0) {
        throw ValidationError("retrain: batch_size exceeds the training set");
    }
    std::vector<double> velocity(cell.weights.size(), 0.0);
    const long long total_steps = static_cast<long long>(cfg.epochs) * static_cast<long long>(batches);
    long long step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto order = epoch_order(data.train.size(), cfg.seed, epoch);
        for (std::size_t b = 0; b < batches; ++b) {
            const std::span<const std::size_t> rows(order.data() + b * batch, batch);
            const auto g = cell_loss_and_gradients(cell, data.train, rows);
            check_finite(g, "retrain");
            const double rate = cfg.rate_at(step++, total_steps);
            for (std::size_t k = 0; k < cell.weights.size(); ++k) {
                velocity[k] = cfg.momentum * velocity[k] + g.weights[k] + cfg.weight_decay * cell.weights[k];
                cell.weights[k] -= rate * velocity[k];
            }
        }
    }
    return cell_accuracy(cell, data.test);
}

void DiffNasConfig::validate() const {
    if (K < 1 || epochs < 1 || batch_size < 1) {
        throw ValidationError("diffnas config: K, epochs and batch_size must be positive");
    }
    if (!(lr_weights >= 0.0) || !(lr_alpha >= 0.0)) {
        throw ValidationError("diffnas config: learning rates must be non-negative");
    }
    retrain.validate();
}

std::string DiffNasTrace::to_json() const {
    nlohmann::ordered_json out;
    out["algorithm"] = algorithm;
    out["alpha_updates"] = alpha_updates;
    out["weight_updates"] = weight_updates;
    out["max_softmax_deviation"] = max_softmax_deviation;
    auto steps_json = nlohmann::ordered_json::array();
    for (const auto& s : steps) {
        nlohmann::ordered_json j;
        j["step"] = s.step;
        j["derived_encoding"] = s.derived_encoding;
        j["retrain_test_acc"] = s.retrain_test_acc;
        steps_json.push_back(std::move(j));
    }
    out["steps"] = std::move(steps_json);
    out["final_alpha"] = final_cell.alpha;
    return out.dump(2);
}

std::string DiffNasTrace::to_csv() const {
    std::string out = "step,derived_encoding,retrain_test_acc\n";
    for (const auto& s : steps) {
        out += fmt::format("{},{},{}\n", s.step, encoding_key(s.derived_encoding), s.retrain_test_acc);
    }
    return out;
}

DiffNasTrace darts_tse_run(const ToyCell& initial, const SyntheticDataset& data, const DiffNasConfig& cfg) {
    cfg.validate();
    check_cell(initial);
    const long long batches = static_cast<long long>(data.train.size()) / cfg.batch_size;
    const long long total = batches * cfg.epochs;
    if (batches < 1) {
        throw ValidationError("diffnas: batch_size exceeds the training set");
    }
    if (cfg.K > total) {
        throw ValidationError(fmt::format("diffnas: K={} exceeds B*T={}", cfg.K, total));
    }
    const long long outer_steps = total / cfg.K;

    DiffNasTrace trace;
    trace.algorithm = "darts-tse";
    ToyCell cell = initial;
    RetrainCache retrain(initial, data, cfg.retrain);
    BatchStream stream(data.train.size(), cfg.batch_size, derive_seed(cfg.seed, "batches"));
    std::vector<std::vector<double>> accumulated(cell.alpha.size(), std::vector<double>(cell.menu.size(), 0.0));

    for (long long step = 1; step <= outer_steps; ++step) {
        for (std::size_t e = 0; e < cell.alpha.size(); ++e) {
            for (std::size_t o = 0; o < cell.alpha[e].size(); ++o) {
                cell.alpha[e][o] -= cfg.lr_alpha * accumulated[e][o];
            }
        }
        ++trace.alpha_updates;
        trace.max_softmax_deviation = std::max(trace.max_softmax_deviation, max_softmax_deviation(cell));
        for (auto& row : accumulated) {
            std::fill(row.begin(), row.end(), 0.0);
        }

        CapturedWindow window;
        if (cfg.capture_windows) {
            window.weights_at_start = cell.weights;
            window.alpha = cell.alpha;
        }
        for (int k = 0; k < cfg.K; ++k) {
            const auto rows = stream.next();
            const auto g = cell_loss_and_gradients(cell, data.train, rows);
            check_finite(g, "darts_tse_run");
            for (std::size_t w = 0; w < cell.weights.size(); ++w) {
                cell.weights[w] -= cfg.lr_weights * g.weights[w];
            }
            ++trace.weight_updates;
            for (std::size_t e = 0; e < accumulated.size(); ++e) {
                for (std::size_t o = 0; o < accumulated[e].size(); ++o) {
                    accumulated[e][o] += g.alpha[e][o];
                }
            }
            if (cfg.capture_windows) {
                window.batches.push_back(rows);
            }
        }
        if (cfg.capture_windows) {
            window.accumulated = accumulated;
            trace.windows.push_back(std::move(window));
        }
        DiffNasStep record;
        record.step = static_cast<int>(step);
        record.derived_encoding = derive_architecture(cell.alpha);
        record.retrain_test_acc = retrain.get(record.derived_encoding);
        trace.steps.push_back(std::move(record));
    }
    for (long long leftover = outer_steps * cfg.K; leftover < total; ++leftover) {
        const auto rows = stream.next();
        const auto g = cell_loss_and_gradients(cell, data.train, rows);
        check_finite(g, "darts_tse_run");
        for (std::size_t w = 0; w < cell.weights.size(); ++w) {
            cell.weights[w] -= cfg.lr_weights * g.weights[w];
        }
        ++trace.weight_updates;
    }
    trace.final_cell = std::move(cell);
    return trace;
}

DiffNasTrace darts_run(const ToyCell& initial, const SyntheticDataset& data, const DiffNasConfig& cfg) {
    cfg.validate();
    check_cell(initial);
    const long long batches = static_cast<long long>(data.train.size()) / cfg.batch_size;
    if (batches < 1) {
        throw ValidationError("diffnas: batch_size exceeds the training set");
    }
    const int val_batch = std::min<int>(cfg.batch_size, static_cast<int>(data.val.size()));
    DiffNasTrace trace;
    trace.algorithm = "darts";
    ToyCell cell = initial;
    RetrainCache retrain(initial, data, cfg.retrain);
    BatchStream train_stream(data.train.size(), cfg.batch_size, derive_seed(cfg.seed, "batches"));
    BatchStream val_stream(data.val.size(), val_batch, derive_seed(cfg.seed, "val-batches"));
    const DartsRates rates{cfg.lr_weights, cfg.lr_alpha};
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (long long b = 0; b < batches; ++b) {
            const auto train_rows = train_stream.next();
            const auto val_rows = val_stream.next();
            cell = darts_step(cell, data.train, train_rows, data.val, val_rows, rates);
            ++trace.alpha_updates;
            ++trace.weight_updates;
            trace.max_softmax_deviation = std::max(trace.max_softmax_deviation, max_softmax_deviation(cell));
        }
        DiffNasStep record;
        record.step = epoch;
        record.derived_encoding = derive_architecture(cell.alpha);
        record.retrain_test_acc = retrain.get(record.derived_encoding);
        trace.steps.push_back(std::move(record));
    }
    trace.final_cell = std::move(cell);
    return trace;
}

}  // namespace tsenas

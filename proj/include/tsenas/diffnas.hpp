#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsenas/rng.hpp"
#include "tsenas/toytrain.hpp"

namespace tsenas {

enum class CellOp { identity, zero, linear, linear_relu };

const char* to_string(CellOp op);

namespace defaults {
inline constexpr int tse_window_K = 100;
}  // namespace defaults

/// Differentiable cell: node 0 is the input, nodes 1..J each sum a mixed
/// operation applied to every earlier node, and a linear classifier reads
/// the sum of nodes 1..J. All nodes share the input width.
///
/// Edges are ordered by target node then source node:
/// (0,1), (0,2), (1,2), (0,3), ... Each edge has one alpha entry per menu
/// operation. Weights are flat: for each edge, one dim x dim matrix per
/// linear-type menu entry (in menu order); then the classifier
/// (classes x dim) and its bias.
///
/// When `fixed_ops` is set the cell is discrete: each edge applies only the
/// chosen op and alpha is ignored.
struct ToyCell {
    int nodes = 3;
    int dim = 0;
    int classes = 0;
    std::vector<CellOp> menu;
    std::vector<std::vector<double>> alpha;
    std::vector<double> weights;
    std::optional<std::vector<int>> fixed_ops;

    /// alpha ~ 1e-3 * N(0, 1); weights uniform with bound sqrt(3 / fan_in).
    static ToyCell create(int nodes, int dim, int classes, std::vector<CellOp> menu, Rng& rng);
    /// Fresh weights for a discrete cell; same layout as `create`.
    static ToyCell discrete(int nodes, int dim, int classes, std::vector<CellOp> menu, std::vector<int> ops, Rng& rng);

    std::vector<std::pair<int, int>> edges() const;
    std::size_t edge_count() const { return static_cast<std::size_t>(nodes * (nodes + 1) / 2); }
    /// Softmax of each edge's alpha, or one-hot rows for a discrete cell.
    std::vector<std::vector<double>> op_weights() const;
};

/// Activations of nodes 0..J for one input vector.
std::vector<std::vector<double>> mixed_op_forward(const ToyCell& cell, std::span<const double> input);

struct CellGradients {
    double loss = 0.0;
    std::vector<double> weights;
    std::vector<std::vector<double>> alpha;
};

/// Mean softmax cross-entropy over `rows` and its gradients with respect
/// to the weights and (for a continuous cell) alpha.
CellGradients cell_loss_and_gradients(const ToyCell& cell, const DataSplit& split, std::span<const std::size_t> rows);
double cell_loss(const ToyCell& cell, const DataSplit& split, std::span<const std::size_t> rows);
double cell_accuracy(const ToyCell& cell, const DataSplit& split);

struct DartsRates {
    double weights = 0.0;
    double alpha = 0.0;
};

/// First-order DARTS step: alpha descends the validation-batch gradient,
/// then the weights descend the training-batch gradient at the new alpha.
ToyCell darts_step(const ToyCell& cell, const DataSplit& train, std::span<const std::size_t> train_rows,
                   const DataSplit& val, std::span<const std::size_t> val_rows, const DartsRates& rates);

/// Per edge, the menu index with the largest alpha; ties go to the lowest index.
std::vector<int> derive_architecture(const std::vector<std::vector<double>>& alpha);

/// Trains a discrete cell from scratch with minibatch SGD and returns its
/// test accuracy. Batching, schedule and momentum follow `cfg`.
double retrain_discrete(const ToyCell& shape, const std::vector<int>& ops, const SyntheticDataset& data,
                        const TrainConfig& cfg);

struct DiffNasConfig {
    int K = defaults::tse_window_K;
    int epochs = 0;       // T
    int batch_size = 0;   // B = n_train / batch_size
    double lr_weights = 0.0;
    double lr_alpha = 0.0;
    std::uint64_t seed = 0;
    TrainConfig retrain;
    /// Keep each window's batches and accumulated alpha gradient in the trace.
    bool capture_windows = false;

    void validate() const;
};

struct DiffNasStep {
    int step = 0;
    std::vector<int> derived_encoding;
    double retrain_test_acc = 0.0;
};

struct CapturedWindow {
    std::vector<std::vector<std::size_t>> batches;
    std::vector<double> weights_at_start;
    std::vector<std::vector<double>> alpha;  // alpha during the window
    std::vector<std::vector<double>> accumulated;
};

struct DiffNasTrace {
    std::string algorithm;
    std::vector<DiffNasStep> steps;
    int alpha_updates = 0;
    int weight_updates = 0;
    /// Largest |sum(softmax(alpha_e)) - 1| seen after any alpha update.
    double max_softmax_deviation = 0.0;
    std::vector<CapturedWindow> windows;
    ToyCell final_cell;

    std::string to_json() const;
    /// step,derived_encoding,retrain_test_acc
    std::string to_csv() const;
};

/// DARTS-TSE: floor(B*T/K) outer steps. Each starts by moving alpha against
/// the gradient accumulated over the previous window (zero on the first
/// step), then runs K weight updates while summing each minibatch's
/// training-loss gradient with respect to alpha. Both gradients come from
/// the same forward/backward pass at the pre-update weights. Minibatches
/// left over after the last full window only update the weights, so the
/// run makes exactly B*T weight updates.
DiffNasTrace darts_tse_run(const ToyCell& initial, const SyntheticDataset& data, const DiffNasConfig& cfg);

/// Plain first-order DARTS for B*T steps; records the derived architecture
/// once per epoch.
DiffNasTrace darts_run(const ToyCell& initial, const SyntheticDataset& data, const DiffNasConfig& cfg);

}  // namespace tsenas

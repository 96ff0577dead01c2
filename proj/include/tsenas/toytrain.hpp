#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsenas/curves.hpp"
#include "tsenas/rng.hpp"

namespace tsenas {

enum class Activation { relu, tanh };

const char* to_string(Activation activation);
Activation parse_activation(const std::string& name);

/// How enumerate_toy_space combines choices across hidden layers.
/// per_layer: every layer picks its own width and activation.
/// uniform: one width and one activation shared by all layers.
enum class SpaceLayout { per_layer, uniform };

struct ToyArchSpec {
    std::vector<int> hidden_widths;
    std::vector<Activation> activations;  // one per hidden layer
    /// Categorical choice indices; fixed length within one enumerated space.
    std::vector<int> encoding;

    int depth() const { return static_cast<int>(hidden_widths.size()); }
    /// e.g. "mlp-16x32-rt". A function of widths and activations only.
    std::string arch_id() const;
};

/// All architectures of the space in lexicographic order of their encoding.
///
/// Encodings: uniform -> [depth, width, activation]; per_layer ->
/// [depth, width_1..width_D, act_1..act_D] with D the largest depth and
/// unused trailing slots set to 0. Indices refer to positions in the menus.
std::vector<ToyArchSpec> enumerate_toy_space(std::span<const int> width_menu, std::span<const int> depths,
                                             std::span<const Activation> activations,
                                             SpaceLayout layout = SpaceLayout::per_layer);

struct DataSplit {
    int dim = 0;
    std::vector<double> features;  // row-major, size() x dim
    std::vector<int> labels;
    std::vector<std::size_t> sample_ids;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

struct SyntheticDataConfig {
    int dim = 0;
    int classes = 0;
    int clusters_per_class = 1;
    int n_train = 0;
    int n_val = 0;
    int n_test = 0;
    double difficulty = 0.5;  // (0, 1]; scales the within-cluster spread
    std::uint64_t seed = 0;
};

struct SyntheticDataset {
    SyntheticDataConfig config;
    DataSplit train;
    DataSplit val;
    DataSplit test;

    int dim() const { return config.dim; }
    int classes() const { return config.classes; }
};

/// Gaussian clusters, `clusters_per_class` per class, centres drawn from a
/// standard normal. Samples are generated as one sequence and split by
/// index, so the splits are disjoint. Same config gives identical bits.
SyntheticDataset make_synthetic_dataset(const SyntheticDataConfig& config);

enum class LrSchedule { constant, cosine };

struct TrainConfig {
    int epochs = 0;
    int batch_size = 0;
    double learning_rate = 0.0;
    LrSchedule schedule = LrSchedule::constant;
    double momentum = 0.0;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    /// Learning rate for a global step in [0, total_steps).
    double rate_at(long long step, long long total_steps) const;
};

/// Shuffled sample order for one epoch, drawn from a stream derived from
/// (seed, epoch) so any epoch can be reproduced in isolation.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

/// Fully connected network with hand-written backpropagation. Parameters
/// live in a flat vector: for each layer, W (out x in, row-major) then b.
class Mlp {
public:
    Mlp(ToyArchSpec arch, int input_dim, int classes);

    const ToyArchSpec& arch() const { return arch_; }
    std::size_t parameter_count() const { return parameter_count_; }

    /// Uniform weights scaled by fan-in (sqrt(6 / fan_in) for hidden
    /// layers, sqrt(3 / fan_in) for the output layer); zero biases.
    std::vector<double> init_parameters(Rng& rng) const;

    /// Mean softmax cross-entropy over `rows` of `split`.
    double loss(std::span<const double> params, const DataSplit& split, std::span<const std::size_t> rows) const;
    /// Same value as loss(); writes d(loss)/d(params) into `grad`.
    double loss_and_gradient(std::span<const double> params, const DataSplit& split,
                             std::span<const std::size_t> rows, std::span<double> grad) const;

    struct Evaluation {
        double loss = 0.0;
        double accuracy = 0.0;
    };
    Evaluation evaluate(std::span<const double> params, const DataSplit& split) const;

private:
    struct Layer {
        int in = 0;
        int out = 0;
        std::size_t weight_offset = 0;
        std::size_t bias_offset = 0;
    };

    double sample_forward(std::span<const double> params, std::span<const double> x,
                          std::vector<std::vector<double>>& pre, std::vector<std::vector<double>>& post,
                          int label) const;

    ToyArchSpec arch_;
    int input_dim_;
    int classes_;
    std::vector<Layer> layers_;
    std::size_t parameter_count_ = 0;
};

/// Optional record of every SGD step, used to audit recorded losses.
struct TrainCapture {
    std::vector<std::vector<double>> params_before_step;
    std::vector<std::vector<std::size_t>> batch_rows;
    std::vector<double> final_params;
};

/// Minibatch SGD with momentum and weight decay. Records each minibatch's
/// cross-entropy as evaluated before that step's update, plus per-epoch
/// validation loss and accuracy and the final test accuracy. Trailing
/// samples that do not fill a batch are dropped, so B = n_train / batch_size.
LearningCurve train(const ToyArchSpec& arch, const SyntheticDataset& data, const TrainConfig& cfg,
                    TrainCapture* capture = nullptr);

/// Trains every (arch, seed) pair on up to `jobs` threads. The run for
/// seed s uses cfg with its seed replaced by derive_seed(cfg.seed, "run", s).
BenchmarkDataset build_toy_benchmark(std::span<const ToyArchSpec> space, const SyntheticDataset& data,
                                     const TrainConfig& cfg, std::span<const int> seeds, unsigned jobs,
                                     const std::string& name);

}  // namespace tsenas

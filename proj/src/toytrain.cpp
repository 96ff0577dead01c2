#include "tsenas/toytrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include <fmt/format.h>

#include "tsenas/errors.hpp"
#include "tsenas/parallel.hpp"

namespace tsenas {

const char* to_string(Activation activation) {
    return activation == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") {
        return Activation::relu;
    }
    if (name == "tanh") {
        return Activation::tanh;
    }
    throw ValidationError(fmt::format("unknown activation '{}' (valid: relu, tanh)", name));
}

std::string ToyArchSpec::arch_id() const {
    std::string id = "mlp-";
    for (std::size_t l = 0; l < hidden_widths.size(); ++l) {
        if (l > 0) {
            id += 'x';
        }
        id += std::to_string(hidden_widths[l]);
    }
    id += '-';
    for (Activation a : activations) {
        id += a == Activation::relu ? 'r' : 't';
    }
    return id;
}

namespace {

// Odometer over mixed-radix digits; returns false after the last combination.
bool next_combination(std::vector<int>& digits, std::span<const int> radix) {
    for (std::size_t i = digits.size(); i-- > 0;) {
        if (++digits[i] < radix[i]) {
            return true;
        }
        digits[i] = 0;
    }
    return false;
}

}  // namespace

std::vector<ToyArchSpec> enumerate_toy_space(std::span<const int> width_menu, std::span<const int> depths,
                                             std::span<const Activation> activations, SpaceLayout layout) {
    if (width_menu.empty() || depths.empty() || activations.empty()) {
        throw ValidationError("enumerate_toy_space: width menu, depths and activations must be non-empty");
    }
    for (int w : width_menu) {
        if (w < 1) {
            throw ValidationError(fmt::format("enumerate_toy_space: width {} must be positive", w));
        }
    }
    for (int d : depths) {
        if (d < 1 || d > 4) {
            throw ValidationError(fmt::format("enumerate_toy_space: depth {} outside [1, 4]", d));
        }
    }
    const int max_depth = *std::max_element(depths.begin(), depths.end());
    const int n_widths = static_cast<int>(width_menu.size());
    const int n_acts = static_cast<int>(activations.size());

    std::vector<ToyArchSpec> space;
    for (std::size_t d_idx = 0; d_idx < depths.size(); ++d_idx) {
        const int depth = depths[d_idx];
        if (layout == SpaceLayout::uniform) {
            for (int w = 0; w < n_widths; ++w) {
                for (int a = 0; a < n_acts; ++a) {
                    ToyArchSpec spec;
                    spec.hidden_widths.assign(static_cast<std::size_t>(depth), width_menu[static_cast<std::size_t>(w)]);
                    spec.activations.assign(static_cast<std::size_t>(depth), activations[static_cast<std::size_t>(a)]);
                    spec.encoding = {static_cast<int>(d_idx), w, a};
                    space.push_back(std::move(spec));
                }
            }
            continue;
        }
        // Digits: widths for each layer, then activations for each layer.
        std::vector<int> radix(static_cast<std::size_t>(2 * depth));
        std::fill(radix.begin(), radix.begin() + depth, n_widths);
        std::fill(radix.begin() + depth, radix.end(), n_acts);
        std::vector<int> digits(radix.size(), 0);
        do {
            ToyArchSpec spec;
            spec.encoding.assign(static_cast<std::size_t>(1 + 2 * max_depth), 0);
            spec.encoding[0] = static_cast<int>(d_idx);
            for (int l = 0; l < depth; ++l) {
                const int w = digits[static_cast<std::size_t>(l)];
                const int a = digits[static_cast<std::size_t>(depth + l)];
                spec.hidden_widths.push_back(width_menu[static_cast<std::size_t>(w)]);
                spec.activations.push_back(activations[static_cast<std::size_t>(a)]);
                spec.encoding[static_cast<std::size_t>(1 + l)] = w;
                spec.encoding[static_cast<std::size_t>(1 + max_depth + l)] = a;
            }
            space.push_back(std::move(spec));
        } while (next_combination(digits, radix));
    }
    std::stable_sort(space.begin(), space.end(),
                     [](const ToyArchSpec& x, const ToyArchSpec& y) { return x.encoding < y.encoding; });
    return space;
}

SyntheticDataset make_synthetic_dataset(const SyntheticDataConfig& config) {
    if (config.dim < 1 || config.clusters_per_class < 1 || config.n_train < 1 || config.n_val < 1 ||
        config.n_test < 1) {
        throw ValidationError("make_synthetic_dataset: dimensions, cluster count and split sizes must be positive");
    }
    if (config.classes < 2) {
        throw ValidationError("make_synthetic_dataset: need at least 2 classes");
    }
    if (!(config.difficulty > 0.0 && config.difficulty <= 1.0)) {
        throw ValidationError(fmt::format("make_synthetic_dataset: difficulty={} outside (0, 1]", config.difficulty));
    }
    const auto dim = static_cast<std::size_t>(config.dim);
    const auto n_clusters = static_cast<std::size_t>(config.classes * config.clusters_per_class);

    Rng centre_rng(derive_seed(config.seed, "centres"));
    std::vector<double> centres(n_clusters * dim);
    for (double& c : centres) {
        c = centre_rng.normal();
    }

    Rng sample_rng(derive_seed(config.seed, "samples"));
    const double spread = config.difficulty;
    auto fill = [&](DataSplit& split, int count, std::size_t first_id) {
        split.dim = config.dim;
        split.features.resize(static_cast<std::size_t>(count) * dim);
        split.labels.resize(static_cast<std::size_t>(count));
        split.sample_ids.resize(static_cast<std::size_t>(count));
        for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
            const auto label = static_cast<int>(sample_rng.below(static_cast<std::size_t>(config.classes)));
            const auto cluster = static_cast<std::size_t>(label * config.clusters_per_class) +
                                 sample_rng.below(static_cast<std::size_t>(config.clusters_per_class));
            for (std::size_t k = 0; k < dim; ++k) {
                split.features[i * dim + k] = centres[cluster * dim + k] + spread * sample_rng.normal();
            }
            split.labels[i] = label;
            split.sample_ids[i] = first_id + i;
        }
    };

    SyntheticDataset data;
    data.config = config;
    fill(data.train, config.n_train, 0);
    fill(data.val, config.n_val, static_cast<std::size_t>(config.n_train));
    fill(data.test, config.n_test, static_cast<std::size_t>(config.n_train + config.n_val));
    return data;
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) {
        throw ValidationError("train config: epochs and batch_size must be positive");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("train config: learning_rate must be finite and non-negative");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ValidationError("train config: momentum outside [0, 1)");
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw ValidationError("train config: weight_decay must be finite and non-negative");
    }
}

double TrainConfig::rate_at(long long step, long long total_steps) const {
    if (schedule == LrSchedule::constant || total_steps <= 0) {
        return learning_rate;
    }
    const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
    return learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    return order;
}

Mlp::Mlp(ToyArchSpec arch, int input_dim, int classes)
    : arch_(std::move(arch)), input_dim_(input_dim), classes_(classes) {
    if (arch_.hidden_widths.size() != arch_.activations.size()) {
        throw ValidationError(fmt::format("arch '{}': one activation per hidden layer required", arch_.arch_id()));
    }
    if (input_dim_ < 1 || classes_ < 2) {
        throw ValidationError("Mlp: input_dim must be positive and classes at least 2");
    }
    int in = input_dim_;
    std::size_t offset = 0;
    auto add = [&](int out) {
        Layer layer{in, out, offset, offset + static_cast<std::size_t>(in) * static_cast<std::size_t>(out)};
        offset = layer.bias_offset + static_cast<std::size_t>(out);
        layers_.push_back(layer);
        in = out;
    };
    for (int width : arch_.hidden_widths) {
        if (width < 1) {
            throw ValidationError(fmt::format("arch '{}': widths must be positive", arch_.arch_id()));
        }
        add(width);
    }
    add(classes_);
    parameter_count_ = offset;
}

std::vector<double> Mlp::init_parameters(Rng& rng) const {
    std::vector<double> params(parameter_count_, 0.0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const bool output = l + 1 == layers_.size();
        const double bound = std::sqrt((output ? 3.0 : 6.0) / static_cast<double>(layer.in));
        for (std::size_t k = layer.weight_offset; k < layer.bias_offset; ++k) {
            params[k] = rng.uniform(-bound, bound);
        }
    }
    return params;
}

double Mlp::sample_forward(std::span<const double> params, std::span<const double> x,
                           std::vector<std::vector<double>>& pre, std::vector<std::vector<double>>& post,
                           int label) const {
    pre.resize(layers_.size());
    post.resize(layers_.size());
    std::span<const double> input = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        auto& z = pre[l];
        auto& h = post[l];
        z.resize(static_cast<std::size_t>(layer.out));
        h.resize(static_cast<std::size_t>(layer.out));
        const bool hidden = l + 1 < layers_.size();
        for (int o = 0; o < layer.out; ++o) {
            const double* w = params.data() + layer.weight_offset + static_cast<std::size_t>(o * layer.in);
            double acc = params[layer.bias_offset + static_cast<std::size_t>(o)];
            for (int i = 0; i < layer.in; ++i) {
                acc += w[i] * input[static_cast<std::size_t>(i)];
            }
            z[static_cast<std::size_t>(o)] = acc;
            if (hidden) {
                h[static_cast<std::size_t>(o)] =
                    arch_.activations[l] == Activation::relu ? std::max(acc, 0.0) : std::tanh(acc);
            } else {
                h[static_cast<std::size_t>(o)] = acc;
            }
        }
        input = h;
    }
    // Softmax cross-entropy from the logits, shifted by the max for stability.
    const auto& logits = post.back();
    const double shift = *std::max_element(logits.begin(), logits.end());
    double norm = 0.0;
    for (double v : logits) {
        norm += std::exp(v - shift);
    }
    return std::log(norm) + shift - logits[static_cast<std::size_t>(label)];
}

double Mlp::loss(std::span<const double> params, const DataSplit& split, std::span<const std::size_t> rows) const {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
    double total = 0.0;
    for (std::size_t r : rows) {
        total += sample_forward(params, split.row(r), pre, post, split.labels[r]);
    }
    return total / static_cast<double>(rows.size());
}

double Mlp::loss_and_gradient(std::span<const double> params, const DataSplit& split,
                              std::span<const std::size_t> rows, std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
    std::vector<double> delta;
    std::vector<double> back;
    const double scale = 1.0 / static_cast<double>(rows.size());
    double total = 0.0;
    for (std::size_t r : rows) {
        const auto x = split.row(r);
        total += sample_forward(params, x, pre, post, split.labels[r]);

        const auto& logits = post.back();
        const double shift = *std::max_element(logits.begin(), logits.end());
        double norm = 0.0;
        for (double v : logits) {
            norm += std::exp(v - shift);
        }
        delta.resize(logits.size());
        for (std::size_t k = 0; k < logits.size(); ++k) {
            delta[k] = std::exp(logits[k] - shift) / norm * scale;
        }
        delta[static_cast<std::size_t>(split.labels[r])] -= scale;

        for (std::size_t l = layers_.size(); l-- > 0;) {
            const auto& layer = layers_[l];
            if (l + 1 < layers_.size()) {
                // delta currently holds dL/dh for this hidden layer.
                for (int o = 0; o < layer.out; ++o) {
                    const auto oo = static_cast<std::size_t>(o);
                    if (arch_.activations[l] == Activation::relu) {
                        delta[oo] = pre[l][oo] > 0.0 ? delta[oo] : 0.0;
                    } else {
                        delta[oo] *= 1.0 - post[l][oo] * post[l][oo];
                    }
                }
            }
            std::span<const double> input = l == 0 ? x : std::span<const double>(post[l - 1]);
            back.assign(static_cast<std::size_t>(layer.in), 0.0);
            for (int o = 0; o < layer.out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                const std::size_t row = layer.weight_offset + static_cast<std::size_t>(o * layer.in);
                for (int i = 0; i < layer.in; ++i) {
                    grad[row + static_cast<std::size_t>(i)] += d * input[static_cast<std::size_t>(i)];
                    back[static_cast<std::size_t>(i)] += params[row + static_cast<std::size_t>(i)] * d;
                }
                grad[layer.bias_offset + static_cast<std::size_t>(o)] += d;
            }
            delta.swap(back);
        }
    }
    return total / static_cast<double>(rows.size());
}

Mlp::Evaluation Mlp::evaluate(std::span<const double> params, const DataSplit& split) const {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
    double total = 0.0;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < split.size(); ++r) {
        total += sample_forward(params, split.row(r), pre, post, split.labels[r]);
        const auto& logits = post.back();
        const auto best = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (best == split.labels[r]) {
            ++correct;
        }
    }
    const double n = static_cast<double>(split.size());
    return {total / n, static_cast<double>(correct) / n};
}

LearningCurve train(const ToyArchSpec& arch, const SyntheticDataset& data, const TrainConfig& cfg,
                    TrainCapture* capture) {
    cfg.validate();
    if (data.train.dim != data.dim() || data.dim() < 1) {
        throw ValidationError("train: feature dimension mismatch between dataset and splits");
    }
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t batches = data.train.size() / batch;
    if (batches == 0) {
        throw ValidationError(fmt::format("train: batch_size {} exceeds {} training samples", cfg.batch_size,
                                          data.train.size()));
    }
    const Mlp net(arch, data.dim(), data.classes());
    Rng init_rng(derive_seed(cfg.seed, "init"));
    std::vector<double> params = net.init_parameters(init_rng);
    std::vector<double> velocity(params.size(), 0.0);
    std::vector<double> grad(params.size(), 0.0);

    const long long total_steps = static_cast<long long>(cfg.epochs) * static_cast<long long>(batches);
    long long step = 0;
    std::vector<std::vector<double>> losses(static_cast<std::size_t>(cfg.epochs));
    std::vector<double> val_loss;
    std::vector<double> val_acc;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto order = epoch_order(data.train.size(), cfg.seed, epoch);
        auto& epoch_losses = losses[static_cast<std::size_t>(epoch - 1)];
        epoch_losses.reserve(batches);
        for (std::size_t b = 0; b < batches; ++b) {
            const std::span<const std::size_t> rows(order.data() + b * batch, batch);
            if (capture != nullptr) {
                capture->params_before_step.push_back(params);
                capture->batch_rows.emplace_back(rows.begin(), rows.end());
            }
            const double loss = net.loss_and_gradient(params, data.train, rows, grad);
            if (!std::isfinite(loss)) {
                throw NumericError(fmt::format("arch '{}': non-finite loss at epoch {} minibatch {}", arch.arch_id(),
                                               epoch, b + 1));
            }
            epoch_losses.push_back(loss);
            const double rate = cfg.rate_at(step, total_steps);
            for (std::size_t k = 0; k < params.size(); ++k) {
                const double g = grad[k] + cfg.weight_decay * params[k];
                velocity[k] = cfg.momentum * velocity[k] + g;
                params[k] -= rate * velocity[k];
            }
            ++step;
        }
        const auto val = net.evaluate(params, data.val);
        if (!std::isfinite(val.loss)) {
            throw NumericError(fmt::format("arch '{}': non-finite validation loss after epoch {}", arch.arch_id(), epoch));
        }
        val_loss.push_back(val.loss);
        val_acc.push_back(val.accuracy);
    }
    const auto test = net.evaluate(params, data.test);
    if (capture != nullptr) {
        capture->final_params = params;
    }
    return LearningCurve(std::move(losses), std::move(val_loss), std::move(val_acc), test.accuracy);
}

BenchmarkDataset build_toy_benchmark(std::span<const ToyArchSpec> space, const SyntheticDataset& data,
                                     const TrainConfig& cfg, std::span<const int> seeds, unsigned jobs,
                                     const std::string& name) {
    if (space.empty() || seeds.empty()) {
        throw ValidationError("build_toy_benchmark: architecture space and seed list must be non-empty");
    }
    cfg.validate();
    const std::size_t runs = space.size() * seeds.size();
    std::vector<std::optional<LearningCurve>> curves(runs);
    parallel_for(runs, jobs, [&](std::size_t i) {
        const auto& arch = space[i / seeds.size()];
        const int seed = seeds[i % seeds.size()];
        TrainConfig run_cfg = cfg;
        run_cfg.seed = derive_seed(cfg.seed, "run", static_cast<std::uint64_t>(seed));
        try {
            curves[i].emplace(train(arch, data, run_cfg));
        } catch (const NumericError& e) {
            throw NumericError(fmt::format("seed {}: {}", seed, e.what()));
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("seed {}: {}", seed, e.what()));
        }
    });

    BenchmarkDataset bench;
    bench.meta.name = name;
    bench.meta.t_end = cfg.epochs;
    bench.meta.batches_per_epoch = static_cast<int>(data.train.size() / static_cast<std::size_t>(cfg.batch_size));
    bench.meta.notes = fmt::format("toy MLP benchmark: {} architectures, {} seeds, dim={}, classes={}, n_train={}",
                                   space.size(), seeds.size(), data.dim(), data.classes(), data.train.size());
    for (std::size_t a = 0; a < space.size(); ++a) {
        ArchitectureRecord record;
        record.arch_id = space[a].arch_id();
        record.encoding = space[a].encoding;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            record.seeds.emplace(seeds[s], std::move(*curves[a * seeds.size() + s]));
        }
        bench.records.push_back(std::move(record));
    }
    bench.validate();
    return bench;
}

}  // namespace tsenas

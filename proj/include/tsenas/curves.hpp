#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tsenas {

/// Training record of one network trained once.
///
/// Epochs are 1-based in the estimator formulas; the stored vectors are
/// 0-based, so epoch t lives at index t-1. Immutable after construction.
class LearningCurve {
public:
    /// Validates every invariant and throws ValidationError naming the
    /// offending field.
    LearningCurve(std::vector<std::vector<double>> minibatch_train_losses,
                  std::optional<std::vector<double>> epoch_val_loss,
                  std::vector<double> epoch_val_acc,
                  double final_test_acc);

    const std::vector<std::vector<double>>& minibatch_train_losses() const { return losses_; }
    const std::optional<std::vector<double>>& epoch_val_loss() const { return val_loss_; }
    /// Empty when the record carries no validation accuracy.
    const std::vector<double>& epoch_val_acc() const { return val_acc_; }
    double final_test_acc() const { return test_acc_; }

    int t_end() const { return static_cast<int>(losses_.size()); }
    int batches_per_epoch() const { return static_cast<int>(losses_.front().size()); }

    friend bool operator==(const LearningCurve&, const LearningCurve&) = default;

private:
    std::vector<std::vector<double>> losses_;
    std::optional<std::vector<double>> val_loss_;
    std::vector<double> val_acc_;
    double test_acc_;
};

/// First `epochs` epochs of every per-epoch field; final_test_acc is kept.
LearningCurve truncate(const LearningCurve& curve, int epochs);

/// Mean minibatch loss of each epoch: (1/B) * sum_i loss(t, i).
std::vector<double> epoch_sums(const LearningCurve& curve);

struct ArchitectureRecord {
    std::string arch_id;
    std::vector<int> encoding;
    std::map<int, LearningCurve> seeds;

    /// Mean of final_test_acc over seeds.
    double mean_test_acc() const;
};

struct BenchmarkMeta {
    std::string name;
    int t_end = 0;
    int batches_per_epoch = 0;
    std::string notes;

    friend bool operator==(const BenchmarkMeta&, const BenchmarkMeta&) = default;
};

struct BenchmarkDataset {
    BenchmarkMeta meta;
    std::vector<ArchitectureRecord> records;

    /// Checks unique ids, non-empty seed maps, and that every curve matches
    /// meta.t_end and meta.batches_per_epoch. Throws ValidationError.
    void validate() const;

    const ArchitectureRecord* find(const std::string& arch_id) const;
    /// Seeds present in every record, ascending.
    std::vector<int> common_seeds() const;
};

/// Reads the JSON-lines benchmark format: one metadata line followed by one
/// record per line. Errors name the line number or the arch_id and field.
BenchmarkDataset load_benchmark(const std::filesystem::path& path);
BenchmarkDataset parse_benchmark(const std::string& text, const std::string& source = "<memory>");

/// Serializes in the same format. Doubles are written in shortest
/// round-trip form, so load(save(d)) reproduces every loss bit-exactly.
std::string serialize_benchmark(const BenchmarkDataset& dataset);
void save_benchmark(const BenchmarkDataset& dataset, const std::filesystem::path& path);

}  // namespace tsenas

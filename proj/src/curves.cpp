#include "tsenas/curves.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "tsenas/errors.hpp"

namespace tsenas {

namespace {

bool is_valid_loss(double v) { return std::isfinite(v) && v >= 0.0; }
bool is_valid_acc(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

}  // namespace

LearningCurve::LearningCurve(std::vector<std::vector<double>> minibatch_train_losses,
                             std::optional<std::vector<double>> epoch_val_loss,
                             std::vector<double> epoch_val_acc,
                             double final_test_acc)
    : losses_(std::move(minibatch_train_losses)),
      val_loss_(std::move(epoch_val_loss)),
      val_acc_(std::move(epoch_val_acc)),
      test_acc_(final_test_acc) {
    if (losses_.empty()) {
        throw ValidationError("mtl: at least one epoch required");
    }
    const std::size_t batches = losses_.front().size();
    if (batches == 0) {
        throw ValidationError("mtl: epoch 1 has no minibatch losses");
    }
    for (std::size_t t = 0; t < losses_.size(); ++t) {
        if (losses_[t].size() != batches) {
            throw ValidationError(fmt::format("mtl: epoch {} has {} minibatches, expected {}", t + 1,
                                              losses_[t].size(), batches));
        }
        for (std::size_t i = 0; i < batches; ++i) {
            if (!is_valid_loss(losses_[t][i])) {
                throw ValidationError(
                    fmt::format("mtl: epoch {} minibatch {} is not a finite non-negative loss", t + 1, i + 1));
            }
        }
    }
    if (val_loss_) {
        if (val_loss_->size() != losses_.size()) {
            throw ValidationError(fmt::format("val_loss: {} entries, expected {}", val_loss_->size(), losses_.size()));
        }
        for (std::size_t t = 0; t < val_loss_->size(); ++t) {
            if (!is_valid_loss((*val_loss_)[t])) {
                throw ValidationError(fmt::format("val_loss: epoch {} is not a finite non-negative loss", t + 1));
            }
        }
    }
    if (!val_acc_.empty()) {
        if (val_acc_.size() != losses_.size()) {
            throw ValidationError(fmt::format("val_acc: {} entries, expected {}", val_acc_.size(), losses_.size()));
        }
        for (std::size_t t = 0; t < val_acc_.size(); ++t) {
            if (!is_valid_acc(val_acc_[t])) {
                throw ValidationError(fmt::format("val_acc: epoch {} outside [0, 1]", t + 1));
            }
        }
    }
    if (!is_valid_acc(test_acc_)) {
        throw ValidationError("test_acc: outside [0, 1]");
    }
}

LearningCurve truncate(const LearningCurve& curve, int epochs) {
    if (epochs < 1 || epochs > curve.t_end()) {
        throw ValidationError(fmt::format("truncate: T={} outside [1, {}]", epochs, curve.t_end()));
    }
    const auto n = static_cast<std::size_t>(epochs);
    const auto& losses = curve.minibatch_train_losses();
    std::optional<std::vector<double>> val_loss;
    if (curve.epoch_val_loss()) {
        val_loss.emplace(curve.epoch_val_loss()->begin(), curve.epoch_val_loss()->begin() + epochs);
    }
    std::vector<double> val_acc;
    if (!curve.epoch_val_acc().empty()) {
        val_acc.assign(curve.epoch_val_acc().begin(), curve.epoch_val_acc().begin() + epochs);
    }
    return LearningCurve({losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(n)}, std::move(val_loss),
                         std::move(val_acc), curve.final_test_acc());
}

std::vector<double> epoch_sums(const LearningCurve& curve) {
    std::vector<double> sums;
    sums.reserve(curve.minibatch_train_losses().size());
    for (const auto& epoch : curve.minibatch_train_losses()) {
        double total = 0.0;
        for (double loss : epoch) {
            total += loss;
        }
        sums.push_back(total / static_cast<double>(epoch.size()));
    }
    return sums;
}

double ArchitectureRecord::mean_test_acc() const {
    if (seeds.empty()) {
        throw ValidationError(fmt::format("record '{}': no seeds", arch_id));
    }
    double total = 0.0;
    for (const auto& [seed, curve] : seeds) {
        total += curve.final_test_acc();
    }
    return total / static_cast<double>(seeds.size());
}

void BenchmarkDataset::validate() const {
    if (meta.t_end < 1 || meta.batches_per_epoch < 1) {
        throw ValidationError("meta: t_end and B must be positive");
    }
    if (records.empty()) {
        throw ValidationError("no records");
    }
    std::set<std::string> ids;
    for (const auto& record : records) {
        if (!ids.insert(record.arch_id).second) {
            throw ValidationError(fmt::format("duplicate arch_id '{}'", record.arch_id));
        }
        if (record.seeds.empty()) {
            throw ValidationError(fmt::format("record '{}': seeds: at least one seed required", record.arch_id));
        }
        for (const auto& [seed, curve] : record.seeds) {
            if (curve.t_end() != meta.t_end) {
                throw ValidationError(fmt::format("record '{}' seed {}: mtl: {} epochs, expected t_end={}",
                                                  record.arch_id, seed, curve.t_end(), meta.t_end));
            }
            if (curve.batches_per_epoch() != meta.batches_per_epoch) {
                throw ValidationError(fmt::format("record '{}' seed {}: mtl: B={}, expected B={}", record.arch_id,
                                                  seed, curve.batches_per_epoch(), meta.batches_per_epoch));
            }
        }
    }
}

const ArchitectureRecord* BenchmarkDataset::find(const std::string& arch_id) const {
    for (const auto& record : records) {
        if (record.arch_id == arch_id) {
            return &record;
        }
    }
    return nullptr;
}

std::vector<int> BenchmarkDataset::common_seeds() const {
    std::vector<int> seeds;
    if (records.empty()) {
        return seeds;
    }
    for (const auto& [seed, curve] : records.front().seeds) {
        bool everywhere = true;
        for (const auto& record : records) {
            if (!record.seeds.contains(seed)) {
                everywhere = false;
                break;
            }
        }
        if (everywhere) {
            seeds.push_back(seed);
        }
    }
    return seeds;
}

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

template <class T>
T required(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ValidationError(fmt::format("{}: missing field '{}'", where, key));
    }
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ValidationError(fmt::format("{}: field '{}' has the wrong type", where, key));
    }
}

LearningCurve parse_curve(const json& obj, const std::string& where) {
    if (!obj.is_object()) {
        throw ValidationError(fmt::format("{}: seed entry must be an object", where));
    }
    auto mtl = required<std::vector<std::vector<double>>>(obj, "mtl", where);
    std::optional<std::vector<double>> val_loss;
    if (auto it = obj.find("val_loss"); it != obj.end() && !it->is_null()) {
        val_loss = required<std::vector<double>>(obj, "val_loss", where);
    }
    auto val_acc = required<std::vector<double>>(obj, "val_acc", where);
    auto test_acc = required<double>(obj, "test_acc", where);
    try {
        return LearningCurve(std::move(mtl), std::move(val_loss), std::move(val_acc), test_acc);
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", where, e.what()));
    }
}

}  // namespace

BenchmarkDataset parse_benchmark(const std::string& text, const std::string& source) {
    BenchmarkDataset dataset;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool have_meta = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(fmt::format("{}:{}: malformed JSON: {}", source, line_no, e.what()));
        }
        const std::string where = fmt::format("{}:{}", source, line_no);
        if (!obj.is_object()) {
            throw ValidationError(fmt::format("{}: expected a JSON object", where));
        }
        const auto kind = required<std::string>(obj, "kind", where);
        if (!have_meta) {
            if (kind != "meta") {
                throw ValidationError(fmt::format("{}: first line must have kind 'meta'", where));
            }
            dataset.meta.name = required<std::string>(obj, "name", where);
            dataset.meta.t_end = required<int>(obj, "t_end", where);
            dataset.meta.batches_per_epoch = required<int>(obj, "B", where);
            dataset.meta.notes = required<std::string>(obj, "notes", where);
            have_meta = true;
            continue;
        }
        if (kind != "record") {
            throw ValidationError(fmt::format("{}: expected kind 'record', got '{}'", where, kind));
        }
        ArchitectureRecord record;
        record.arch_id = required<std::string>(obj, "arch_id", where);
        record.encoding = required<std::vector<int>>(obj, "encoding", where);
        const auto seeds_it = obj.find("seeds");
        if (seeds_it == obj.end() || !seeds_it->is_object()) {
            throw ValidationError(fmt::format("{}: record '{}': seeds must be an object", where, record.arch_id));
        }
        for (const auto& [key, value] : seeds_it->items()) {
            int seed = 0;
            try {
                std::size_t used = 0;
                seed = std::stoi(key, &used);
                if (used != key.size()) {
                    throw std::invalid_argument(key);
                }
            } catch (const std::exception&) {
                throw ValidationError(
                    fmt::format("{}: record '{}': seed key '{}' is not an integer", where, record.arch_id, key));
            }
            record.seeds.emplace(seed,
                                 parse_curve(value, fmt::format("{}: record '{}' seed {}", where, record.arch_id, seed)));
        }
        dataset.records.push_back(std::move(record));
    }
    if (!have_meta) {
        throw ValidationError(fmt::format("{}: missing metadata line", source));
    }
    dataset.validate();
    return dataset;
}

BenchmarkDataset load_benchmark(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError(fmt::format("cannot open benchmark file '{}'", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_benchmark(buffer.str(), path.string());
}

std::string serialize_benchmark(const BenchmarkDataset& dataset) {
    std::string out;
    ordered_json meta;
    meta["kind"] = "meta";
    meta["name"] = dataset.meta.name;
    meta["t_end"] = dataset.meta.t_end;
    meta["B"] = dataset.meta.batches_per_epoch;
    meta["notes"] = dataset.meta.notes;
    out += meta.dump();
    out += '\n';
    for (const auto& record : dataset.records) {
        ordered_json rec;
        rec["kind"] = "record";
        rec["arch_id"] = record.arch_id;
        rec["encoding"] = record.encoding;
        ordered_json seeds = ordered_json::object();
        for (const auto& [seed, curve] : record.seeds) {
            ordered_json c;
            c["mtl"] = curve.minibatch_train_losses();
            if (curve.epoch_val_loss()) {
                c["val_loss"] = *curve.epoch_val_loss();
            } else {
                c["val_loss"] = nullptr;
            }
            c["val_acc"] = curve.epoch_val_acc();
            c["test_acc"] = curve.final_test_acc();
            seeds[std::to_string(seed)] = std::move(c);
        }
        rec["seeds"] = std::move(seeds);
        out += rec.dump();
        out += '\n';
    }
    return out;
}

void save_benchmark(const BenchmarkDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError(fmt::format("cannot write benchmark file '{}'", path.string()));
    }
    out << serialize_benchmark(dataset);
}

}  // namespace tsenas

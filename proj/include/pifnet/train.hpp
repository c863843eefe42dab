#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pifnet/model.hpp"
#include "pifnet/optim.hpp"
#include "pifnet/synth.hpp"

namespace pifnet {

struct TrainConfig {
    Scalar lr = 1e-4;
    Scalar weight_decay = 1e-5;
    std::size_t batch_size = 0;  // 0: use the model's suggested batch size
    std::size_t max_epochs = 50;
    std::size_t patience = 8;
    std::uint64_t seed = 1;
    std::size_t repeats = 10;
    AugmentMode augment = AugmentMode::Translate;
    std::string metric = "balanced_accuracy";

    void validate() const;
};

// (sensitivity + specificity) / 2 with threshold 0.5 on sigmoid outputs.
// Requires at least one sample of each class.
Scalar balanced_accuracy(const std::vector<Scalar>& predictions, const std::vector<int>& labels);

enum class EarlyStopDecision { Continue, Stop };

// Stop once the best validation value has not strictly improved for
// `patience` consecutive epochs.
EarlyStopDecision early_stopping_check(const std::vector<Scalar>& val_history, std::size_t patience);

struct EpochStats {
    Scalar train_loss = 0.0;
    Scalar train_balacc = 0.0;
    Scalar val_loss = 0.0;
    Scalar val_balacc = 0.0;
};

struct RepeatResult {
    std::uint64_t seed = 0;
    std::vector<EpochStats> epochs;
    std::size_t early_stop_epoch = 0;  // 1-based epoch at which training ended
    std::size_t best_epoch = 0;        // 1-based epoch of the reported model
    Scalar test_balacc = 0.0;
    Scalar test_loss = 0.0;
    double wall_seconds = 0.0;
};

// Split views over a record set with access accounting; the training loop
// asserts the test split is read exactly once per repeat, after training.
class Dataset {
public:
    explicit Dataset(std::vector<VolumeRecord> records);

    const std::vector<const VolumeRecord*>& split(const std::string& name);
    std::size_t split_size(const std::string& name) const;
    std::size_t access_count(const std::string& name) const;
    void reset_access_counts();

    const std::vector<VolumeRecord>& records() const { return records_; }

private:
    std::vector<VolumeRecord> records_;
    std::vector<const VolumeRecord*> train_, val_, test_;
    std::size_t train_reads_ = 0, val_reads_ = 0, test_reads_ = 0;
};

// Forward-only evaluation of a record list; returns (bce loss, balanced
// accuracy).
std::pair<Scalar, Scalar> evaluate(Model& model, const std::vector<const VolumeRecord*>& records,
                                   std::size_t batch_size);

// He-initialized model trained with seeded shuffled mini-batches,
// augmentation on the training split only, early stopping on validation
// balanced accuracy; final metrics come from the best-epoch checkpoint on
// the untouched test split. If out_model is given it receives the
// best-epoch model.
RepeatResult train_one(const ModelSpec& spec, Dataset& data, const TrainConfig& cfg,
                       std::uint64_t seed, Model* out_model = nullptr);

struct ModelAggregate {
    std::string model_name;
    std::vector<RepeatResult> repeats;
    Scalar mean_balacc = 0.0;
    Scalar std_balacc = 0.0;
    Scalar mean_stop_epoch = 0.0;
    Scalar std_stop_epoch = 0.0;
};

ModelAggregate aggregate_runs(const std::string& name, std::vector<RepeatResult> repeats);

struct ExperimentReport {
    std::vector<ModelAggregate> models;
    bool balance_checked = false;
    bool balance_ok = true;
    Scalar balance_delta = 0.0;  // |pif - baseline| / baseline parameter counts
};

struct RunHooks {
    std::function<void(const std::string&)> progress;
    // Called after every repeat with the best-epoch model.
    std::function<void(const ModelSpec&, std::size_t repeat, const RepeatResult&, Model&)> on_run;
};

// Trains every spec for cfg.repeats seeds (seed + r, shared across specs so
// repeats pair up). With two specs the parameter-count balance is checked
// and a warning is recorded when the counts differ by more than 10%.
ExperimentReport run_experiment(const std::vector<ModelSpec>& specs, Dataset& data,
                                const TrainConfig& cfg, const RunHooks& hooks = {});

// Aggregate results table, one row per model.
std::string format_report_table(const ExperimentReport& report);
// Machine-readable per-repeat log (TSV).
std::string format_repeat_log(const ModelAggregate& agg);
// Per-epoch TSV for one run.
std::string format_epoch_log(const RepeatResult& result);

}  // namespace pifnet

#include "pifnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace pifnet {

void TrainConfig::validate() const {
    if (!(lr >= 0.0)) throw ConfigError("train: learning rate must be non-negative");
    if (!(weight_decay >= 0.0)) throw ConfigError("train: weight decay must be non-negative");
    if (max_epochs == 0) throw ConfigError("train: max_epochs must be positive");
    if (patience == 0) throw ConfigError("train: patience must be >= 1");
    if (repeats == 0) throw ConfigError("train: repeats must be positive");
    if (metric != "balanced_accuracy") {
        throw ConfigError("train: unsupported metric '" + metric + "'");
    }
}

Scalar balanced_accuracy(const std::vector<Scalar>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw Error("balanced_accuracy: prediction/label count mismatch");
    }
    if (predictions.empty()) throw Error("balanced_accuracy: empty input");
    std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw Error("balanced_accuracy: label outside {0,1}");
        const int pred = predictions[i] > 0.5 ? 1 : 0;
        if (labels[i] == 1) {
            ++pos;
            tp += pred == 1 ? 1 : 0;
        } else {
            ++neg;
            tn += pred == 0 ? 1 : 0;
        }
    }
    if (pos == 0 || neg == 0) throw Error("balanced_accuracy: a class is absent");
    const Scalar sens = static_cast<Scalar>(tp) / static_cast<Scalar>(pos);
    const Scalar spec = static_cast<Scalar>(tn) / static_cast<Scalar>(neg);
    return 0.5 * (sens + spec);
}

EarlyStopDecision early_stopping_check(const std::vector<Scalar>& val_history, std::size_t patience) {
    if (val_history.empty()) throw Error("early_stopping_check: empty history");
    if (patience == 0) throw ConfigError("early_stopping_check: patience must be >= 1");
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < val_history.size(); ++i) {
        if (val_history[i] > best) {
            best = val_history[i];
            best_idx = i;
        }
    }
    return (val_history.size() - 1 - best_idx) >= patience ? EarlyStopDecision::Stop
                                                           : EarlyStopDecision::Continue;
}

Dataset::Dataset(std::vector<VolumeRecord> records) : records_(std::move(records)) {
    assert_no_leakage(records_);
    for (const auto& r : records_) {
        if (r.split == "train") train_.push_back(&r);
        else if (r.split == "val") val_.push_back(&r);
        else if (r.split == "test") test_.push_back(&r);
        else throw Error("dataset: record without split tag");
    }
}

const std::vector<const VolumeRecord*>& Dataset::split(const std::string& name) {
    if (name == "train") {
        ++train_reads_;
        return train_;
    }
    if (name == "val") {
        ++val_reads_;
        return val_;
    }
    if (name == "test") {
        ++test_reads_;
        return test_;
    }
    throw Error("dataset: unknown split '" + name + "'");
}

std::size_t Dataset::split_size(const std::string& name) const {
    if (name == "train") return train_.size();
    if (name == "val") return val_.size();
    if (name == "test") return test_.size();
    throw Error("dataset: unknown split '" + name + "'");
}

std::size_t Dataset::access_count(const std::string& name) const {
    if (name == "train") return train_reads_;
    if (name == "val") return val_reads_;
    if (name == "test") return test_reads_;
    throw Error("dataset: unknown split '" + name + "'");
}

void Dataset::reset_access_counts() { train_reads_ = val_reads_ = test_reads_ = 0; }

namespace {

Tensor batch_tensor(const std::vector<const VolumeRecord*>& records,
                    const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                    const std::vector<std::vector<Scalar>>* augmented) {
    const auto& e = records[idx[begin]]->extents;
    const std::size_t vol = e[0] * e[1] * e[2];
    const std::size_t B = end - begin;
    std::vector<Scalar> data(B * vol);
    for (std::size_t b = 0; b < B; ++b) {
        const std::vector<Scalar>& src =
            augmented ? (*augmented)[begin + b] : records[idx[begin + b]]->voxels;
        std::copy(src.begin(), src.end(), data.begin() + b * vol);
    }
    return Tensor::from(Shape{B, 1, e[0], e[1], e[2]}, std::move(data));
}

std::vector<Scalar> batch_labels(const std::vector<const VolumeRecord*>& records,
                                 const std::vector<std::size_t>& idx, std::size_t begin,
                                 std::size_t end) {
    std::vector<Scalar> labels;
    labels.reserve(end - begin);
    for (std::size_t b = begin; b < end; ++b) {
        labels.push_back(static_cast<Scalar>(records[idx[b]]->label));
    }
    return labels;
}

}  // namespace

std::pair<Scalar, Scalar> evaluate(Model& model, const std::vector<const VolumeRecord*>& records,
                                   std::size_t batch_size) {
    if (records.empty()) throw Error("evaluate: empty split");
    Rng dummy(0);
    std::vector<std::size_t> idx(records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    std::vector<Scalar> preds;
    std::vector<int> labels;
    Scalar loss_sum = 0.0;
    for (std::size_t begin = 0; begin < records.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, records.size());
        Tensor input = batch_tensor(records, idx, begin, end, nullptr);
        Tensor out = model.forward(input, /*training=*/false, dummy);
        std::vector<Scalar> y = batch_labels(records, idx, begin, end);
        Tensor loss = bce_loss(out, y);
        loss_sum += loss.item() * static_cast<Scalar>(end - begin);
        for (std::size_t b = 0; b < end - begin; ++b) {
            preds.push_back(out.data()[b]);
            labels.push_back(records[idx[begin + b]]->label);
        }
    }
    return {loss_sum / static_cast<Scalar>(records.size()), balanced_accuracy(preds, labels)};
}

RepeatResult train_one(const ModelSpec& spec, Dataset& data, const TrainConfig& cfg,
                       std::uint64_t seed, Model* out_model) {
    cfg.validate();
    check_shapes(spec);
    if (spec.has_pif() &&
        (cfg.augment == AugmentMode::Flip || cfg.augment == AugmentMode::Both)) {
        throw ConfigError("train: flip augmentation is not allowed for models with patch layers; "
                          "patches must see the same content every iteration");
    }

    const auto start_time = std::chrono::steady_clock::now();
    data.reset_access_counts();
    const auto& train_recs = data.split("train");
    const auto& val_recs = data.split("val");
    if (train_recs.empty() || val_recs.empty() || data.split_size("test") == 0) {
        throw Error("train: empty split");
    }
    assert_no_leakage(data.records());

    Rng rng(seed);
    Model model = Model::build(spec, rng);
    Adam opt(model.parameters(), AdamConfig{cfg.lr, cfg.weight_decay});
    const std::size_t batch = cfg.batch_size > 0 ? cfg.batch_size : spec.suggested_batch;

    RepeatResult result;
    result.seed = seed;
    std::vector<Scalar> val_history;
    Scalar best_val = -std::numeric_limits<Scalar>::infinity();
    std::vector<std::vector<Scalar>> best_params;

    std::vector<std::size_t> order(train_recs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // Seeded shuffle.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = rng.uniform_below(i);
            std::swap(order[i - 1], order[j]);
        }

        // Fresh augmentation draws for every training volume, every epoch.
        std::vector<std::vector<Scalar>> augmented(train_recs.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            const VolumeRecord& rec = *train_recs[order[i]];
            augmented[i] = cfg.augment == AugmentMode::None
                               ? rec.voxels
                               : augment(rec.voxels, rec.extents, cfg.augment, rng);
        }

        Scalar loss_sum = 0.0;
        std::vector<Scalar> preds;
        std::vector<int> labels;
        for (std::size_t begin = 0; begin < order.size(); begin += batch) {
            const std::size_t end = std::min(begin + batch, order.size());
            Tensor input = batch_tensor(train_recs, order, begin, end, &augmented);
            Tensor out = model.forward(input, /*training=*/true, rng);
            std::vector<Scalar> y = batch_labels(train_recs, order, begin, end);
            Tensor loss = bce_loss(out, y);
            loss_sum += loss.item() * static_cast<Scalar>(end - begin);
            for (std::size_t b = 0; b < end - begin; ++b) {
                preds.push_back(out.data()[b]);
                labels.push_back(train_recs[order[begin + b]]->label);
            }
            backward(loss);
            opt.step();
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<Scalar>(order.size());
        stats.train_balacc = balanced_accuracy(preds, labels);
        auto [vl, va] = evaluate(model, val_recs, batch);
        stats.val_loss = vl;
        stats.val_balacc = va;
        result.epochs.push_back(stats);
        val_history.push_back(va);
        result.early_stop_epoch = epoch;

        // Ties update the checkpoint (the latest equally-good epoch is the
        // better-trained one); the stop rule below still counts patience
        // from the last strict improvement.
        if (va >= best_val) {
            best_val = va;
            result.best_epoch = epoch;
            best_params = model.snapshot_parameters();
        }
        if (early_stopping_check(val_history, cfg.patience) == EarlyStopDecision::Stop) break;
    }

    model.restore_parameters(best_params);
    if (data.access_count("test") != 0) throw Error("train: test split was read during training");
    auto [tl, ta] = evaluate(model, data.split("test"), batch);
    if (data.access_count("test") != 1) throw Error("train: test split must be read exactly once");
    result.test_loss = tl;
    result.test_balacc = ta;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    if (out_model) *out_model = std::move(model);
    return result;
}

ModelAggregate aggregate_runs(const std::string& name, std::vector<RepeatResult> repeats) {
    if (repeats.empty()) throw Error("aggregate: no repeats");
    ModelAggregate agg;
    agg.model_name = name;
    agg.repeats = std::move(repeats);
    const Scalar n = static_cast<Scalar>(agg.repeats.size());
    Scalar acc_sum = 0.0, stop_sum = 0.0;
    for (const auto& r : agg.repeats) {
        acc_sum += r.test_balacc;
        stop_sum += static_cast<Scalar>(r.early_stop_epoch);
    }
    agg.mean_balacc = acc_sum / n;
    agg.mean_stop_epoch = stop_sum / n;
    Scalar acc_var = 0.0, stop_var = 0.0;
    for (const auto& r : agg.repeats) {
        acc_var += (r.test_balacc - agg.mean_balacc) * (r.test_balacc - agg.mean_balacc);
        stop_var += (static_cast<Scalar>(r.early_stop_epoch) - agg.mean_stop_epoch) *
                    (static_cast<Scalar>(r.early_stop_epoch) - agg.mean_stop_epoch);
    }
    agg.std_balacc = std::sqrt(acc_var / n);
    agg.std_stop_epoch = std::sqrt(stop_var / n);
    return agg;
}

ExperimentReport run_experiment(const std::vector<ModelSpec>& specs, Dataset& data,
                                const TrainConfig& cfg, const RunHooks& hooks) {
    if (specs.empty()) throw ConfigError("experiment: no model specs");
    cfg.validate();
    ExperimentReport report;
    if (specs.size() == 2) {
        const std::int64_t a = count_parameters(specs[0]);
        const std::int64_t b = count_parameters(specs[1]);
        report.balance_checked = true;
        report.balance_delta = std::abs(static_cast<Scalar>(b - a)) / static_cast<Scalar>(a);
        report.balance_ok = report.balance_delta <= 0.10;
    }
    for (const auto& spec : specs) {
        std::vector<RepeatResult> repeats;
        for (std::size_t r = 0; r < cfg.repeats; ++r) {
            const std::uint64_t seed = cfg.seed + r;
            if (hooks.progress) {
                hooks.progress(spec.name + ": repeat " + std::to_string(r + 1) + "/" +
                               std::to_string(cfg.repeats) + " (seed " + std::to_string(seed) + ")");
            }
            Model model;
            repeats.push_back(train_one(spec, data, cfg, seed, &model));
            if (hooks.on_run) hooks.on_run(spec, r, repeats.back(), model);
        }
        report.models.push_back(aggregate_runs(spec.name, std::move(repeats)));
    }
    return report;
}

std::string format_report_table(const ExperimentReport& report) {
    std::ostringstream os;
    os << "Model                Bal. acc. (std)      Early stopping iter.\n";
    for (const auto& m : report.models) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-20s %6.2f%% (%.2f)       %.1f\n", m.model_name.c_str(),
                      100.0 * m.mean_balacc, 100.0 * m.std_balacc, m.mean_stop_epoch);
        os << line;
    }
    if (report.balance_checked) {
        char line[128];
        std::snprintf(line, sizeof(line), "# parameter count delta: %.1f%% (%s)\n",
                      100.0 * report.balance_delta, report.balance_ok ? "balanced" : "NOT balanced");
        os << line;
    }
    return os.str();
}

std::string format_repeat_log(const ModelAggregate& agg) {
    std::ostringstream os;
    os << "# model\trepeat\tseed\ttest_balacc\tearly_stop_epoch\tbest_epoch\ttest_loss\twall_seconds\n";
    for (std::size_t i = 0; i < agg.repeats.size(); ++i) {
        const auto& r = agg.repeats[i];
        os << agg.model_name << "\t" << i << "\t" << r.seed << "\t" << r.test_balacc << "\t"
           << r.early_stop_epoch << "\t" << r.best_epoch << "\t" << r.test_loss << "\t"
           << r.wall_seconds << "\n";
    }
    return os.str();
}

std::string format_epoch_log(const RepeatResult& result) {
    std::ostringstream os;
    os << "# epoch\ttrain_loss\ttrain_balacc\tval_loss\tval_balacc\n";
    for (std::size_t i = 0; i < result.epochs.size(); ++i) {
        const auto& e = result.epochs[i];
        os << (i + 1) << "\t" << e.train_loss << "\t" << e.train_balacc << "\t" << e.val_loss << "\t"
           << e.val_balacc << "\n";
    }
    return os.str();
}

}  // namespace pifnet

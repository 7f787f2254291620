#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gradsplit/dataset.hpp"
#include "gradsplit/model.hpp"
#include "gradsplit/objective.hpp"
#include "gradsplit/optimizer.hpp"

namespace gradsplit {

// When a trial stops early.
//   fixed_epochs:          run max_epochs, no threshold outcome
//   train_acc_threshold:   train accuracy >= train_acc
//   overfit_gap_threshold: train accuracy - test accuracy >= overfit_gap
//   memorization:          train accuracy >= train_acc AND test accuracy <= test_acc_cap
struct StopRule {
    enum class Kind { fixed_epochs, train_acc_threshold, overfit_gap_threshold, memorization };
    Kind kind = Kind::fixed_epochs;
    double train_acc = 0.9;
    double overfit_gap = 0.5;
    double test_acc_cap = 0.13;

    void validate() const;
    bool satisfied(double train_accuracy, double test_accuracy) const;
};

const char* to_string(StopRule::Kind k);
StopRule::Kind stop_rule_kind_from_string(const std::string& s);

struct TrialConfig {
    ModelConfig model;
    ObjectiveSpec objective;
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-4;
    std::int64_t batch_size = 256;
    LabeledDataset train;
    LabeledDataset test;
    std::int64_t max_epochs = 100;
    StopRule stop;
    std::uint64_t seed = 0;  // drives the per-epoch minibatch shuffle

    void validate() const;
};

struct EpochRow {
    std::int64_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double test_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double overfit_gap = 0.0;  // train_acc - test_acc
    double first_layer_grad_norm = 0.0;
};

struct TrialOutcome {
    std::optional<std::int64_t> epochs_to_threshold;  // first epoch satisfying the stop rule
    double peak_grad_norm = 0.0;
    double final_grad_norm = 0.0;
};

struct TrialRecord {
    std::vector<EpochRow> rows;
    TrialOutcome outcome;
};

// Trains one model under the configured objective. Per epoch: resolve the
// branch on the full test set, loop shuffled minibatches (objective,
// backward, optimizer step), then record full-set metrics. Deterministic
// given the config; DivergenceError if the loss goes non-finite.
TrialRecord run_trial(const TrialConfig& config);

// First epoch with train accuracy >= the stop threshold while test accuracy
// stays <= k + slack. Requires a capped objective; nullopt = did not reach.
std::optional<std::int64_t> epochs_to_memorize(const TrialConfig& config, double k,
                                               double slack = 0.02);

struct SweepRow {
    SizeClass size = SizeClass::custom;
    std::int64_t train_count = 0;
    std::int64_t test_count = 0;
    std::optional<std::int64_t> epochs;
};

// Runs epochs_to_memorize per size class, subsetting the base config's
// datasets by prefix. All rows share the base seed.
std::vector<SweepRow> sweep_dataset_size(const TrialConfig& base,
                                         const std::vector<SizeClass>& sizes);

struct QualityOptions {
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-4;
    std::int64_t batch_size = 256;
    std::int64_t max_epochs = 200;
    double train_acc_threshold = 0.9;
    double slack = 0.02;
    std::uint64_t seed = 0;
};

// score = epochs(split objective reaches severe overfit)
//       - epochs(standard objective reaches the train accuracy threshold).
// Larger = more memorization-resistant. Any probe that does not reach its
// threshold makes the score the +infinity sentinel with did_not_reach set;
// when both fail the result is flagged indeterminate.
struct QualityResult {
    double score = 0.0;
    std::optional<std::int64_t> epochs_overfit;
    std::optional<std::int64_t> epochs_generalize;
    bool did_not_reach = false;
    bool indeterminate = false;
};

QualityResult dataset_quality_score(const LabeledDataset& ds_train, const LabeledDataset& ds_test,
                                    const ModelConfig& probe, const QualityOptions& options = {});

// Header plus one row per epoch, reals at 9 significant digits. A rerun of
// the same seeded trial produces a byte-identical file.
void emit_csv(const TrialRecord& record, const std::string& path);
std::string trial_csv_string(const TrialRecord& record);

// Parses a file written by emit_csv. The outcome carries peak/final grad
// norms recomputed from the rows; epochs_to_threshold is not stored in the
// CSV and comes back empty.
TrialRecord read_trial_csv(const std::string& path);

}  // namespace gradsplit

#include "gradsplit/trial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace gradsplit {

const char* to_string(StopRule::Kind k) {
    switch (k) {
        case StopRule::Kind::fixed_epochs: return "fixed_epochs";
        case StopRule::Kind::train_acc_threshold: return "train_acc_threshold";
        case StopRule::Kind::overfit_gap_threshold: return "overfit_gap_threshold";
        case StopRule::Kind::memorization: return "memorization";
    }
    return "?";
}

StopRule::Kind stop_rule_kind_from_string(const std::string& s) {
    if (s == "fixed_epochs") return StopRule::Kind::fixed_epochs;
    if (s == "train_acc_threshold") return StopRule::Kind::train_acc_threshold;
    if (s == "overfit_gap_threshold") return StopRule::Kind::overfit_gap_threshold;
    if (s == "memorization") return StopRule::Kind::memorization;
    throw ConfigError("unknown stop rule '" + s + "'");
}

void StopRule::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(train_acc) || !in_unit(overfit_gap)) {
        throw ConfigError("stop rule thresholds must lie in [0, 1]");
    }
    if (test_acc_cap < 0.0) throw ConfigError("stop rule test_acc_cap must be nonnegative");
}

bool StopRule::satisfied(double train_accuracy, double test_accuracy) const {
    switch (kind) {
        case Kind::fixed_epochs:
            return false;
        case Kind::train_acc_threshold:
            return train_accuracy >= train_acc;
        case Kind::overfit_gap_threshold:
            return train_accuracy - test_accuracy >= overfit_gap;
        case Kind::memorization:
            return train_accuracy >= train_acc && test_accuracy <= test_acc_cap;
    }
    return false;
}

void TrialConfig::validate() const {
    model.validate();
    objective.validate();
    stop.validate();
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (train.size() == 0 || test.size() == 0) throw ConfigError("trial needs nonempty datasets");
    train.validate();
    test.validate();
    if (train.class_count != model.class_count || test.class_count != model.class_count) {
        throw ConfigError("dataset class counts do not match the model");
    }
}

namespace {

OptimizerState make_optimizer(const TrialConfig& config) {
    return config.optimizer == OptimizerKind::sgd ? make_sgd(config.learning_rate)
                                                  : make_adam(config.learning_rate);
}

}  // namespace

TrialRecord run_trial(const TrialConfig& config) {
    config.validate();
    Model model = build(config.model);
    OptimizerState optimizer = make_optimizer(config);

    const std::int64_t n_train = config.train.size();
    const std::int64_t n_test = config.test.size();
    const std::int64_t batch = config.batch_size;

    TrialRecord record;
    std::int64_t test_cursor = 0;

    for (std::int64_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const EpochBranch branch = epoch_branch(config.objective, model, config.test);

        // Seeded per-epoch shuffle of the train minibatch order.
        std::vector<std::int64_t> order(static_cast<std::size_t>(n_train));
        for (std::int64_t i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;
        Rng shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        for (std::int64_t i = n_train - 1; i > 0; --i) {
            const std::int64_t j =
                static_cast<std::int64_t>(shuffle_rng() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double epoch_grad_norm = 0.0;
        for (std::int64_t begin = 0; begin < n_train; begin += batch) {
            const std::int64_t end = std::min(n_train, begin + batch);
            const std::vector<std::int64_t> idx(order.begin() + begin, order.begin() + end);
            Tensor mb_inputs = gather_rows(config.train.inputs, idx);
            Tensor mb_labels = gather_rows(config.train.labels, idx);

            // Test minibatches cycle through the designated test set in
            // stored order; only the split/plus branches consume them.
            Tensor test_inputs, test_labels;
            if (branch.active_case != BranchCase::train_only) {
                std::vector<std::int64_t> tidx(static_cast<std::size_t>(end - begin));
                for (std::size_t i = 0; i < tidx.size(); ++i) {
                    tidx[i] = (test_cursor + static_cast<std::int64_t>(i)) % n_test;
                }
                test_cursor = (test_cursor + (end - begin)) % n_test;
                test_inputs = gather_rows(config.test.inputs, tidx);
                test_labels = gather_rows(config.test.labels, tidx);
            }

            Tape tape;
            Tensor loss = evaluate_objective(tape, config.objective, model, mb_inputs, mb_labels,
                                             test_inputs, test_labels, branch);
            if (!std::isfinite(loss.item())) {
                throw DivergenceError("objective became non-finite at epoch " + std::to_string(epoch),
                                      epoch - 1);
            }
            tape.backward(loss);
            // Trajectory diagnostic: first-layer gradient norm from the last
            // step of the epoch, read just before the step clears it.
            if (end == n_train) epoch_grad_norm = model.first_layer_grad_norm();
            optimizer_step(optimizer, model);
        }

        EpochRow row;
        row.epoch = epoch;
        row.train_loss = dataset_loss(model, config.train);
        row.test_loss = dataset_loss(model, config.test);
        row.train_acc = dataset_accuracy(model, config.train);
        row.test_acc = dataset_accuracy(model, config.test);
        row.overfit_gap = row.train_acc - row.test_acc;
        row.first_layer_grad_norm = epoch_grad_norm;
        if (!std::isfinite(row.train_loss) || !std::isfinite(row.test_loss)) {
            throw DivergenceError("full-set loss became non-finite at epoch " + std::to_string(epoch),
                                  epoch - 1);
        }
        record.rows.push_back(row);

        if (!record.outcome.epochs_to_threshold &&
            config.stop.satisfied(row.train_acc, row.test_acc)) {
            record.outcome.epochs_to_threshold = epoch;
            break;
        }
    }

    for (const EpochRow& row : record.rows) {
        record.outcome.peak_grad_norm = std::max(record.outcome.peak_grad_norm,
                                                 row.first_layer_grad_norm);
    }
    if (!record.rows.empty()) {
        record.outcome.final_grad_norm = record.rows.back().first_layer_grad_norm;
    }
    return record;
}

std::optional<std::int64_t> epochs_to_memorize(const TrialConfig& config, double k, double slack) {
    if (config.objective.kind != ObjectiveKind::capped) {
        throw ContractError("epochs_to_memorize requires a capped objective");
    }
    TrialConfig cfg = config;
    cfg.objective.k = k;
    cfg.stop.kind = StopRule::Kind::memorization;
    cfg.stop.test_acc_cap = k + slack;
    const TrialRecord record = run_trial(cfg);
    return record.outcome.epochs_to_threshold;
}

std::vector<SweepRow> sweep_dataset_size(const TrialConfig& base,
                                         const std::vector<SizeClass>& sizes) {
    if (sizes.empty()) throw ContractError("sweep_dataset_size needs at least one size");
    std::vector<SweepRow> rows;
    for (SizeClass size : sizes) {
        SplitSpec spec;
        spec.train_count = base.train.size();
        spec.test_count = base.test.size();
        TrialConfig cfg = base;
        try {
            auto [train, test] = make_subsets(base.train, base.test, spec, size);
            cfg.train = train;
            cfg.test = test;
        } catch (const Error& e) {
            throw ConfigError("size " + std::string(to_string(size)) + ": " + e.what());
        }
        SweepRow row;
        row.size = size;
        row.train_count = cfg.train.size();
        row.test_count = cfg.test.size();
        row.epochs = epochs_to_memorize(cfg, cfg.objective.k);
        rows.push_back(row);
    }
    return rows;
}

QualityResult dataset_quality_score(const LabeledDataset& ds_train, const LabeledDataset& ds_test,
                                    const ModelConfig& probe, const QualityOptions& options) {
    const double naive = 1.0 / static_cast<double>(probe.class_count);

    TrialConfig overfit;
    overfit.model = probe;
    overfit.objective.kind = ObjectiveKind::split;
    overfit.optimizer = options.optimizer;
    overfit.learning_rate = options.learning_rate;
    overfit.batch_size = options.batch_size;
    overfit.train = ds_train;
    overfit.test = ds_test;
    overfit.max_epochs = options.max_epochs;
    overfit.stop.kind = StopRule::Kind::memorization;
    overfit.stop.train_acc = options.train_acc_threshold;
    overfit.stop.test_acc_cap = naive + options.slack;
    overfit.seed = options.seed;

    TrialConfig generalize = overfit;
    generalize.objective = ObjectiveSpec{};  // standard
    generalize.stop.kind = StopRule::Kind::train_acc_threshold;

    QualityResult result;
    result.epochs_overfit = run_trial(overfit).outcome.epochs_to_threshold;
    result.epochs_generalize = run_trial(generalize).outcome.epochs_to_threshold;
    if (result.epochs_overfit && result.epochs_generalize) {
        result.score = static_cast<double>(*result.epochs_overfit - *result.epochs_generalize);
    } else {
        result.score = std::numeric_limits<double>::infinity();
        result.did_not_reach = true;
        result.indeterminate = !result.epochs_overfit && !result.epochs_generalize;
    }
    return result;
}

// --- csv -------------------------------------------------------------------

namespace {

constexpr const char* kCsvHeader =
    "epoch,train_loss,test_loss,train_acc,test_acc,overfit_gap,first_layer_grad_norm";

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

std::string trial_csv_string(const TrialRecord& record) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const EpochRow& row : record.rows) {
        out << row.epoch << ',' << format_real(row.train_loss) << ',' << format_real(row.test_loss)
            << ',' << format_real(row.train_acc) << ',' << format_real(row.test_acc) << ','
            << format_real(row.overfit_gap) << ',' << format_real(row.first_layer_grad_norm)
            << '\n';
    }
    return out.str();
}

void emit_csv(const TrialRecord& record, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open CSV for writing: " + path);
    const std::string body = trial_csv_string(record);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw IoError("short write to CSV: " + path);
}

TrialRecord read_trial_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw FormatError("unexpected CSV header in " + path);
    }
    TrialRecord record;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        EpochRow row;
        double* const targets[] = {&row.train_loss, &row.test_loss, &row.train_acc,
                                   &row.test_acc,   &row.overfit_gap, &row.first_layer_grad_norm};
        if (!std::getline(ls, field, ',')) throw FormatError("bad CSV row in " + path);
        row.epoch = std::stoll(field);
        for (double* target : targets) {
            if (!std::getline(ls, field, ',')) throw FormatError("bad CSV row in " + path);
            *target = std::stod(field);
        }
        record.rows.push_back(row);
    }
    for (const EpochRow& row : record.rows) {
        record.outcome.peak_grad_norm = std::max(record.outcome.peak_grad_norm,
                                                 row.first_layer_grad_norm);
    }
    if (!record.rows.empty()) {
        record.outcome.final_grad_norm = record.rows.back().first_layer_grad_norm;
    }
    return record;
}

}  // namespace gradsplit

#include "gradsplit/objective.hpp"

#include <cmath>

namespace gradsplit {

const char* to_string(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::standard: return "standard";
        case ObjectiveKind::split: return "split";
        case ObjectiveKind::capped: return "capped";
        case ObjectiveKind::targeted: return "targeted";
    }
    return "?";
}

ObjectiveKind objective_kind_from_string(const std::string& s) {
    if (s == "standard") return ObjectiveKind::standard;
    if (s == "split") return ObjectiveKind::split;
    if (s == "capped") return ObjectiveKind::capped;
    if (s == "targeted") return ObjectiveKind::targeted;
    throw ConfigError("unknown objective kind '" + s + "'");
}

const char* to_string(BranchCase c) {
    switch (c) {
        case BranchCase::train_minus_test: return "train_minus_test";
        case BranchCase::train_only: return "train_only";
        case BranchCase::train_plus_test: return "train_plus_test";
    }
    return "?";
}

void ObjectiveSpec::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(k) || !in_unit(l) || !in_unit(u)) {
        throw ConfigError("objective thresholds must lie in [0, 1]");
    }
    if (kind == ObjectiveKind::targeted && l > u) {
        throw ConfigError("targeted objective requires l <= u");
    }
}

Tensor cross_entropy(Tape& tape, const Tensor& output, const Tensor& labels) {
    if (output.rank() != 2 || labels.rank() != 1 || labels.dim(0) != output.dim(0)) {
        throw DimensionError("cross_entropy: output " + shape_to_string(output.shape()) +
                             " and labels " + shape_to_string(labels.shape()) + " are incompatible");
    }
    const std::int64_t n = output.dim(0);
    const std::int64_t c = output.dim(1);
    if (c < 2) throw DimensionError("cross_entropy needs at least two classes");

    // Fused log-softmax + negative log likelihood, mean over the batch.
    Tensor out = Tensor::zeros({1});
    std::vector<double> log_probs(static_cast<std::size_t>(n * c));
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t y = static_cast<std::int64_t>(std::llround(labels.at(i)));
        if (y < 0 || y >= c) {
            throw DataError("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(c) + ") at row " + std::to_string(i));
        }
        const double* row = output.data() + i * c;
        double mx = row[0];
        for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::int64_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
        const double log_denom = mx + std::log(denom);
        for (std::int64_t j = 0; j < c; ++j) {
            log_probs[static_cast<std::size_t>(i * c + j)] = row[j] - log_denom;
        }
        total -= log_probs[static_cast<std::size_t>(i * c + y)];
    }
    out.data()[0] = total / static_cast<double>(n);

    tape.record([output = output, labels = labels, out = out, log_probs = std::move(log_probs), n, c]() mutable {
        if (!out.has_grad()) return;
        output.ensure_grad();
        const double g = out.grad()[0] / static_cast<double>(n);
        for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t y = static_cast<std::int64_t>(std::llround(labels.at(i)));
            double* grow = output.grad() + i * c;
            const double* lp = log_probs.data() + i * c;
            for (std::int64_t j = 0; j < c; ++j) {
                grow[j] += g * (std::exp(lp[j]) - (j == y ? 1.0 : 0.0));
            }
        }
    });
    return out;
}

double accuracy(const Tensor& output, const Tensor& labels) {
    if (output.rank() != 2 || labels.rank() != 1 || labels.dim(0) != output.dim(0)) {
        throw DimensionError("accuracy: output " + shape_to_string(output.shape()) +
                             " and labels " + shape_to_string(labels.shape()) + " are incompatible");
    }
    const std::int64_t n = output.dim(0);
    const std::int64_t c = output.dim(1);
    if (n < 1) throw ContractError("accuracy needs a nonempty batch");
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double* row = output.data() + i * c;
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < c; ++j) {
            if (row[j] > row[best]) best = j;  // ties keep the lowest index
        }
        if (best == static_cast<std::int64_t>(std::llround(labels.at(i)))) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

BranchCase branch_case_for(const ObjectiveSpec& spec, double m) {
    switch (spec.kind) {
        case ObjectiveKind::standard:
            return BranchCase::train_only;
        case ObjectiveKind::split:
            return BranchCase::train_minus_test;
        case ObjectiveKind::capped:
            // Strict comparison, exactly as the case rule is written.
            return m > spec.k ? BranchCase::train_minus_test : BranchCase::train_only;
        case ObjectiveKind::targeted:
            if (m > spec.u) return BranchCase::train_minus_test;
            if (m < spec.l) return BranchCase::train_plus_test;
            return BranchCase::train_only;  // inside the [l, u] band
    }
    return BranchCase::train_only;
}

EpochBranch epoch_branch(const ObjectiveSpec& spec, const Model& model,
                         const LabeledDataset& test_set) {
    spec.validate();
    if (test_set.size() == 0) throw ContractError("epoch_branch needs a nonempty test set");
    EpochBranch branch;
    branch.measured_test_accuracy = dataset_accuracy(model, test_set);
    branch.active_case = branch_case_for(spec, branch.measured_test_accuracy);
    return branch;
}

Tensor evaluate_objective(Tape& tape, const ObjectiveSpec& spec, const Model& model,
                          const Tensor& train_inputs, const Tensor& train_labels,
                          const Tensor& test_inputs, const Tensor& test_labels,
                          const EpochBranch& branch) {
    spec.validate();
    if (branch_case_for(spec, branch.measured_test_accuracy) != branch.active_case) {
        throw ContractError(std::string("epoch branch '") + to_string(branch.active_case) +
                            "' is inconsistent with a " + to_string(spec.kind) +
                            " objective at measured accuracy " +
                            std::to_string(branch.measured_test_accuracy));
    }
    Tensor train_loss = cross_entropy(tape, model.forward(tape, train_inputs), train_labels);
    switch (branch.active_case) {
        case BranchCase::train_only:
            return train_loss;
        case BranchCase::train_minus_test:
            return sub(tape, train_loss,
                       cross_entropy(tape, model.forward(tape, test_inputs), test_labels));
        case BranchCase::train_plus_test:
            return add(tape, train_loss,
                       cross_entropy(tape, model.forward(tape, test_inputs), test_labels));
    }
    throw ContractError("unreachable branch case");
}

double dataset_loss(const Model& model, const LabeledDataset& ds, std::int64_t chunk) {
    const std::int64_t n = ds.size();
    if (n == 0) throw ContractError("dataset_loss needs a nonempty dataset");
    double total = 0.0;
    for (std::int64_t begin = 0; begin < n; begin += chunk) {
        const std::int64_t end = std::min(n, begin + chunk);
        Tape tape(false);
        Tensor out = model.forward(tape, slice_rows(ds.inputs, begin, end));
        const double m = cross_entropy(tape, out, slice_rows(ds.labels, begin, end)).item();
        total += m * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(n);
}

double dataset_accuracy(const Model& model, const LabeledDataset& ds, std::int64_t chunk) {
    const std::int64_t n = ds.size();
    if (n == 0) throw ContractError("dataset_accuracy needs a nonempty dataset");
    double hits = 0.0;
    for (std::int64_t begin = 0; begin < n; begin += chunk) {
        const std::int64_t end = std::min(n, begin + chunk);
        Tape tape(false);
        Tensor out = model.forward(tape, slice_rows(ds.inputs, begin, end));
        hits += accuracy(out, slice_rows(ds.labels, begin, end)) * static_cast<double>(end - begin);
    }
    return hits / static_cast<double>(n);
}

}  // namespace gradsplit

#pragma once

#include <string>

#include "gradsplit/dataset.hpp"
#include "gradsplit/model.hpp"
#include "gradsplit/tape.hpp"

namespace gradsplit {

// Which training objective drives a trial.
//   standard: loss(train)
//   split:    loss(train) - loss(test)
//   capped:   split while test accuracy exceeds k, else standard
//   targeted: split above u, loss(train) + loss(test) below l,
//             standard inside the [l, u] band
enum class ObjectiveKind { standard, split, capped, targeted };

const char* to_string(ObjectiveKind k);
ObjectiveKind objective_kind_from_string(const std::string& s);

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::standard;
    double k = 0.11;  // capped threshold
    double l = 0.0;   // targeted lower bound
    double u = 0.0;   // targeted upper bound (l <= u)

    void validate() const;
};

enum class BranchCase { train_minus_test, train_only, train_plus_test };

const char* to_string(BranchCase c);

// The conditional of the capped/targeted objectives, resolved once at epoch
// start on the full designated test set and frozen for every minibatch of
// that epoch.
struct EpochBranch {
    BranchCase active_case = BranchCase::train_only;
    double measured_test_accuracy = 0.0;
};

// Mean over the batch of -log p(correct class) after a log-softmax of the
// given output rows. Differentiable through the tape; labels are class
// indices (DataError when out of range).
Tensor cross_entropy(Tape& tape, const Tensor& output, const Tensor& labels);

// Fraction of rows whose argmax equals the label; argmax ties break to the
// lowest class index.
double accuracy(const Tensor& output, const Tensor& labels);

// Case selection rule shared by epoch_branch and evaluate_objective.
BranchCase branch_case_for(const ObjectiveSpec& spec, double measured_test_accuracy);

// Measures accuracy over the full test set (in chunks, without recording)
// and freezes the branch for the epoch.
EpochBranch epoch_branch(const ObjectiveSpec& spec, const Model& model,
                         const LabeledDataset& test_set);

// Scalar objective value for one minibatch pair under the frozen branch.
// ContractError when the branch is inconsistent with the spec's own rule.
Tensor evaluate_objective(Tape& tape, const ObjectiveSpec& spec, const Model& model,
                          const Tensor& train_inputs, const Tensor& train_labels,
                          const Tensor& test_inputs, const Tensor& test_labels,
                          const EpochBranch& branch);

// Whole-dataset helpers (chunked, non-recording).
double dataset_loss(const Model& model, const LabeledDataset& ds, std::int64_t chunk = 512);
double dataset_accuracy(const Model& model, const LabeledDataset& ds, std::int64_t chunk = 512);

}  // namespace gradsplit

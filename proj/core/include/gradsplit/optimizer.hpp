#pragma once

#include <string>
#include <vector>

#include "gradsplit/model.hpp"

namespace gradsplit {

enum class OptimizerKind { sgd, adam };

const char* to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

// Per-trial optimizer state. Moment tensors are lazily sized to the model's
// parameters on the first step; step_count goes up by exactly one per update.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-4;  // the step size in theta <- theta - lr * grad
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_stability = 1e-8;
    std::vector<std::vector<double>> first_moments;
    std::vector<std::vector<double>> second_moments;
    std::int64_t step_count = 0;
};

OptimizerState make_sgd(double learning_rate);
OptimizerState make_adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double eps_stability = 1e-8);

// theta <- theta - lr * grad for every parameter, then grads are cleared.
// StateError if any parameter is missing its gradient.
void sgd_step(OptimizerState& state, Model& model);

// Bias-corrected adaptive update with the usual (0.9, 0.999, 1e-8) defaults.
void adam_step(OptimizerState& state, Model& model);

// Dispatch on state.kind.
void optimizer_step(OptimizerState& state, Model& model);

}  // namespace gradsplit

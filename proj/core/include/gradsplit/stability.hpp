#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "gradsplit/dataset.hpp"
#include "gradsplit/model.hpp"

namespace gradsplit {

// Monte-Carlo probe of loss stability under parameter perturbation.
// For each radius in the grid, direction_count uniform unit directions are
// drawn; a radius passes when every |J(theta) - J(theta + r*dir)| stays
// strictly below delta. Direction streams are seeded per radius and nested:
// the first k directions are the same for any direction_count >= k.
struct StabilityProbe {
    double delta = 0.01;
    int direction_count = 64;
    std::vector<double> radius_grid = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
    std::uint64_t seed = 0;

    void validate() const;  // grid strictly increasing and positive, delta > 0
};

struct StabilityReport {
    // Largest grid radius at which every sampled direction stayed below
    // delta; 0 when none passed.
    double stability_radius = 0.0;
    std::vector<double> radii;
    // loss_deltas[radius_index][direction_index] = |J(theta) - J(theta + c)|
    std::vector<std::vector<double>> loss_deltas;
};

// Core scan over an arbitrary loss landscape; `loss_at_offset` evaluates the
// loss at theta + offset with offset living in R^dim.
StabilityReport stability_scan(const std::function<double(const std::vector<double>&)>& loss_at_offset,
                               std::size_t dim, const StabilityProbe& probe);

// Probe a model's cross-entropy loss over `dataset` around its current
// parameters. The model is cloned internally; the argument is untouched.
StabilityReport stability_radius(const Model& model, const LabeledDataset& dataset,
                                 const StabilityProbe& probe);

// Both reports computed with an identical probe (same seed, same
// directions), emitted side by side.
std::pair<StabilityReport, StabilityReport> compare_stability(const Model& generalizing_model,
                                                              const Model& memorizing_model,
                                                              const LabeledDataset& dataset,
                                                              const StabilityProbe& probe);

// Activations the change-of-variables construction can invert.
enum class InvertibleActivation { identity, tanh };

// For a single linear layer y = f(W a + b) perturbed by (delta_W, delta_b),
// returns the input shift d with f(W (a + d) + b) equal to the perturbed
// output, i.e. d = W^{-1}(f^{-1}(y') - b) - a. W must be square and
// well-conditioned (SingularityError otherwise, condition number >= 1e8).
std::vector<double> equivalent_input_shift(const Tensor& weight, const Tensor& bias,
                                           InvertibleActivation activation,
                                           const Tensor& delta_weight, const Tensor& delta_bias,
                                           const std::vector<double>& input);

// Dense helpers shared with tests; Gauss-Jordan with partial pivoting.
// `inverse` throws SingularityError on a vanishing pivot.
std::vector<double> dense_inverse(const std::vector<double>& matrix, std::size_t n);
double condition_number_1(const std::vector<double>& matrix, std::size_t n);

}  // namespace gradsplit

#pragma once

#include <optional>
#include <vector>

#include "gradsplit/errors.hpp"
#include "gradsplit/rng.hpp"
#include "gradsplit/trial.hpp"

namespace gradsplit {

// Two flat-bottomed piecewise-linear wells (a and b) cut into a constant
// plateau, separated along the all-ones diagonal. Per axis each well has a
// flat core of width s and linear walls of extent m_slope per side; axes
// combine by max, so each basin is an axis-aligned box of side s + 2m and
// the per-axis width ratios multiply exactly across dimensions.
struct BasinSpec {
    int n = 1;
    double s_a = 2.0;
    double s_b = 4.0;
    double m_slope = 1.0;
    double separation = 20.0;
    double slope_magnitude = 1.0;

    void validate() const;
};

// Ratios travel in log-space; e.g. a 1000-dimensional (2/3)^n underflows
// 64-bit floats. `value` is present only when exp(log_value) is
// representable.
struct LogValue {
    double log_value = 0.0;
    std::optional<double> value;
};

// ((s_a + 2m) / (s_b + 2m))^n : volume of basin a over basin b.
LogValue analytic_basin_ratio(const BasinSpec& spec);

// (s_b / (s_b + 2m))^n : the stable core of b over its whole basin.
LogValue stable_fraction(const BasinSpec& spec);

enum class Attractor { a, b, neither };

class TwoWellLandscape {
public:
    explicit TwoWellLandscape(const BasinSpec& spec);

    double loss(const std::vector<double>& x) const;
    // Subgradient: 0 on flat cores and the plateau, otherwise the slope of
    // the single max-profile axis (lowest index on ties).
    std::vector<double> gradient(const std::vector<double>& x) const;

    struct DescentResult {
        std::vector<double> terminal;
        std::int64_t steps = 0;
        bool converged = false;
    };
    // Plain gradient descent x <- x - epsilon * grad until the subgradient
    // vanishes.
    DescentResult descend(std::vector<double> x, double epsilon, std::int64_t max_steps) const;

    // Which flat core contains x, if any.
    Attractor classify(const std::vector<double>& x) const;

    const std::vector<double>& center_a() const { return center_a_; }
    const std::vector<double>& center_b() const { return center_b_; }
    double basin_half_width_a() const { return spec_.s_a / 2.0 + spec_.m_slope; }
    double basin_half_width_b() const { return spec_.s_b / 2.0 + spec_.m_slope; }

private:
    BasinSpec spec_;
    std::vector<double> center_a_;
    std::vector<double> center_b_;
};

struct DescentParams {
    double epsilon = 0.25;
    std::int64_t max_steps = 100000;
};

struct BasinFractions {
    double fraction_a = 0.0;
    double fraction_b = 0.0;
    double fraction_neither = 0.0;
    std::int64_t samples = 0;
};

// Samples initial points uniformly over the union of the two basins, runs
// descent, and classifies the terminal points. Requires
// epsilon * slope_magnitude < min(s_a, s_b) so steps cannot jump a flat core.
BasinFractions monte_carlo_basin(const BasinSpec& spec, std::int64_t samples,
                                 const DescentParams& descent, std::uint64_t seed);

// --- Brunn-Minkowski ----------------------------------------------------------

enum class SetKind { axis_box, ball };

struct SetSpec {
    SetKind kind = SetKind::axis_box;
    int n = 1;
    std::vector<double> sides;  // axis_box
    double radius = 1.0;        // ball

    void validate() const;
    double volume() const;
};

struct BrunnMinkowskiResult {
    double lhs = 0.0;  // mu(A + B)^{1/n}
    double rhs = 0.0;  // mu(A)^{1/n} + mu(B)^{1/n}
    double lhs_stderr = 0.0;  // 0 for analytic sums
    bool monte_carlo = false;
    bool holds = false;
};

// Volumes of boxes and balls are analytic, as is the Minkowski sum for
// box+box (side sums) and ball+ball (radius sum). Mixed kinds integrate by
// Monte Carlo over the sum's bounding box; `holds` allows three standard
// errors of slack.
BrunnMinkowskiResult brunn_minkowski_check(const SetSpec& a, const SetSpec& b,
                                           std::int64_t samples, std::uint64_t seed);

// --- gradient-norm trajectories -------------------------------------------------

struct TraceSummary {
    std::int64_t peak_epoch = 0;
    double peak_value = 0.0;
    double final_value = 0.0;
};

struct TraceCompare {
    TraceSummary standard_run;
    TraceSummary split_run;
    bool peak_standard_greater = false;
    bool final_standard_smaller = false;
    bool peak_tie = false;
    bool final_tie = false;
    bool truncated = false;  // rows compared over a common prefix only
    std::int64_t compared_epochs = 0;
};

// Compares first-layer gradient-norm trajectories of a standard-objective
// run against a split-objective run over their common epoch prefix.
TraceCompare grad_norm_trace_compare(const TrialRecord& record_standard,
                                     const TrialRecord& record_split);

}  // namespace gradsplit

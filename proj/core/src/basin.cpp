#include "gradsplit/basin.hpp"

#include <algorithm>
#include <cmath>

namespace gradsplit {

void BasinSpec::validate() const {
    if (n < 1) throw ConfigError("basin dimension must be >= 1");
    if (s_a < 0.0 || s_b < 0.0) throw ConfigError("stable widths must be nonnegative");
    if (m_slope <= 0.0) throw ConfigError("slope extent must be positive");
    if (separation <= 0.0) throw ConfigError("separation must be positive");
    if (slope_magnitude <= 0.0) throw ConfigError("slope magnitude must be positive");
}

LogValue analytic_basin_ratio(const BasinSpec& spec) {
    spec.validate();
    LogValue out;
    out.log_value = static_cast<double>(spec.n) *
                    (std::log(spec.s_a + 2.0 * spec.m_slope) - std::log(spec.s_b + 2.0 * spec.m_slope));
    if (out.log_value > -700.0 && out.log_value < 700.0) out.value = std::exp(out.log_value);
    return out;
}

LogValue stable_fraction(const BasinSpec& spec) {
    spec.validate();
    if (spec.s_b <= 0.0) throw ConfigError("stable_fraction needs s_b > 0");
    LogValue out;
    out.log_value = static_cast<double>(spec.n) *
                    (std::log(spec.s_b) - std::log(spec.s_b + 2.0 * spec.m_slope));
    if (out.log_value > -700.0 && out.log_value < 700.0) out.value = std::exp(out.log_value);
    return out;
}

TwoWellLandscape::TwoWellLandscape(const BasinSpec& spec) : spec_(spec) {
    spec.validate();
    const std::size_t n = static_cast<std::size_t>(spec.n);
    center_a_.assign(n, 0.0);
    const double per_axis = spec.separation / std::sqrt(static_cast<double>(spec.n));
    center_b_.assign(n, per_axis);
    if (per_axis <= basin_half_width_a() + basin_half_width_b()) {
        throw ConfigError("attractor basins overlap; increase separation");
    }
}

namespace {

// Per-axis wall penetration: 0 on the flat core, up to m on the plateau.
inline double axis_profile(double x, double center, double flat_half, double m) {
    return std::clamp(std::abs(x - center) - flat_half, 0.0, m);
}

}  // namespace

double TwoWellLandscape::loss(const std::vector<double>& x) const {
    const double m = spec_.m_slope;
    double profile_a = 0.0, profile_b = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        profile_a = std::max(profile_a, axis_profile(x[i], center_a_[i], spec_.s_a / 2.0, m));
        profile_b = std::max(profile_b, axis_profile(x[i], center_b_[i], spec_.s_b / 2.0, m));
    }
    return spec_.slope_magnitude * std::min(profile_a, profile_b);
}

std::vector<double> TwoWellLandscape::gradient(const std::vector<double>& x) const {
    std::vector<double> g(x.size(), 0.0);
    const double m = spec_.m_slope;

    // The point can sit inside at most one basin box (they are disjoint).
    for (int which = 0; which < 2; ++which) {
        const std::vector<double>& center = which == 0 ? center_a_ : center_b_;
        const double flat_half = (which == 0 ? spec_.s_a : spec_.s_b) / 2.0;
        const double box_half = flat_half + m;
        bool inside = true;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (std::abs(x[i] - center[i]) >= box_half) {
                inside = false;
                break;
            }
        }
        if (!inside) continue;
        std::size_t best_axis = 0;
        double best_profile = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double p = axis_profile(x[i], center[i], flat_half, m);
            if (p > best_profile) {
                best_profile = p;
                best_axis = i;
            }
        }
        if (best_profile > 0.0) {
            g[best_axis] = spec_.slope_magnitude * (x[best_axis] > center[best_axis] ? 1.0 : -1.0);
        }
        return g;
    }
    return g;  // plateau: subgradient 0
}

TwoWellLandscape::DescentResult TwoWellLandscape::descend(std::vector<double> x, double epsilon,
                                                          std::int64_t max_steps) const {
    DescentResult result;
    for (std::int64_t step = 0; step < max_steps; ++step) {
        const std::vector<double> g = gradient(x);
        bool flat = true;
        for (double v : g) {
            if (v != 0.0) {
                flat = false;
                break;
            }
        }
        if (flat) {
            result.terminal = std::move(x);
            result.steps = step;
            result.converged = true;
            return result;
        }
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= epsilon * g[i];
    }
    result.terminal = std::move(x);
    result.steps = max_steps;
    result.converged = false;
    return result;
}

Attractor TwoWellLandscape::classify(const std::vector<double>& x) const {
    bool in_a = true, in_b = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x[i] - center_a_[i]) > spec_.s_a / 2.0) in_a = false;
        if (std::abs(x[i] - center_b_[i]) > spec_.s_b / 2.0) in_b = false;
    }
    if (in_a) return Attractor::a;
    if (in_b) return Attractor::b;
    return Attractor::neither;
}

BasinFractions monte_carlo_basin(const BasinSpec& spec, std::int64_t samples,
                                 const DescentParams& descent, std::uint64_t seed) {
    spec.validate();
    if (samples < 1) throw ConfigError("monte_carlo_basin needs at least one sample");
    if (!(descent.epsilon * spec.slope_magnitude < std::min(spec.s_a, spec.s_b))) {
        throw ConfigError("descent step epsilon*slope must stay below the smaller flat width");
    }
    const TwoWellLandscape landscape(spec);

    // P(start in basin a) = w_a^n / (w_a^n + w_b^n), computed in log-space.
    const double log_ratio = static_cast<double>(spec.n) *
                             (std::log(spec.s_b + 2.0 * spec.m_slope) -
                              std::log(spec.s_a + 2.0 * spec.m_slope));
    const double p_a = 1.0 / (1.0 + std::exp(log_ratio));

    Rng rng(seed);
    const std::size_t dim = static_cast<std::size_t>(spec.n);
    std::vector<double> x(dim);
    std::int64_t count_a = 0, count_b = 0, count_neither = 0;
    for (std::int64_t s = 0; s < samples; ++s) {
        const bool pick_a = uniform_unit(rng) < p_a;
        const std::vector<double>& center = pick_a ? landscape.center_a() : landscape.center_b();
        const double half = pick_a ? landscape.basin_half_width_a() : landscape.basin_half_width_b();
        for (std::size_t i = 0; i < dim; ++i) {
            x[i] = uniform_range(rng, center[i] - half, center[i] + half);
        }
        const auto result = landscape.descend(x, descent.epsilon, descent.max_steps);
        if (!result.converged) {
            ++count_neither;
            continue;
        }
        switch (landscape.classify(result.terminal)) {
            case Attractor::a: ++count_a; break;
            case Attractor::b: ++count_b; break;
            case Attractor::neither: ++count_neither; break;
        }
    }
    BasinFractions fractions;
    fractions.samples = samples;
    fractions.fraction_a = static_cast<double>(count_a) / static_cast<double>(samples);
    fractions.fraction_b = static_cast<double>(count_b) / static_cast<double>(samples);
    fractions.fraction_neither = static_cast<double>(count_neither) / static_cast<double>(samples);
    return fractions;
}

// --- Brunn-Minkowski -------------------------------------------------------------

void SetSpec::validate() const {
    if (n < 1) throw ConfigError("set dimension must be >= 1");
    if (kind == SetKind::axis_box) {
        if (sides.size() != static_cast<std::size_t>(n)) {
            throw ConfigError("axis_box needs one side length per dimension");
        }
        for (double s : sides) {
            if (s <= 0.0) throw ConfigError("box sides must be positive");
        }
    } else {
        if (radius <= 0.0) throw ConfigError("ball radius must be positive");
    }
}

double SetSpec::volume() const {
    validate();
    if (kind == SetKind::axis_box) {
        double v = 1.0;
        for (double s : sides) v *= s;
        return v;
    }
    const double half_n = static_cast<double>(n) / 2.0;
    return std::exp(half_n * std::log(std::numbers::pi) +
                    static_cast<double>(n) * std::log(radius) - std::lgamma(half_n + 1.0));
}

BrunnMinkowskiResult brunn_minkowski_check(const SetSpec& a, const SetSpec& b,
                                           std::int64_t samples, std::uint64_t seed) {
    a.validate();
    b.validate();
    if (a.n != b.n) {
        throw DimensionError("brunn_minkowski_check: dimensions " + std::to_string(a.n) + " and " +
                             std::to_string(b.n) + " differ");
    }
    const double n = static_cast<double>(a.n);
    BrunnMinkowskiResult result;
    result.rhs = std::pow(a.volume(), 1.0 / n) + std::pow(b.volume(), 1.0 / n);

    double sum_volume = 0.0;
    double sum_stderr = 0.0;
    if (a.kind == SetKind::axis_box && b.kind == SetKind::axis_box) {
        double v = 1.0;
        for (int i = 0; i < a.n; ++i) v *= a.sides[static_cast<std::size_t>(i)] + b.sides[static_cast<std::size_t>(i)];
        sum_volume = v;
    } else if (a.kind == SetKind::ball && b.kind == SetKind::ball) {
        SetSpec sum = a;
        sum.radius = a.radius + b.radius;
        sum_volume = sum.volume();
    } else {
        // box (+) ball = {x : dist(x, box) <= r}; integrate over the sum's
        // bounding box by Monte Carlo.
        if (samples < 1) throw ConfigError("mixed-kind check needs Monte Carlo samples");
        const SetSpec& box = a.kind == SetKind::axis_box ? a : b;
        const SetSpec& ball = a.kind == SetKind::ball ? a : b;
        const double r = ball.radius;
        double bound_volume = 1.0;
        for (double s : box.sides) bound_volume *= s + 2.0 * r;
        Rng rng(seed);
        std::int64_t hits = 0;
        std::vector<double> x(static_cast<std::size_t>(box.n));
        for (std::int64_t s = 0; s < samples; ++s) {
            double dist2 = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double half = box.sides[i] / 2.0;
                const double xi = uniform_range(rng, -half - r, half + r);
                const double excess = std::max(0.0, std::abs(xi) - half);
                dist2 += excess * excess;
            }
            if (dist2 <= r * r) ++hits;
        }
        const double p = static_cast<double>(hits) / static_cast<double>(samples);
        sum_volume = bound_volume * p;
        sum_stderr = bound_volume * std::sqrt(std::max(p * (1.0 - p), 0.0) /
                                              static_cast<double>(samples));
        result.monte_carlo = true;
    }

    result.lhs = std::pow(sum_volume, 1.0 / n);
    if (result.monte_carlo && sum_volume > 0.0) {
        // Delta method through v^{1/n}.
        result.lhs_stderr = sum_stderr * result.lhs / (n * sum_volume);
    }
    const double tolerance = 3.0 * result.lhs_stderr + 1e-9 * std::max(1.0, std::abs(result.rhs));
    result.holds = result.lhs + tolerance >= result.rhs;
    return result;
}

// --- trajectories ------------------------------------------------------------------

TraceCompare grad_norm_trace_compare(const TrialRecord& record_standard,
                                     const TrialRecord& record_split) {
    TraceCompare cmp;
    const std::size_t common = std::min(record_standard.rows.size(), record_split.rows.size());
    cmp.compared_epochs = static_cast<std::int64_t>(common);
    cmp.truncated = record_standard.rows.size() != record_split.rows.size() || common == 0;
    if (common == 0) return cmp;

    auto summarize = [common](const TrialRecord& record) {
        TraceSummary s;
        s.peak_epoch = record.rows.front().epoch;
        s.peak_value = record.rows.front().first_layer_grad_norm;
        for (std::size_t i = 0; i < common; ++i) {
            const EpochRow& row = record.rows[i];
            if (row.first_layer_grad_norm > s.peak_value) {
                s.peak_value = row.first_layer_grad_norm;
                s.peak_epoch = row.epoch;
            }
        }
        s.final_value = record.rows[common - 1].first_layer_grad_norm;
        return s;
    };
    cmp.standard_run = summarize(record_standard);
    cmp.split_run = summarize(record_split);
    cmp.peak_tie = cmp.standard_run.peak_value == cmp.split_run.peak_value;
    cmp.final_tie = cmp.standard_run.final_value == cmp.split_run.final_value;
    cmp.peak_standard_greater = cmp.standard_run.peak_value > cmp.split_run.peak_value;
    cmp.final_standard_smaller = cmp.standard_run.final_value < cmp.split_run.final_value;
    return cmp;
}

}  // namespace gradsplit

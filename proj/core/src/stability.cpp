#include "gradsplit/stability.hpp"

#include <algorithm>
#include <cmath>

#include "gradsplit/objective.hpp"

namespace gradsplit {

void StabilityProbe::validate() const {
    if (delta <= 0.0) throw ConfigError("stability probe delta must be positive");
    if (direction_count < 1) throw ConfigError("stability probe needs at least one direction");
    if (radius_grid.empty()) throw ConfigError("stability probe needs a radius grid");
    double prev = 0.0;
    for (double r : radius_grid) {
        if (r <= prev) throw ConfigError("radius grid must be strictly increasing and positive");
        prev = r;
    }
}

StabilityReport stability_scan(const std::function<double(const std::vector<double>&)>& loss_at_offset,
                               std::size_t dim, const StabilityProbe& probe) {
    probe.validate();
    if (dim == 0) throw ContractError("stability_scan needs at least one parameter");

    std::vector<double> zero(dim, 0.0);
    const double base_loss = loss_at_offset(zero);

    StabilityReport report;
    report.radii = probe.radius_grid;
    report.loss_deltas.resize(probe.radius_grid.size());

    std::vector<double> offset(dim);
    for (std::size_t ri = 0; ri < probe.radius_grid.size(); ++ri) {
        const double radius = probe.radius_grid[ri];
        Rng rng(mix_seed(probe.seed, ri));
        bool all_below = true;
        auto& deltas = report.loss_deltas[ri];
        deltas.reserve(static_cast<std::size_t>(probe.direction_count));
        for (int d = 0; d < probe.direction_count; ++d) {
            double norm2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                offset[i] = normal(rng);
                norm2 += offset[i] * offset[i];
            }
            const double inv = radius / std::sqrt(std::max(norm2, 1e-300));
            for (std::size_t i = 0; i < dim; ++i) offset[i] *= inv;
            const double delta = std::abs(loss_at_offset(offset) - base_loss);
            deltas.push_back(delta);
            if (!(delta < probe.delta)) all_below = false;  // strict inequality
        }
        if (all_below) report.stability_radius = radius;
    }
    return report;
}

StabilityReport stability_radius(const Model& model, const LabeledDataset& dataset,
                                 const StabilityProbe& probe) {
    Model working = model.clone();
    std::vector<Tensor>& params = working.parameters();
    std::size_t dim = 0;
    for (const Tensor& p : params) dim += static_cast<std::size_t>(p.numel());

    std::vector<double> base(dim);
    {
        std::size_t at = 0;
        for (const Tensor& p : params) {
            std::copy(p.data(), p.data() + p.numel(), base.begin() + static_cast<std::ptrdiff_t>(at));
            at += static_cast<std::size_t>(p.numel());
        }
    }

    auto loss_at_offset = [&](const std::vector<double>& offset) {
        std::size_t at = 0;
        for (Tensor& p : params) {
            double* dst = p.data();
            for (std::int64_t i = 0; i < p.numel(); ++i, ++at) {
                dst[i] = base[at] + offset[at];
            }
        }
        return dataset_loss(working, dataset);
    };
    return stability_scan(loss_at_offset, dim, probe);
}

std::pair<StabilityReport, StabilityReport> compare_stability(const Model& generalizing_model,
                                                              const Model& memorizing_model,
                                                              const LabeledDataset& dataset,
                                                              const StabilityProbe& probe) {
    return {stability_radius(generalizing_model, dataset, probe),
            stability_radius(memorizing_model, dataset, probe)};
}

// --- dense linear algebra ----------------------------------------------------

std::vector<double> dense_inverse(const std::vector<double>& matrix, std::size_t n) {
    if (matrix.size() != n * n) throw ContractError("dense_inverse: matrix size mismatch");
    std::vector<double> a = matrix;
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        }
        const double pv = a[pivot * n + col];
        if (std::abs(pv) < 1e-300) {
            throw SingularityError("matrix is singular to working precision");
        }
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a[pivot * n + j], a[col * n + j]);
                std::swap(inv[pivot * n + j], inv[col * n + j]);
            }
        }
        const double scale = 1.0 / a[col * n + col];
        for (std::size_t j = 0; j < n; ++j) {
            a[col * n + j] *= scale;
            inv[col * n + j] *= scale;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double factor = a[r * n + col];
            if (factor == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a[r * n + j] -= factor * a[col * n + j];
                inv[r * n + j] -= factor * inv[col * n + j];
            }
        }
    }
    return inv;
}

namespace {

double norm_1(const std::vector<double>& m, std::size_t n) {
    double best = 0.0;
    for (std::size_t col = 0; col < n; ++col) {
        double acc = 0.0;
        for (std::size_t row = 0; row < n; ++row) acc += std::abs(m[row * n + col]);
        best = std::max(best, acc);
    }
    return best;
}

}  // namespace

double condition_number_1(const std::vector<double>& matrix, std::size_t n) {
    const std::vector<double> inv = dense_inverse(matrix, n);
    return norm_1(matrix, n) * norm_1(inv, n);
}

std::vector<double> equivalent_input_shift(const Tensor& weight, const Tensor& bias,
                                           InvertibleActivation activation,
                                           const Tensor& delta_weight, const Tensor& delta_bias,
                                           const std::vector<double>& input) {
    if (weight.rank() != 2 || weight.dim(0) != weight.dim(1)) {
        throw ContractError("equivalent_input_shift needs a square weight, got " +
                            shape_to_string(weight.shape()));
    }
    const std::size_t n = static_cast<std::size_t>(weight.dim(0));
    if (input.size() != n || bias.numel() != static_cast<std::int64_t>(n) ||
        delta_weight.shape() != weight.shape() || delta_bias.shape() != bias.shape()) {
        throw ContractError("equivalent_input_shift: operand sizes do not agree");
    }

    const std::vector<double> w(weight.data(), weight.data() + weight.numel());
    const double cond = condition_number_1(w, n);
    if (!(cond < 1e8)) {
        throw SingularityError("weight matrix condition number " + std::to_string(cond) +
                               " exceeds 1e8");
    }

    // Perturbed pre-activation z' = (W + dW) a + (b + db), output y = f(z').
    std::vector<double> z_prime(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double acc = bias.at(static_cast<std::int64_t>(r)) + delta_bias.at(static_cast<std::int64_t>(r));
        const double* wr = weight.data() + static_cast<std::int64_t>(r * n);
        const double* dwr = delta_weight.data() + static_cast<std::int64_t>(r * n);
        for (std::size_t cidx = 0; cidx < n; ++cidx) {
            acc += (wr[cidx] + dwr[cidx]) * input[cidx];
        }
        z_prime[r] = acc;
    }

    // Invert the activation, then the layer: d = W^{-1}(f^{-1}(y') - b) - a.
    std::vector<double> target(n);
    for (std::size_t r = 0; r < n; ++r) {
        double v = z_prime[r];
        if (activation == InvertibleActivation::tanh) {
            const double y = std::tanh(v);
            if (std::abs(y) >= 1.0) {
                throw SingularityError("tanh output saturated; inverse undefined");
            }
            v = std::atanh(y);
        }
        target[r] = v - bias.at(static_cast<std::int64_t>(r));
    }

    const std::vector<double> w_inv = dense_inverse(w, n);
    std::vector<double> shift(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t cidx = 0; cidx < n; ++cidx) acc += w_inv[r * n + cidx] * target[cidx];
        shift[r] = acc - input[r];
    }
    return shift;
}

}  // namespace gradsplit

#include "gradsplit/optimizer.hpp"

#include <cmath>

namespace gradsplit {

const char* to_string(OptimizerKind k) {
    return k == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer kind '" + s + "'");
}

OptimizerState make_sgd(double learning_rate) {
    OptimizerState st;
    st.kind = OptimizerKind::sgd;
    st.learning_rate = learning_rate;
    return st;
}

OptimizerState make_adam(double learning_rate, double beta1, double beta2, double eps_stability) {
    OptimizerState st;
    st.kind = OptimizerKind::adam;
    st.learning_rate = learning_rate;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.eps_stability = eps_stability;
    return st;
}

namespace {

void require_grads(const Model& model) {
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
        if (!model.parameters()[i].has_grad()) {
            throw StateError("optimizer step before backward: no gradient for " +
                             model.parameter_names()[i]);
        }
    }
}

void ensure_moments(OptimizerState& state, const Model& model) {
    if (!state.first_moments.empty()) return;
    state.first_moments.resize(model.parameters().size());
    state.second_moments.resize(model.parameters().size());
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
        const std::size_t n = static_cast<std::size_t>(model.parameters()[i].numel());
        state.first_moments[i].assign(n, 0.0);
        state.second_moments[i].assign(n, 0.0);
    }
}

}  // namespace

void sgd_step(OptimizerState& state, Model& model) {
    require_grads(model);
    const double lr = state.learning_rate;
    for (Tensor& p : model.parameters()) {
        double* theta = p.data();
        const double* g = p.grad();
        const std::int64_t n = p.numel();
        for (std::int64_t i = 0; i < n; ++i) theta[i] -= lr * g[i];
        p.clear_grad();
    }
    ++state.step_count;
}

void adam_step(OptimizerState& state, Model& model) {
    require_grads(model);
    ensure_moments(state, model);
    ++state.step_count;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double lr = state.learning_rate;
    const double eps = state.eps_stability;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (std::size_t pi = 0; pi < model.parameters().size(); ++pi) {
        Tensor& p = model.parameters()[pi];
        double* theta = p.data();
        const double* g = p.grad();
        double* m = state.first_moments[pi].data();
        double* v = state.second_moments[pi].data();
        const std::int64_t n = p.numel();
        for (std::int64_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
        p.clear_grad();
    }
}

void optimizer_step(OptimizerState& state, Model& model) {
    if (state.kind == OptimizerKind::sgd) {
        sgd_step(state, model);
    } else {
        adam_step(state, model);
    }
}

}  // namespace gradsplit

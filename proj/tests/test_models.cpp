#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "gradsplit/model.hpp"
#include "oracles.hpp"

using namespace gradsplit;

namespace {

ModelConfig small_mlp() {
    ModelConfig cfg;
    cfg.architecture = Architecture::mlp;
    cfg.input_shape = {4};
    cfg.hidden_widths = {3};
    cfg.class_count = 2;
    cfg.include_softmax_head = false;
    cfg.seed = 7;
    return cfg;
}

// Plain nested-loop evaluation of an MLP from its parameter list.
std::vector<double> mlp_forward_ref(const Model& model, const std::vector<double>& sample) {
    const ModelConfig& cfg = model.config();
    std::vector<double> x = sample;
    const auto& params = model.parameters();
    const std::size_t layer_count = params.size() / 2;
    for (std::size_t layer = 0; layer < layer_count; ++layer) {
        const Tensor& w = params[2 * layer];
        const Tensor& b = params[2 * layer + 1];
        const std::int64_t in = w.dim(0), out = w.dim(1);
        std::vector<double> y(static_cast<std::size_t>(out));
        for (std::int64_t j = 0; j < out; ++j) {
            double acc = b.at(j);
            for (std::int64_t i = 0; i < in; ++i) acc += x[static_cast<std::size_t>(i)] * w.at(i * out + j);
            y[static_cast<std::size_t>(j)] = acc;
        }
        if (layer + 1 < layer_count) {
            for (double& v : y) {
                v = cfg.activation == Activation::relu ? std::max(0.0, v) : std::tanh(v);
            }
        }
        x = std::move(y);
    }
    if (cfg.include_softmax_head) {
        double mx = x[0];
        for (double v : x) mx = std::max(mx, v);
        double denom = 0.0;
        for (double& v : x) {
            v = std::exp(v - mx);
            denom += v;
        }
        for (double& v : x) v /= denom;
    }
    return x;
}

}  // namespace

TEST_CASE("mlp parameter count matches the hand count") {
    // 4*3 weights + 3 biases + 3*2 weights + 2 biases = 23.
    Model model = build(small_mlp());
    CHECK(model.parameter_count() == 23);
}

TEST_CASE("convnet5 parameter count matches the enumeration oracle") {
    ModelConfig cfg;
    cfg.architecture = Architecture::convnet5;
    cfg.input_shape = {3, 32, 32};
    cfg.class_count = 10;
    cfg.seed = 1;
    const std::int64_t expected = oracles::convnet_param_count_ref(3, 32, 32, cfg.conv_channels, 10);
    Model model = build(cfg);
    CHECK(model.parameter_count() == expected);
    // Frozen value for the reference 3->32->64->128->256 + fc configuration.
    CHECK(model.parameter_count() == 398666);
}

TEST_CASE("build is a pure function of the config") {
    ModelConfig cfg = small_mlp();
    Model m1 = build(cfg);
    Model m2 = build(cfg);
    REQUIRE(m1.parameters().size() == m2.parameters().size());
    for (std::size_t i = 0; i < m1.parameters().size(); ++i) {
        const Tensor& a = m1.parameters()[i];
        const Tensor& b = m2.parameters()[i];
        CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.numel())) == 0);
    }
    cfg.seed = 8;
    Model m3 = build(cfg);
    CHECK(m3.parameters()[0].at(0) != m1.parameters()[0].at(0));
}

TEST_CASE("initialization stays within +/- 1/sqrt(fan_in)") {
    ModelConfig cfg = small_mlp();
    Model model = build(cfg);
    const double bound0 = 1.0 / std::sqrt(4.0);
    const Tensor& w0 = model.parameters()[0];
    for (std::int64_t i = 0; i < w0.numel(); ++i) {
        CHECK(std::abs(w0.at(i)) <= bound0);
    }
}

TEST_CASE("zeroed model with softmax head emits uniform rows") {
    ModelConfig cfg = small_mlp();
    cfg.class_count = 4;
    cfg.include_softmax_head = true;
    Model model = build(cfg);
    for (Tensor& p : model.parameters()) {
        for (std::int64_t i = 0; i < p.numel(); ++i) p.at(i) = 0.0;
    }
    Rng rng(5);
    Tape tape(false);
    Tensor out = model.forward(tape, Tensor::uniform({6, 4}, -2, 2, rng));
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        CHECK(out.at(i) == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("identity single-layer model reproduces its input") {
    ModelConfig cfg;
    cfg.architecture = Architecture::mlp;
    cfg.input_shape = {3};
    cfg.hidden_widths = {};
    cfg.class_count = 3;
    cfg.include_softmax_head = false;
    Model model = build(cfg);
    Tensor& w = model.parameters()[0];
    Tensor& b = model.parameters()[1];
    for (std::int64_t i = 0; i < 3; ++i) {
        for (std::int64_t j = 0; j < 3; ++j) w.at(i * 3 + j) = i == j ? 1.0 : 0.0;
    }
    for (std::int64_t j = 0; j < 3; ++j) b.at(j) = 0.0;
    Tensor batch = Tensor::from_data({2, 3}, {1, 2, 3, -4, 0, 4});
    Tape tape(false);
    Tensor out = model.forward(tape, batch);
    for (std::int64_t i = 0; i < batch.numel(); ++i) CHECK(out.at(i) == batch.at(i));
}

TEST_CASE("forward matches a layer-by-layer reference evaluation") {
    for (bool head : {false, true}) {
        ModelConfig cfg;
        cfg.architecture = Architecture::mlp;
        cfg.input_shape = {5};
        cfg.hidden_widths = {7, 4};
        cfg.class_count = 3;
        cfg.activation = Activation::tanh;
        cfg.include_softmax_head = head;
        cfg.seed = 31;
        Model model = build(cfg);
        Rng rng(9);
        Tensor batch = Tensor::uniform({4, 5}, -1, 1, rng);
        Tape tape(false);
        Tensor out = model.forward(tape, batch);
        for (std::int64_t r = 0; r < 4; ++r) {
            std::vector<double> sample(5);
            for (int i = 0; i < 5; ++i) sample[static_cast<std::size_t>(i)] = batch.at(r * 5 + i);
            const std::vector<double> want = mlp_forward_ref(model, sample);
            for (std::int64_t j = 0; j < 3; ++j) {
                CHECK(std::abs(out.at(r * 3 + j) - want[static_cast<std::size_t>(j)]) <= 1e-12);
            }
        }
    }
}

TEST_CASE("softmax head rows are probability vectors for wild inputs") {
    ModelConfig cfg = small_mlp();
    cfg.include_softmax_head = true;
    cfg.seed = 77;
    Model model = build(cfg);
    Rng rng(13);
    Tape tape(false);
    Tensor out = model.forward(tape, Tensor::uniform({32, 4}, -100.0, 100.0, rng));
    for (std::int64_t r = 0; r < 32; ++r) {
        double row = 0.0;
        for (std::int64_t j = 0; j < 2; ++j) {
            CHECK(out.at(r * 2 + j) >= 0.0);
            row += out.at(r * 2 + j);
        }
        CHECK(std::abs(row - 1.0) <= 1e-12);
    }
}

TEST_CASE("argmax is invariant to the softmax head") {
    ModelConfig cfg;
    cfg.architecture = Architecture::mlp;
    cfg.input_shape = {6};
    cfg.hidden_widths = {10};
    cfg.class_count = 5;
    cfg.seed = 19;
    cfg.include_softmax_head = false;
    Model logits_model = build(cfg);
    cfg.include_softmax_head = true;
    Model probs_model = build(cfg);  // same seed, same weights

    Rng rng(4);
    Tensor batch = Tensor::uniform({16, 6}, -3, 3, rng);
    Tape tape(false);
    Tensor logits = logits_model.forward(tape, batch);
    Tensor probs = probs_model.forward(tape, batch);
    for (std::int64_t r = 0; r < 16; ++r) {
        auto argmax = [&](const Tensor& t) {
            std::int64_t best = 0;
            for (std::int64_t j = 1; j < 5; ++j) {
                if (t.at(r * 5 + j) > t.at(r * 5 + best)) best = j;
            }
            return best;
        };
        CHECK(argmax(logits) == argmax(probs));
    }
}

TEST_CASE("forward rejects mismatched batches") {
    Model model = build(small_mlp());
    Tape tape(false);
    CHECK_THROWS_AS(model.forward(tape, Tensor::zeros({2, 5})), DimensionError);
}

TEST_CASE("first_layer_grad_norm") {
    ModelConfig cfg;
    cfg.architecture = Architecture::mlp;
    cfg.input_shape = {2};
    cfg.hidden_widths = {};
    cfg.class_count = 2;
    cfg.include_softmax_head = false;
    Model model = build(cfg);

    SUBCASE("missing grads raise StateError") {
        CHECK_THROWS_AS(model.first_layer_grad_norm(), StateError);
    }
    SUBCASE("zero grads give zero") {
        for (Tensor& p : model.parameters()) p.ensure_grad();
        CHECK(model.first_layer_grad_norm() == 0.0);
    }
    SUBCASE("3-4-5 triangle") {
        Tensor& w = model.parameters()[0];
        w.ensure_grad();
        w.grad()[0] = 3.0;
        w.grad()[1] = 4.0;
        CHECK(model.first_layer_grad_norm() == doctest::Approx(5.0).epsilon(1e-15));
    }
    SUBCASE("random grads match the direct-sum oracle") {
        Tensor& w = model.parameters()[0];
        w.ensure_grad();
        Rng rng(55);
        for (std::int64_t i = 0; i < w.numel(); ++i) w.grad()[i] = uniform_range(rng, -2, 2);
        CHECK(model.first_layer_grad_norm() ==
              doctest::Approx(oracles::frobenius_ref(w.grad(), w.numel())).epsilon(1e-15));
    }
}

TEST_CASE("checkpoint round-trip preserves config and parameters") {
    ModelConfig cfg;
    cfg.architecture = Architecture::mlp;
    cfg.input_shape = {5};
    cfg.hidden_widths = {4, 3};
    cfg.class_count = 3;
    cfg.activation = Activation::tanh;
    cfg.seed = 101;
    Model model = build(cfg);
    // Perturb away from the seeded init so the file carries real state.
    model.parameters()[0].at(0) = 0.123456789012345;

    const std::string path = (std::filesystem::temp_directory_path() / "gradsplit_ckpt_test.bin").string();
    save_checkpoint(model, path);
    Model loaded = load_checkpoint(path);
    CHECK(loaded.config().architecture == cfg.architecture);
    CHECK(loaded.config().hidden_widths == cfg.hidden_widths);
    CHECK(loaded.config().activation == cfg.activation);
    REQUIRE(loaded.parameters().size() == model.parameters().size());
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
        const Tensor& a = model.parameters()[i];
        const Tensor& b = loaded.parameters()[i];
        REQUIRE(a.shape() == b.shape());
        CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.numel())) == 0);
    }
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/gradsplit.ckpt"), IoError);
}

TEST_CASE("invalid configs are rejected") {
    ModelConfig cfg = small_mlp();
    cfg.class_count = 1;
    CHECK_THROWS_AS(build(cfg), ConfigError);
    cfg = small_mlp();
    cfg.hidden_widths = {0};
    CHECK_THROWS_AS(build(cfg), ConfigError);
    cfg = small_mlp();
    cfg.architecture = Architecture::convnet5;  // needs {c, h, w}
    CHECK_THROWS_AS(build(cfg), ConfigError);
}

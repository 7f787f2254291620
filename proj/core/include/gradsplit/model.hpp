#pragma once

#include <string>
#include <vector>

#include "gradsplit/tape.hpp"
#include "gradsplit/tensor.hpp"

namespace gradsplit {

enum class Architecture { mlp, convnet5 };
enum class Activation { relu, tanh };

const char* to_string(Architecture a);
const char* to_string(Activation a);
Architecture architecture_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

// Configuration for the reference model family. `input_shape` is a single
// feature count for MLPs ({d}) or channels-first image dims ({c, h, w}) for
// the convnet. Building is a pure function of the config, seed included.
struct ModelConfig {
    Architecture architecture = Architecture::mlp;
    Shape input_shape = {16};
    std::int64_t class_count = 10;
    std::vector<std::int64_t> hidden_widths = {64};            // mlp only
    std::vector<std::int64_t> conv_channels = {32, 64, 128, 256};  // convnet5 only
    Activation activation = Activation::relu;
    bool include_softmax_head = true;
    std::uint64_t seed = 0;

    void validate() const;  // ConfigError on bad values
    std::int64_t input_numel() const;
};

// Ordered parameterized layers ending, optionally, in a softmax head that
// pins every output row to the probability simplex. Parameters are owned
// Tensors enumerated in forward order; weights come before their biases.
class Model {
public:
    // Output is [N x class_count]: probabilities with the softmax head,
    // raw logits without it.
    Tensor forward(Tape& tape, const Tensor& batch) const;

    const ModelConfig& config() const { return config_; }
    std::int64_t parameter_count() const;
    std::vector<Tensor>& parameters() { return params_; }
    const std::vector<Tensor>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return param_names_; }

    // Frobenius norm of the first weight tensor's gradient.
    // StateError if backward has not populated it.
    double first_layer_grad_norm() const;
    const Tensor& first_weight() const { return params_.front(); }

    void clear_grads();
    // Deep copy (fresh parameter storage, no grads).
    Model clone() const;

private:
    friend Model build(const ModelConfig& config);

    struct Layer {
        enum class Kind { linear, conv, activation, flatten, softmax_head };
        Kind kind = Kind::linear;
        int weight = -1;  // index into params_
        int bias = -1;
        std::int64_t stride = 1;
        std::int64_t padding = 0;
    };

    ModelConfig config_;
    std::vector<Layer> layers_;
    std::vector<Tensor> params_;
    std::vector<std::string> param_names_;
};

Model build(const ModelConfig& config);

// Versioned container: text header (config echo + named parameter shapes)
// followed by raw little-endian float64 parameter data.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace gradsplit

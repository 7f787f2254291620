#include "gradsplit/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace gradsplit {

const char* to_string(Architecture a) {
    return a == Architecture::mlp ? "mlp" : "convnet5";
}

const char* to_string(Activation a) {
    return a == Activation::relu ? "relu" : "tanh";
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "mlp") return Architecture::mlp;
    if (s == "convnet5") return Architecture::convnet5;
    throw ConfigError("unknown architecture '" + s + "'");
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + s + "'");
}

void ModelConfig::validate() const {
    if (class_count < 2) throw ConfigError("class_count must be >= 2");
    if (input_shape.empty()) throw ConfigError("input_shape must be nonempty");
    for (std::int64_t d : input_shape) {
        if (d <= 0) throw ConfigError("input_shape extents must be positive");
    }
    if (architecture == Architecture::mlp) {
        for (std::int64_t w : hidden_widths) {
            if (w <= 0) throw ConfigError("hidden widths must be positive");
        }
    } else {
        if (input_shape.size() != 3) {
            throw ConfigError("convnet5 needs a {channels, height, width} input_shape, got " +
                              shape_to_string(input_shape));
        }
        if (conv_channels.empty()) throw ConfigError("convnet5 needs at least one conv layer");
        for (std::int64_t c : conv_channels) {
            if (c <= 0) throw ConfigError("conv channel counts must be positive");
        }
    }
}

std::int64_t ModelConfig::input_numel() const {
    std::int64_t n = 1;
    for (std::int64_t d : input_shape) n *= d;
    return n;
}

namespace {

constexpr std::int64_t kConvKernel = 3;
constexpr std::int64_t kConvStride = 2;
constexpr std::int64_t kConvPadding = 1;

// Weights and biases start near the origin: U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
Tensor init_param(Shape shape, std::int64_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), -bound, bound, rng);
}

}  // namespace

Model build(const ModelConfig& config) {
    config.validate();
    Model model;
    model.config_ = config;
    Rng rng(config.seed);

    auto add_param = [&](const std::string& name, Shape shape, std::int64_t fan_in) {
        model.params_.push_back(init_param(std::move(shape), fan_in, rng));
        model.param_names_.push_back(name);
        return static_cast<int>(model.params_.size() - 1);
    };

    if (config.architecture == Architecture::mlp) {
        std::int64_t in_features = config.input_numel();
        if (config.input_shape.size() > 1) {
            model.layers_.push_back({Model::Layer::Kind::flatten});
        }
        std::vector<std::int64_t> widths = config.hidden_widths;
        widths.push_back(config.class_count);
        for (std::size_t i = 0; i < widths.size(); ++i) {
            const std::int64_t out_features = widths[i];
            Model::Layer layer;
            layer.kind = Model::Layer::Kind::linear;
            const std::string stem = "fc" + std::to_string(i);
            layer.weight = add_param(stem + ".weight", {in_features, out_features}, in_features);
            layer.bias = add_param(stem + ".bias", {out_features}, in_features);
            model.layers_.push_back(layer);
            if (i + 1 < widths.size()) {
                model.layers_.push_back({Model::Layer::Kind::activation});
            }
            in_features = out_features;
        }
    } else {
        std::int64_t channels = config.input_shape[0];
        std::int64_t height = config.input_shape[1];
        std::int64_t width = config.input_shape[2];
        for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
            const std::int64_t out_channels = config.conv_channels[i];
            Model::Layer layer;
            layer.kind = Model::Layer::Kind::conv;
            layer.stride = kConvStride;
            layer.padding = kConvPadding;
            const std::int64_t fan_in = channels * kConvKernel * kConvKernel;
            const std::string stem = "conv" + std::to_string(i);
            layer.weight = add_param(stem + ".weight", {out_channels, channels, kConvKernel, kConvKernel}, fan_in);
            layer.bias = add_param(stem + ".bias", {out_channels}, fan_in);
            model.layers_.push_back(layer);
            model.layers_.push_back({Model::Layer::Kind::activation});
            height = (height + 2 * kConvPadding - kConvKernel) / kConvStride + 1;
            width = (width + 2 * kConvPadding - kConvKernel) / kConvStride + 1;
            if (height < 1 || width < 1) {
                throw ConfigError("convnet5 input " + shape_to_string(config.input_shape) +
                                  " collapses below 1x1 at conv layer " + std::to_string(i));
            }
            channels = out_channels;
        }
        model.layers_.push_back({Model::Layer::Kind::flatten});
        const std::int64_t in_features = channels * height * width;
        Model::Layer head;
        head.kind = Model::Layer::Kind::linear;
        head.weight = add_param("fc.weight", {in_features, config.class_count}, in_features);
        head.bias = add_param("fc.bias", {config.class_count}, in_features);
        model.layers_.push_back(head);
    }

    if (config.include_softmax_head) {
        model.layers_.push_back({Model::Layer::Kind::softmax_head});
    }
    return model;
}

Tensor Model::forward(Tape& tape, const Tensor& batch) const {
    if (batch.rank() < 2) {
        throw DimensionError("forward expects a batched input, got " + shape_to_string(batch.shape()));
    }
    const Shape sample_shape(batch.shape().begin() + 1, batch.shape().end());
    if (shape_numel(sample_shape) != config_.input_numel() ||
        (config_.architecture == Architecture::convnet5 && sample_shape != config_.input_shape)) {
        throw DimensionError("forward: batch " + shape_to_string(batch.shape()) +
                             " does not match input shape " + shape_to_string(config_.input_shape));
    }
    const std::int64_t n = batch.dim(0);
    Tensor x = batch;
    for (const Layer& layer : layers_) {
        switch (layer.kind) {
            case Layer::Kind::flatten:
                x = reshape(tape, x, {n, x.numel() / n});
                break;
            case Layer::Kind::linear:
                x = add_rowwise(tape, matmul(tape, x, params_[layer.weight]), params_[layer.bias]);
                break;
            case Layer::Kind::conv:
                x = add_channel_bias(tape, conv2d(tape, x, params_[layer.weight], layer.stride, layer.padding),
                                     params_[layer.bias]);
                break;
            case Layer::Kind::activation:
                x = config_.activation == Activation::relu ? relu(tape, x) : tanh_act(tape, x);
                break;
            case Layer::Kind::softmax_head:
                x = softmax(tape, x);
                break;
        }
    }
    return x;
}

std::int64_t Model::parameter_count() const {
    std::int64_t n = 0;
    for (const Tensor& p : params_) n += p.numel();
    return n;
}

double Model::first_layer_grad_norm() const {
    const Tensor& w = params_.front();
    if (!w.has_grad()) {
        throw StateError("first_layer_grad_norm: no gradient recorded for " + param_names_.front());
    }
    double acc = 0.0;
    const double* g = w.grad();
    for (std::int64_t i = 0; i < w.numel(); ++i) acc += g[i] * g[i];
    return std::sqrt(acc);
}

void Model::clear_grads() {
    for (Tensor& p : params_) p.clear_grad();
}

Model Model::clone() const {
    Model copy;
    copy.config_ = config_;
    copy.layers_ = layers_;
    copy.param_names_ = param_names_;
    copy.params_.reserve(params_.size());
    for (const Tensor& p : params_) copy.params_.push_back(p.clone());
    return copy;
}

// --- checkpoint io ----------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "GSPT0001";

template <typename T>
std::string join_ints(const std::vector<T>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out << ' ';
        out << v[i];
    }
    return out.str();
}

std::vector<std::int64_t> parse_ints(std::istringstream& in) {
    std::vector<std::int64_t> v;
    std::int64_t x;
    while (in >> x) v.push_back(x);
    return v;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint file for writing: " + path);
    const ModelConfig& cfg = model.config();
    out << kCheckpointMagic << '\n';
    out << "architecture " << to_string(cfg.architecture) << '\n';
    out << "input_shape " << join_ints(cfg.input_shape) << '\n';
    out << "class_count " << cfg.class_count << '\n';
    out << "hidden_widths " << join_ints(cfg.hidden_widths) << '\n';
    out << "conv_channels " << join_ints(cfg.conv_channels) << '\n';
    out << "activation " << to_string(cfg.activation) << '\n';
    out << "softmax_head " << (cfg.include_softmax_head ? 1 : 0) << '\n';
    out << "seed " << cfg.seed << '\n';
    out << "params " << model.parameters().size() << '\n';
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
        out << "param " << model.parameter_names()[i] << ' '
            << join_ints(model.parameters()[i].shape()) << '\n';
    }
    out << "data\n";
    for (const Tensor& p : model.parameters()) {
        out.write(reinterpret_cast<const char*>(p.data()),
                  static_cast<std::streamsize>(p.numel() * sizeof(double)));
    }
    if (!out) throw IoError("short write to checkpoint file: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic) {
        throw FormatError("bad checkpoint magic in " + path);
    }
    ModelConfig cfg;
    std::size_t param_count = 0;
    std::vector<std::pair<std::string, Shape>> declared;
    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "architecture") {
            std::string v;
            ls >> v;
            cfg.architecture = architecture_from_string(v);
        } else if (key == "input_shape") {
            cfg.input_shape = parse_ints(ls);
        } else if (key == "class_count") {
            ls >> cfg.class_count;
        } else if (key == "hidden_widths") {
            cfg.hidden_widths = parse_ints(ls);
        } else if (key == "conv_channels") {
            cfg.conv_channels = parse_ints(ls);
        } else if (key == "activation") {
            std::string v;
            ls >> v;
            cfg.activation = activation_from_string(v);
        } else if (key == "softmax_head") {
            int v = 1;
            ls >> v;
            cfg.include_softmax_head = v != 0;
        } else if (key == "seed") {
            ls >> cfg.seed;
        } else if (key == "params") {
            ls >> param_count;
        } else if (key == "param") {
            std::string name;
            ls >> name;
            declared.emplace_back(name, parse_ints(ls));
        } else {
            throw FormatError("unknown checkpoint header field '" + key + "' in " + path);
        }
    }
    if (declared.size() != param_count) {
        throw FormatError("checkpoint declares " + std::to_string(param_count) + " params but lists " +
                          std::to_string(declared.size()));
    }
    Model model = build(cfg);
    if (model.parameters().size() != declared.size()) {
        throw FormatError("checkpoint parameter list does not match rebuilt model");
    }
    for (std::size_t i = 0; i < declared.size(); ++i) {
        if (declared[i].first != model.parameter_names()[i] ||
            declared[i].second != model.parameters()[i].shape()) {
            throw FormatError("checkpoint parameter '" + declared[i].first +
                              "' does not match rebuilt model layout");
        }
        Tensor& p = model.parameters()[i];
        in.read(reinterpret_cast<char*>(p.data()),
                static_cast<std::streamsize>(p.numel() * sizeof(double)));
        if (!in) throw FormatError("checkpoint data truncated in " + path);
    }
    return model;
}

}  // namespace gradsplit

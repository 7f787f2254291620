#pragma once

#include <functional>
#include <vector>

#include "gradsplit/tensor.hpp"

namespace gradsplit {

// Reverse-mode differentiation tape.
//
// Every op below computes its output eagerly and, when the tape is
// recording, appends a backward rule. Recording order is a topological
// order of the expression graph, so backward() replays the rules in
// reverse. Gradients accumulate additively, which handles tensors shared
// between subexpressions.
//
// A tape belongs to one trial step; build a fresh one per objective
// evaluation. Tape(false) gives a non-recording tape for pure inference.
class Tape {
public:
    Tape() = default;
    explicit Tape(bool recording) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    std::size_t node_count() const { return nodes_.size(); }

    // Seeds d(root)/d(root) = 1 and replays rules in reverse. Root must be
    // scalar (ContractError otherwise). Tensors not reachable from the root
    // are left untouched.
    void backward(const Tensor& root);

    // Appends a backward rule; called by ops, not user code.
    void record(std::function<void()> rule) {
        if (recording_) nodes_.push_back(std::move(rule));
    }

private:
    std::vector<std::function<void()>> nodes_;
    bool recording_ = true;
};

// --- differentiable ops ----------------------------------------------------

// [m x k] by [k x n] matrix product.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Cross-correlation (no kernel flip) over NCHW input with an FCkhkw kernel.
// Output is N x F x H' x W' with H' = floor((H + 2*padding - kh)/stride) + 1.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel,
              std::int64_t stride, std::int64_t padding);

// Elementwise; shapes must match exactly.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);

// Adds a length-C bias to every row of an [N x C] matrix.
Tensor add_rowwise(Tape& tape, const Tensor& mat, const Tensor& bias);
// Adds a length-C bias to every channel plane of an NCHW tensor.
Tensor add_channel_bias(Tape& tape, const Tensor& input, const Tensor& bias);

Tensor relu(Tape& tape, const Tensor& x);
Tensor tanh_act(Tape& tape, const Tensor& x);

// Softmax over the last dimension, max-subtracted for overflow safety.
Tensor softmax(Tape& tape, const Tensor& x);
Tensor log_softmax(Tape& tape, const Tensor& x);

// Copying reshape; numel must be preserved.
Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

}  // namespace gradsplit

// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over 64-bit tensors.
//
// A Tape owns every value computed in a forward pass. Each op appends one
// node holding its output and a closure that pushes the output gradient back
// to its inputs. Tape::backward walks nodes in exact reverse execution order;
// gradients from multiple uses of a value are summed.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dscls/rng.hpp"
#include "dscls/tensor.hpp"

namespace dscls {

class Tape;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Tensor& grad() const;
    const Shape& shape() const { return value().shape; }
    bool requires_grad() const;

    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    // Receives the tape and the node's own id; reads the node's grad and
    // accumulates into its inputs' grads.
    using BackwardFn = std::function<void(Tape&, std::size_t)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

    // Seeds d(root)/d(root) = 1 (root must hold one element) and propagates.
    void backward(Var root);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor& grad(std::size_t id) const;
    // Zero-initialized on first access.
    Tensor& grad_mut(std::size_t id);
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

    std::size_t size() const { return nodes_.size(); }

    // Node ids visited by the most recent backward call, in visit order.
    const std::vector<std::size_t>& last_backward_order() const { return visited_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
    };

    std::deque<Node> nodes_;
    std::vector<std::size_t> visited_;
};

// ---- op suite -------------------------------------------------------------

Var add(Var a, Var b);               // same shape, or b a row vector broadcast over a's rows
Var sub(Var a, Var b);               // same shape
Var mul(Var a, Var b);               // elementwise, same shape
Var scale(Var a, double s);
Var matmul(Var a, Var b);            // [m,k] x [k,n]
Var transpose(Var a);                // 2-D
Var embedding(Var table, std::span<const int> ids);   // [V,H] -> [ids.size(),H]
Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var relu(Var x);
Var gelu(Var x);                     // exact erf form
Var tanh_op(Var x);
Var sigmoid(Var x);
// Rowwise softmax over the last dim. key_mask (optional, length = cols) marks
// valid columns with 1; masked columns get probability exactly 0.
Var softmax(Var x, std::span<const std::uint8_t> key_mask = {});
Var dropout(Var x, double rate, bool train, CounterRng& rng);
Var sum(Var x);
Var mean(Var x);
// Mean softmax cross-entropy of logits [m,C] against integer labels.
Var cross_entropy(Var logits, std::span<const int> labels);
// Mean binary cross-entropy of logits [m,1] through a sigmoid.
Var binary_cross_entropy_with_sigmoid(Var logits, std::span<const int> labels);
Var slice(Var x, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols);
Var select_rows(Var x, std::span<const std::size_t> rows);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

// ---- verification ---------------------------------------------------------

using ScalarFn = std::function<Var(Tape&, Var)>;
using MultiScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// Throws std::runtime_error("non-finite in grad check") on NaN/inf.
double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

/// Same check across several inputs at once; returns the error per input.
std::vector<double> grad_check(const MultiScalarFn& f, const std::vector<Tensor>& xs, double h = 1e-5);

} // namespace dscls

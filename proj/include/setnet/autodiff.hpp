#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "setnet/tensor.hpp"

namespace setnet::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

    Tape& tape() const { return *tape_; }
    std::size_t index() const noexcept { return index_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }

    friend bool operator==(const Var&, const Var&) = default;

private:
    Tape* tape_ = nullptr;
    std::size_t index_ = 0;
};

/// One differentiable primitive. `forward` may cache routing decisions (e.g.
/// argmax) that `backward` consumes; it is re-run on replay.
class Op {
public:
    virtual ~Op() = default;
    virtual std::string_view name() const = 0;
    virtual Tensor forward(std::span<const Tensor* const> inputs) = 0;
    /// Accumulates into grad_inputs[i] when it is non-null.
    virtual void backward(std::span<const Tensor* const> inputs, const Tensor& output,
                          const Tensor& grad_output,
                          std::span<Tensor* const> grad_inputs) const = 0;
    /// Discrete choices made by the last forward; a change under perturbation
    /// marks a non-differentiable point.
    virtual std::span<const std::size_t> routing() const { return {}; }
};

/// d(root)/d(variable) for every registered variable.
class GradientMap {
public:
    const Tensor& operator[](Var v) const;
    bool contains(Var v) const { return grads_.count(v.index()) != 0; }
    void set(Var v, Tensor g) { grads_[v.index()] = std::move(g); }
    std::size_t size() const noexcept { return grads_.size(); }

private:
    std::unordered_map<std::size_t, Tensor> grads_;
};

/// Append-only record of a define-by-run computation. Values are computed
/// eagerly as nodes are recorded; `forward` replays the record from the leaves.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value, std::string label = {});
    /// Differentiable leaf.
    Var variable(Tensor value, std::string label = {});
    Var record(std::unique_ptr<Op> op, std::vector<Var> inputs);

    const Tensor& value(Var v) const { return nodes_.at(v.index()).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.index()).requires_grad; }
    bool is_variable(Var v) const { return nodes_.at(v.index()).is_variable; }
    std::string node_name(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }
    std::vector<Var> variables();

    /// Overwrites a leaf value. Downstream values are stale until `forward`.
    void set_leaf(Var leaf, Tensor value);

    /// Recomputes every node up to and including `root`; returns its value.
    const Tensor& forward(Var root);

    /// Reverse sweep from a one-element root.
    GradientMap backward(Var root) const;

    /// Routing decisions of every node up to `root`, for tie detection.
    std::vector<std::vector<std::size_t>> routing_snapshot(Var root) const;

private:
    struct Node {
        std::unique_ptr<Op> op;  // null for leaves
        std::vector<std::size_t> inputs;
        Tensor value;
        std::string label;
        bool requires_grad = false;
        bool is_variable = false;
    };

    Tensor evaluate(std::size_t index);

    std::vector<Node> nodes_;
};

struct GradCheckFailure {
    Var variable;
    std::size_t entry;
    double analytic;
    double numeric;
    double relative_error;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    /// Entries skipped because a perturbation changed a routing decision.
    std::size_t excluded = 0;
    bool passed = true;
    std::vector<GradCheckFailure> failures;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6) noexcept;

/// Compares backward() against central differences (f(t+h) - f(t-h)) / 2h
/// for every entry of every variable on the tape.
GradCheckReport gradient_check(Tape& tape, Var root, double step, double tolerance);

// ---------------------------------------------------------------------------
// Primitives

/// Contracts the last axis of `a` (any rank >= 2) with rank-2 `b`.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
Var sqrt(Var a);
/// max(a, floor) entrywise; gradient flows only where a > floor.
Var clamp_min(Var a, double floor);
Var activation(Var a, Activation fn);
Var reshape(Var a, Shape shape);
/// Transposes the two trailing axes.
Var swap_last_axes(Var a);
Var reduce(Var a, std::size_t axis, ReduceKind kind);
/// Sum of all entries; rank-0 result.
Var sum(Var a);
Var mean(Var a);

/// Reduces axis 1 of a [B, N, K] tensor over the first cardinalities[b] rows
/// of each set. Output [B, K].
Var set_reduce(Var x, std::span<const std::size_t> cardinalities, ReduceKind kind);
/// Zeroes rows at index >= cardinalities[b] of a [B, N, K] tensor.
Var mask_rows(Var x, std::span<const std::size_t> cardinalities);

/// Mean over the batch of -log softmax(logits)[label], shifted by the row max.
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);
/// Sum of mask * (pred - target)^2 divided by the mask total (0 if none set).
/// `target` and `mask` hold as many entries as `pred`.
Var masked_squared_error(Var pred, const Tensor& target, const Tensor& mask);

}  // namespace setnet::ad

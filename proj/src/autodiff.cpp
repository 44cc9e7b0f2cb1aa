#include "setnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "setnet/error.hpp"

namespace setnet::ad {

const Tensor& Var::value() const { return tape_->value(*this); }

const Tensor& GradientMap::operator[](Var v) const {
    auto it = grads_.find(v.index());
    if (it == grads_.end()) {
        throw ContractError("no gradient recorded for node " + std::to_string(v.index()));
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value, std::string label) {
    require_finite(value, label.empty() ? "constant" : label);
    nodes_.push_back(Node{nullptr, {}, std::move(value), std::move(label), false, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value, std::string label) {
    require_finite(value, label.empty() ? "variable" : label);
    nodes_.push_back(Node{nullptr, {}, std::move(value), std::move(label), true, true});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::unique_ptr<Op> op, std::vector<Var> inputs) {
    Node node;
    node.op = std::move(op);
    for (const auto& v : inputs) {
        if (&v.tape() != this) throw ContractError("input belongs to a different tape");
        node.inputs.push_back(v.index());
        node.requires_grad = node.requires_grad || nodes_[v.index()].requires_grad;
    }
    nodes_.push_back(std::move(node));
    const std::size_t index = nodes_.size() - 1;
    try {
        nodes_[index].value = evaluate(index);
    } catch (...) {
        nodes_.pop_back();
        throw;
    }
    return Var(this, index);
}

std::string Tape::node_name(Var v) const {
    const Node& n = nodes_.at(v.index());
    std::string name = "#" + std::to_string(v.index()) + " ";
    if (n.op) name += std::string(n.op->name());
    else name += n.is_variable ? "variable" : "constant";
    if (!n.label.empty()) name += " '" + n.label + "'";
    return name;
}

std::vector<Var> Tape::variables() {
    std::vector<Var> vars;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].is_variable) vars.emplace_back(this, i);
    return vars;
}

void Tape::set_leaf(Var leaf, Tensor value) {
    Node& n = nodes_.at(leaf.index());
    if (n.op) throw ContractError("set_leaf on non-leaf node " + node_name(leaf));
    if (n.value.shape() != value.shape()) throw DimensionError("set_leaf shape mismatch");
    n.value = std::move(value);
}

Tensor Tape::evaluate(std::size_t index) {
    Node& node = nodes_[index];
    std::vector<const Tensor*> in;
    in.reserve(node.inputs.size());
    for (auto i : node.inputs) in.push_back(&nodes_[i].value);
    Tensor out = node.op->forward(in);
    if (!out.all_finite()) {
        throw NumericError("non-finite value produced by node " + node_name(Var(this, index)));
    }
    return out;
}

const Tensor& Tape::forward(Var root) {
    for (std::size_t i = 0; i <= root.index(); ++i) {
        if (nodes_[i].op) nodes_[i].value = evaluate(i);
    }
    return nodes_[root.index()].value;
}

GradientMap Tape::backward(Var root) const {
    const Node& r = nodes_.at(root.index());
    if (r.value.size() != 1) {
        throw ContractError("backward needs a scalar root, got shape " +
                            shape_string(r.value.shape()));
    }
    std::vector<std::optional<Tensor>> grads(root.index() + 1);
    grads[root.index()] = Tensor(r.value.shape(), 1.0);

    for (std::size_t i = root.index() + 1; i-- > 0;) {
        const Node& node = nodes_[i];
        if (!node.op || !grads[i] || !node.requires_grad) continue;
        std::vector<const Tensor*> in;
        std::vector<Tensor*> gin;
        for (auto j : node.inputs) {
            in.push_back(&nodes_[j].value);
            if (nodes_[j].requires_grad) {
                if (!grads[j]) grads[j] = Tensor(nodes_[j].value.shape());
                gin.push_back(&*grads[j]);
            } else {
                gin.push_back(nullptr);
            }
        }
        node.op->backward(in, node.value, *grads[i], gin);
        // Interior gradients are not needed after their node is processed.
        grads[i].reset();
    }

    GradientMap map;
    for (std::size_t i = 0; i <= root.index(); ++i) {
        if (!nodes_[i].is_variable) continue;
        map.set(Var(const_cast<Tape*>(this), i),
                grads[i] ? std::move(*grads[i]) : Tensor(nodes_[i].value.shape()));
    }
    for (std::size_t i = root.index() + 1; i < nodes_.size(); ++i) {
        if (nodes_[i].is_variable)
            map.set(Var(const_cast<Tape*>(this), i), Tensor(nodes_[i].value.shape()));
    }
    return map;
}

std::vector<std::vector<std::size_t>> Tape::routing_snapshot(Var root) const {
    std::vector<std::vector<std::size_t>> snap;
    for (std::size_t i = 0; i <= root.index(); ++i) {
        if (!nodes_[i].op) continue;
        auto r = nodes_[i].op->routing();
        if (!r.empty()) snap.emplace_back(r.begin(), r.end());
    }
    return snap;
}

// ---------------------------------------------------------------------------
// Gradient checking

double relative_error(double analytic, double numeric, double floor) noexcept {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(Tape& tape, Var root, double step, double tolerance) {
    if (!(step > 0.0)) throw ContractError("gradient_check step must be positive");
    GradCheckReport report;
    tape.forward(root);
    const GradientMap grads = tape.backward(root);
    const auto base_routing = tape.routing_snapshot(root);

    for (Var v : tape.variables()) {
        if (v.index() > root.index()) continue;
        const Tensor original = tape.value(v);
        const Tensor& analytic = grads[v];
        for (std::size_t e = 0; e < original.size(); ++e) {
            Tensor probe = original;
            probe[e] = original[e] + step;
            tape.set_leaf(v, probe);
            const double f_plus = tape.forward(root).item();
            bool tie = tape.routing_snapshot(root) != base_routing;
            probe[e] = original[e] - step;
            tape.set_leaf(v, probe);
            const double f_minus = tape.forward(root).item();
            tie = tie || tape.routing_snapshot(root) != base_routing;
            tape.set_leaf(v, original);
            if (tie) {
                ++report.excluded;
                continue;
            }
            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double err = relative_error(analytic[e], numeric);
            ++report.checked;
            report.max_relative_error = std::max(report.max_relative_error, err);
            if (err > tolerance) {
                report.passed = false;
                report.failures.push_back({v, e, analytic[e], numeric, err});
            }
        }
    }
    tape.forward(root);
    return report;
}

// ---------------------------------------------------------------------------
// Primitive ops

namespace {

Var record(std::unique_ptr<Op> op, std::vector<Var> inputs) {
    Tape& t = inputs.front().tape();
    return t.record(std::move(op), std::move(inputs));
}

void accumulate(Tensor* dst, const Tensor& src) {
    if (!dst) return;
    auto d = dst->data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

class MatMulOp final : public Op {
public:
    std::string_view name() const override { return "matmul"; }
    Tensor forward(std::span<const Tensor* const> in) override {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        if (a.rank() < 2 || b.rank() != 2) {
            throw DimensionError("matmul expects rank>=2 x rank-2, got " + shape_string(a.shape()) +
                                 " x " + shape_string(b.shape()));
        }
        const std::size_t k = a.shape().back();
        const std::size_t rows = a.size() / std::max<std::size_t>(k, 1);
        Tensor out = setnet::matmul(a.reshaped({rows, k}), b);
        Shape shape = a.shape();
        shape.back() = b.dim(1);
        return std::move(out).reshaped(std::move(shape));
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        const std::size_t k = a.shape().back();
        const std::size_t rows = a.size() / std::max<std::size_t>(k, 1);
        const Tensor g2 = g.reshaped({rows, b.dim(1)});
        if (gin[0]) accumulate(gin[0], matmul_nt(g2, b).reshaped(a.shape()));
        if (gin[1]) accumulate(gin[1], matmul_tn(a.reshaped({rows, k}), g2));
    }
};

enum class Binary { add, sub, mul, div };

class BinaryOp final : public Op {
public:
    explicit BinaryOp(Binary kind) : kind_(kind) {}
    std::string_view name() const override {
        switch (kind_) {
            case Binary::add: return "add";
            case Binary::sub: return "sub";
            case Binary::mul: return "mul";
            case Binary::div: return "div";
        }
        return "binary";
    }
    Tensor forward(std::span<const Tensor* const> in) override {
        switch (kind_) {
            case Binary::add: return setnet::add(*in[0], *in[1]);
            case Binary::sub: return setnet::subtract(*in[0], *in[1]);
            case Binary::mul: return setnet::multiply(*in[0], *in[1]);
            case Binary::div: return setnet::divide(*in[0], *in[1]);
        }
        return {};
    }
    void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        switch (kind_) {
            case Binary::add:
                if (gin[0]) accumulate(gin[0], reduce_to_shape(g, a.shape()));
                if (gin[1]) accumulate(gin[1], reduce_to_shape(g, b.shape()));
                break;
            case Binary::sub:
                if (gin[0]) accumulate(gin[0], reduce_to_shape(g, a.shape()));
                if (gin[1]) accumulate(gin[1], reduce_to_shape(scale(g, -1.0), b.shape()));
                break;
            case Binary::mul:
                if (gin[0]) accumulate(gin[0], reduce_to_shape(multiply(g, b), a.shape()));
                if (gin[1]) accumulate(gin[1], reduce_to_shape(multiply(g, a), b.shape()));
                break;
            case Binary::div:
                if (gin[0]) accumulate(gin[0], reduce_to_shape(divide(g, b), a.shape()));
                if (gin[1]) {
                    // d(a/b)/db = -out / b
                    accumulate(gin[1],
                               reduce_to_shape(scale(divide(multiply(g, out), b), -1.0), b.shape()));
                }
                break;
        }
    }

private:
    Binary kind_;
};

class AffineScalarOp final : public Op {
public:
    AffineScalarOp(double scale, double shift) : scale_(scale), shift_(shift) {}
    std::string_view name() const override { return "affine-scalar"; }
    Tensor forward(std::span<const Tensor* const> in) override {
        Tensor y = *in[0];
        for (auto& v : y.data()) v = scale_ * v + shift_;
        return y;
    }
    void backward(std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (gin[0]) accumulate(gin[0], scale(g, scale_));
    }

private:
    double scale_;
    double shift_;
};

class SqrtOp final : public Op {
public:
    std::string_view name() const override { return "sqrt"; }
    Tensor forward(std::span<const Tensor* const> in) override {
        Tensor y = *in[0];
        for (auto& v : y.data()) {
            if (v < 0.0) throw NumericError("sqrt of negative value");
            v = std::sqrt(v);
        }
        return y;
    }
    void backward(std::span<const Tensor* const>, const Tensor& out, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (!gin[0]) return;
        auto d = gin[0]->data();
        for (std::size_t i = 0; i < d.size(); ++i)
            if (g[i] != 0.0) d[i] += g[i] * 0.5 / out[i];
    }
};

class ClampMinOp final : public Op {
public:
    explicit ClampMinOp(double floor) : floor_(floor) {}
    std::string_view name() const override { return "clamp-min"; }
    Tensor forward(std::span<const Tensor* const> in) override {
        Tensor y = *in[0];
        active_.assign(y.size(), 1);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (!(y[i] > floor_)) {
                y[i] = floor_;
                active_[i] = 0;
            }
        }
        return y;
    }
    void backward(std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (!gin[0]) return;
        auto d = gin[0]->data();
        for (std::size_t i = 0; i < d.size(); ++i)
            if (active_[i]) d[i] += g[i];
    }
    std::span<const std::size_t> routing() const override { return active_; }

private:
    double floor_;
    std::vector<std::size_t> active_;
};

class ActivationOp final : public Op {
public:
    explicit ActivationOp(Activation fn) : fn_(fn) {}
    std::string_view name() const override {
        switch (fn_) {
            case Activation::identity: return "identity";
            case Activation::tanh: return "tanh";
            case Activation::elu: return "elu";
            case Activation::sigmoid: return "sigmoid";
        }
        return "activation";
    }
    Tensor forward(std::span<const Tensor* const> in) override { return elementwise(*in[0], fn_); }
    void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (!gin[0]) return;
        auto d = gin[0]->data();
        const Tensor& x = *in[0];
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] += g[i] * activate_derivative(fn_, x[i], out[i]);
    }

private:
    Activation fn_;
};

class ReshapeOp final : public Op {
public:
    explicit ReshapeOp(Shape shape) : shape_(std::move(shape)) {}
    std::string_view name() const override { return "reshape"; }
    Tensor forward(std::span<const Tensor* const> in) override { return in[0]->reshaped(shape_); }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (gin[0]) accumulate(gin[0], g.reshaped(in[0]->shape()));
    }

private:
    Shape shape_;
};

/// [..., R, C] -> [..., C, R].
Tensor swap_last(const Tensor& x) {
    const Shape s = x.shape();
    const std::size_t R = s[s.size() - 2], C = s.back(), outer = x.size() / (R * C);
    Shape out_shape = s;
    std::swap(out_shape[s.size() - 2], out_shape.back());
    Tensor out(out_shape);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) out[(o * C + c) * R + r] = x[(o * R + r) * C + c];
    return out;
}

class SwapLastAxesOp final : public Op {
public:
    std::string_view name() const override { return "swap-last-axes"; }
    Tensor forward(std::span<const Tensor* const> in) override {
        if (in[0]->rank() < 2) throw DimensionError("swap_last_axes needs rank >= 2");
        return swap_last(*in[0]);
    }
    void backward(std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (gin[0]) accumulate(gin[0], swap_last(g));
    }
};

class ReduceOp final : public Op {
public:
    ReduceOp(std::size_t axis, ReduceKind kind) : axis_(axis), kind_(kind) {}
    std::string_view name() const override {
        switch (kind_) {
            case ReduceKind::sum: return "reduce-sum";
            case ReduceKind::max: return "reduce-max";
            case ReduceKind::mean: return "reduce-mean";
        }
        return "reduce";
    }
    Tensor forward(std::span<const Tensor* const> in) override {
        Reduction r = reduce_over_axis(*in[0], axis_, kind_);
        argmax_ = std::move(r.argmax);
        return std::move(r.value);
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (!gin[0]) return;
        const auto& shape = in[0]->shape();
        std::size_t outer = 1, inner = 1;
        for (std::size_t i = 0; i < axis_; ++i) outer *= shape[i];
        for (std::size_t i = axis_ + 1; i < shape.size(); ++i) inner *= shape[i];
        const std::size_t n = shape[axis_];
        auto d = gin[0]->data();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t j = 0; j < inner; ++j) {
                const std::size_t oi = o * inner + j;
                switch (kind_) {
                    case ReduceKind::sum:
                        for (std::size_t i = 0; i < n; ++i) d[(o * n + i) * inner + j] += g[oi];
                        break;
                    case ReduceKind::mean:
                        for (std::size_t i = 0; i < n; ++i)
                            d[(o * n + i) * inner + j] += g[oi] / static_cast<double>(n);
                        break;
                    case ReduceKind::max:
                        d[(o * n + argmax_[oi]) * inner + j] += g[oi];
                        break;
                }
            }
        }
    }
    std::span<const std::size_t> routing() const override { return argmax_; }

private:
    std::size_t axis_;
    ReduceKind kind_;
    std::vector<std::size_t> argmax_;
};

class SumAllOp final : public Op {
public:
    explicit SumAllOp(bool mean) : mean_(mean) {}
    std::string_view name() const override { return mean_ ? "mean" : "sum"; }
    Tensor forward(std::span<const Tensor* const> in) override {
        const double s = sum_all(*in[0]);
        return Tensor::scalar(mean_ ? s / static_cast<double>(in[0]->size()) : s);
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (!gin[0]) return;
        const double v = mean_ ? g[0] / static_cast<double>(in[0]->size()) : g[0];
        for (auto& d : gin[0]->data()) d += v;
    }

private:
    bool mean_;
};

void check_set_tensor(const Tensor& x, std::span<const std::size_t> cards) {
    if (x.rank() != 3) {
        throw DimensionError("set tensor must be [B, N, K], got " + shape_string(x.shape()));
    }
    if (cards.size() != x.dim(0)) throw DimensionError("one cardinality per set required");
    for (auto c : cards) {
        if (c == 0) throw EmptyReductionError("set with zero members");
        if (c > x.dim(1)) throw DimensionError("cardinality exceeds padded set length");
    }
}

class SetReduceOp final : public Op {
public:
    SetReduceOp(std::span<const std::size_t> cards, ReduceKind kind)
        : cards_(cards.begin(), cards.end()), kind_(kind) {}
    std::string_view name() const override {
        switch (kind_) {
            case ReduceKind::sum: return "set-sum";
            case ReduceKind::max: return "set-max";
            case ReduceKind::mean: return "set-mean";
        }
        return "set-reduce";
    }
    Tensor forward(std::span<const Tensor* const> in) override {
        const Tensor& x = *in[0];
        check_set_tensor(x, cards_);
        const std::size_t B = x.dim(0), N = x.dim(1), K = x.dim(2);
        Tensor out(Shape{B, K});
        if (kind_ == ReduceKind::max) argmax_.assign(B * K, 0);
        auto px = x.data();
        for (std::size_t b = 0; b < B; ++b) {
            const double* base = px.data() + b * N * K;
            double* dst = out.data().data() + b * K;
            std::copy(base, base + K, dst);
            for (std::size_t n = 1; n < cards_[b]; ++n) {
                const double* row = base + n * K;
                for (std::size_t k = 0; k < K; ++k) {
                    if (kind_ == ReduceKind::max) {
                        if (row[k] > dst[k]) {
                            dst[k] = row[k];
                            argmax_[b * K + k] = n;
                        }
                    } else {
                        dst[k] += row[k];
                    }
                }
            }
            if (kind_ == ReduceKind::mean) {
                for (std::size_t k = 0; k < K; ++k) dst[k] /= static_cast<double>(cards_[b]);
            }
        }
        return out;
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (!gin[0]) return;
        const Tensor& x = *in[0];
        const std::size_t B = x.dim(0), N = x.dim(1), K = x.dim(2);
        auto d = gin[0]->data();
        for (std::size_t b = 0; b < B; ++b) {
            const double* gb = g.data().data() + b * K;
            if (kind_ == ReduceKind::max) {
                for (std::size_t k = 0; k < K; ++k) d[(b * N + argmax_[b * K + k]) * K + k] += gb[k];
                continue;
            }
            const double w = kind_ == ReduceKind::mean ? 1.0 / static_cast<double>(cards_[b]) : 1.0;
            for (std::size_t n = 0; n < cards_[b]; ++n) {
                double* row = d.data() + (b * N + n) * K;
                for (std::size_t k = 0; k < K; ++k) row[k] += w * gb[k];
            }
        }
    }
    std::span<const std::size_t> routing() const override { return argmax_; }

private:
    std::vector<std::size_t> cards_;
    ReduceKind kind_;
    std::vector<std::size_t> argmax_;
};

class MaskRowsOp final : public Op {
public:
    explicit MaskRowsOp(std::span<const std::size_t> cards) : cards_(cards.begin(), cards.end()) {}
    std::string_view name() const override { return "mask-rows"; }
    Tensor forward(std::span<const Tensor* const> in) override {
        check_set_tensor(*in[0], cards_);
        Tensor y = *in[0];
        apply(y);
        return y;
    }
    void backward(std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (!gin[0]) return;
        Tensor masked = g;
        apply(masked);
        accumulate(gin[0], masked);
    }

private:
    void apply(Tensor& t) const {
        const std::size_t N = t.dim(1), K = t.dim(2);
        for (std::size_t b = 0; b < cards_.size(); ++b) {
            double* start = t.data().data() + (b * N + cards_[b]) * K;
            std::fill(start, start + (N - cards_[b]) * K, 0.0);
        }
    }
    std::vector<std::size_t> cards_;
};

class SoftmaxCrossEntropyOp final : public Op {
public:
    explicit SoftmaxCrossEntropyOp(std::span<const std::size_t> labels)
        : labels_(labels.begin(), labels.end()) {}
    std::string_view name() const override { return "softmax-cross-entropy"; }
    Tensor forward(std::span<const Tensor* const> in) override {
        const Tensor& z = *in[0];
        if (z.rank() != 2 || z.dim(0) != labels_.size()) {
            throw DimensionError("softmax-cross-entropy expects [B, C] logits with B labels");
        }
        const std::size_t B = z.dim(0), C = z.dim(1);
        probs_ = Tensor(z.shape());
        double loss = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            if (labels_[b] >= C) throw ContractError("label out of range for softmax");
            const double* row = z.data().data() + b * C;
            const double shift = *std::max_element(row, row + C);
            double total = 0.0;
            for (std::size_t c = 0; c < C; ++c) total += std::exp(row[c] - shift);
            const double log_total = std::log(total) + shift;
            for (std::size_t c = 0; c < C; ++c) probs_[b * C + c] = std::exp(row[c] - log_total);
            loss += log_total - row[labels_[b]];
        }
        return Tensor::scalar(loss / static_cast<double>(B));
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (!gin[0]) return;
        const std::size_t B = in[0]->dim(0), C = in[0]->dim(1);
        const double w = g[0] / static_cast<double>(B);
        auto d = gin[0]->data();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t c = 0; c < C; ++c) {
                const double target = c == labels_[b] ? 1.0 : 0.0;
                d[b * C + c] += w * (probs_[b * C + c] - target);
            }
        }
    }

private:
    std::vector<std::size_t> labels_;
    Tensor probs_;
};

class MaskedSquaredErrorOp final : public Op {
public:
    MaskedSquaredErrorOp(Tensor target, Tensor mask)
        : target_(std::move(target)), mask_(std::move(mask)) {
        weight_total_ = sum_all(mask_);
    }
    std::string_view name() const override { return "masked-squared-error"; }
    Tensor forward(std::span<const Tensor* const> in) override {
        const Tensor& p = *in[0];
        if (p.size() != target_.size() || p.size() != mask_.size()) {
            throw DimensionError("masked-squared-error size mismatch");
        }
        double loss = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double r = p[i] - target_[i];
            loss += mask_[i] * r * r;
        }
        return Tensor::scalar(weight_total_ > 0.0 ? loss / weight_total_ : 0.0);
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                  std::span<Tensor* const> gin) const override {
        if (!gin[0] || weight_total_ <= 0.0) return;
        const Tensor& p = *in[0];
        auto d = gin[0]->data();
        for (std::size_t i = 0; i < p.size(); ++i)
            d[i] += g[0] * 2.0 * mask_[i] * (p[i] - target_[i]) / weight_total_;
    }

private:
    Tensor target_;
    Tensor mask_;
    double weight_total_ = 0.0;
};

}  // namespace

Var matmul(Var a, Var b) { return record(std::make_unique<MatMulOp>(), {a, b}); }
Var add(Var a, Var b) { return record(std::make_unique<BinaryOp>(Binary::add), {a, b}); }
Var sub(Var a, Var b) { return record(std::make_unique<BinaryOp>(Binary::sub), {a, b}); }
Var mul(Var a, Var b) { return record(std::make_unique<BinaryOp>(Binary::mul), {a, b}); }
Var div(Var a, Var b) { return record(std::make_unique<BinaryOp>(Binary::div), {a, b}); }
Var scale(Var a, double s) { return record(std::make_unique<AffineScalarOp>(s, 0.0), {a}); }
Var add_scalar(Var a, double s) { return record(std::make_unique<AffineScalarOp>(1.0, s), {a}); }
Var neg(Var a) { return scale(a, -1.0); }
Var sqrt(Var a) { return record(std::make_unique<SqrtOp>(), {a}); }
Var clamp_min(Var a, double floor) { return record(std::make_unique<ClampMinOp>(floor), {a}); }
Var activation(Var a, Activation fn) {
    if (fn == Activation::identity) return a;
    return record(std::make_unique<ActivationOp>(fn), {a});
}
Var reshape(Var a, Shape shape) { return record(std::make_unique<ReshapeOp>(std::move(shape)), {a}); }
Var swap_last_axes(Var a) { return record(std::make_unique<SwapLastAxesOp>(), {a}); }
Var reduce(Var a, std::size_t axis, ReduceKind kind) {
    return record(std::make_unique<ReduceOp>(axis, kind), {a});
}
Var sum(Var a) { return record(std::make_unique<SumAllOp>(false), {a}); }
Var mean(Var a) { return record(std::make_unique<SumAllOp>(true), {a}); }

Var set_reduce(Var x, std::span<const std::size_t> cardinalities, ReduceKind kind) {
    return record(std::make_unique<SetReduceOp>(cardinalities, kind), {x});
}

Var mask_rows(Var x, std::span<const std::size_t> cardinalities) {
    return record(std::make_unique<MaskRowsOp>(cardinalities), {x});
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels) {
    return record(std::make_unique<SoftmaxCrossEntropyOp>(labels), {logits});
}

Var masked_squared_error(Var pred, const Tensor& target, const Tensor& mask) {
    return record(std::make_unique<MaskedSquaredErrorOp>(target, mask), {pred});
}

}  // namespace setnet::ad

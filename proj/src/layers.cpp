#include "setnet/layers.hpp"

#include <cmath>

#include "setnet/error.hpp"

namespace setnet {

SetBatch SetBatch::full(Tensor values) {
    if (values.rank() != 3) {
        throw DimensionError("set batch must be [B, N, K], got " + shape_string(values.shape()));
    }
    std::vector<std::size_t> cards(values.dim(0), values.dim(1));
    return SetBatch{std::move(values), std::move(cards)};
}

void SetBatch::validate() const {
    if (values.rank() != 3) {
        throw DimensionError("set batch must be [B, N, K], got " + shape_string(values.shape()));
    }
    if (cardinalities.size() != values.dim(0)) {
        throw DimensionError("set batch has " + std::to_string(values.dim(0)) + " sets but " +
                             std::to_string(cardinalities.size()) + " cardinalities");
    }
    for (auto c : cardinalities) {
        if (c == 0) throw EmptyReductionError("empty set in batch");
        if (c > values.dim(1)) throw DimensionError("cardinality exceeds padded length");
    }
}

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(EquivariantVariant v) noexcept {
    switch (v) {
        case EquivariantVariant::scalar_sum: return "scalar_sum";
        case EquivariantVariant::scalar_max: return "scalar_max";
        case EquivariantVariant::channel_full: return "channel_full";
        case EquivariantVariant::channel_factored: return "channel_factored";
    }
    return "unknown";
}

EquivariantVariant parse_variant(std::string_view s) {
    if (s == "scalar_sum") return EquivariantVariant::scalar_sum;
    if (s == "scalar_max") return EquivariantVariant::scalar_max;
    if (s == "channel_full") return EquivariantVariant::channel_full;
    if (s == "channel_factored") return EquivariantVariant::channel_factored;
    throw ConfigError("unknown equivariant layer variant '" + std::string(s) + "'");
}

std::string_view to_string(Aggregate a) noexcept {
    switch (a) {
        case Aggregate::sum: return "sum";
        case Aggregate::max: return "max";
        case Aggregate::mean: return "mean";
    }
    return "unknown";
}

Aggregate parse_aggregate(std::string_view s) {
    if (s == "sum") return Aggregate::sum;
    if (s == "max") return Aggregate::max;
    if (s == "mean") return Aggregate::mean;
    throw ConfigError("unknown aggregate '" + std::string(s) + "'");
}

std::string_view to_string(ReduceKind k) noexcept {
    switch (k) {
        case ReduceKind::sum: return "sum";
        case ReduceKind::max: return "max";
        case ReduceKind::mean: return "mean";
    }
    return "unknown";
}

ReduceKind parse_reduce(std::string_view s) {
    if (s == "sum") return ReduceKind::sum;
    if (s == "max") return ReduceKind::max;
    if (s == "mean") return ReduceKind::mean;
    throw ConfigError("unknown pooling kind '" + std::string(s) + "'");
}

std::string_view to_string(Activation a) noexcept {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::elu: return "elu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "unknown";
}

Activation parse_activation(std::string_view s) {
    if (s == "identity") return Activation::identity;
    if (s == "tanh") return Activation::tanh;
    if (s == "elu") return Activation::elu;
    if (s == "sigmoid") return Activation::sigmoid;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}

Aggregate default_aggregate(EquivariantVariant v) noexcept {
    return v == EquivariantVariant::scalar_sum ? Aggregate::sum : Aggregate::max;
}

// ---------------------------------------------------------------------------
// Layer construction

namespace {

bool is_scalar(EquivariantVariant v) {
    return v == EquivariantVariant::scalar_sum || v == EquivariantVariant::scalar_max;
}

Tensor glorot(std::size_t in, std::size_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    return Tensor::uniform({in, out}, rng, -limit, limit);
}

}  // namespace

EquivariantLayer EquivariantLayer::create(EquivariantVariant variant, std::size_t in,
                                          std::size_t out, Activation activation, Rng& rng) {
    return create(variant, default_aggregate(variant), in, out, activation, rng);
}

EquivariantLayer EquivariantLayer::create(EquivariantVariant variant, Aggregate aggregate,
                                          std::size_t in, std::size_t out, Activation activation,
                                          Rng& rng) {
    if (is_scalar(variant) && (in != 1 || out != 1)) {
        throw DimensionError("scalar equivariant layers need K = K' = 1");
    }
    if (in == 0 || out == 0) throw DimensionError("layer widths must be positive");
    EquivariantLayer layer;
    layer.variant = variant;
    layer.aggregate = aggregate;
    layer.activation = activation;
    if (variant != EquivariantVariant::channel_factored) layer.lambda = glorot(in, out, rng);
    layer.gamma = glorot(in, out, rng);
    if (variant == EquivariantVariant::channel_factored) layer.beta = Tensor(Shape{out});
    return layer;
}

std::size_t EquivariantLayer::parameter_count() const {
    if (variant == EquivariantVariant::channel_factored) return gamma.size() + beta.size();
    return lambda.size() + gamma.size();
}

void EquivariantLayer::validate() const {
    if (gamma.rank() != 2) throw DimensionError("gamma must be rank 2");
    if (is_scalar(variant) && gamma.shape() != Shape{1, 1}) {
        throw DimensionError("scalar equivariant layers need K = K' = 1");
    }
    if (variant == EquivariantVariant::channel_factored) {
        if (beta.shape() != Shape{gamma.dim(1)}) throw DimensionError("beta must be [K']");
    } else if (lambda.shape() != gamma.shape()) {
        throw DimensionError("lambda and gamma shapes differ");
    }
}

DenseLayer DenseLayer::create(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
    if (in == 0 || out == 0) throw DimensionError("layer widths must be positive");
    return DenseLayer{glorot(in, out, rng), Tensor(Shape{out}), activation};
}

// ---------------------------------------------------------------------------
// Binding

ad::Var ParamBinder::bind(const Tensor& parameter, std::string_view label) {
    for (const auto& [ptr, var] : bound_)
        if (ptr == &parameter) return var;
    ad::Var v = trainable_ ? tape_->variable(parameter, std::string(label))
                           : tape_->constant(parameter, std::string(label));
    bound_.emplace_back(&parameter, v);
    return v;
}

ad::Var ParamBinder::var_of(const Tensor& parameter) const {
    for (const auto& [ptr, var] : bound_)
        if (ptr == &parameter) return var;
    throw ContractError("parameter was not bound to this tape");
}

// ---------------------------------------------------------------------------
// Differentiable layers

namespace {

void require_set_tensor(ad::Var x, std::size_t channels) {
    const Shape s = x.shape();
    if (s.size() != 3) throw DimensionError("set layer input must be [B, N, K], got " + shape_string(s));
    if (s[2] != channels) {
        throw DimensionError("set layer expects K = " + std::to_string(channels) + ", got " +
                             std::to_string(s[2]));
    }
}

ReduceKind reduce_kind(Aggregate a) {
    switch (a) {
        case Aggregate::sum: return ReduceKind::sum;
        case Aggregate::mean: return ReduceKind::mean;
        case Aggregate::max: break;
    }
    return ReduceKind::max;
}

/// [B, K] -> [B, 1, K] so it broadcasts over set members.
ad::Var as_row(ad::Var pooled) {
    const Shape s = pooled.shape();
    return ad::reshape(pooled, {s[0], 1, s[1]});
}

}  // namespace

ad::Var equivariant_apply(const EquivariantLayer& layer, ParamBinder& binder, ad::Var x,
                          std::span<const std::size_t> cardinalities) {
    layer.validate();
    require_set_tensor(x, layer.in_channels());
    ad::Var gamma = binder.bind(layer.gamma, "gamma");
    ad::Var pre;
    switch (layer.variant) {
        case EquivariantVariant::scalar_sum: {
            ad::Var lambda = binder.bind(layer.lambda, "lambda");
            ad::Var pooled = as_row(ad::set_reduce(x, cardinalities, reduce_kind(layer.aggregate)));
            pre = ad::add(ad::mul(x, lambda), ad::mul(pooled, gamma));
            break;
        }
        case EquivariantVariant::scalar_max: {
            ad::Var lambda = binder.bind(layer.lambda, "lambda");
            ad::Var pooled = as_row(ad::set_reduce(x, cardinalities, ReduceKind::max));
            pre = ad::sub(ad::mul(x, lambda), ad::mul(pooled, gamma));
            break;
        }
        case EquivariantVariant::channel_full: {
            ad::Var lambda = binder.bind(layer.lambda, "lambda");
            ad::Var pooled = ad::set_reduce(x, cardinalities, reduce_kind(layer.aggregate));
            ad::Var shared = as_row(ad::matmul(pooled, gamma));
            ad::Var local = ad::matmul(x, lambda);
            pre = layer.aggregate == Aggregate::max ? ad::sub(local, shared) : ad::add(local, shared);
            break;
        }
        case EquivariantVariant::channel_factored: {
            ad::Var beta = binder.bind(layer.beta, "beta");
            ad::Var pooled = as_row(ad::set_reduce(x, cardinalities, ReduceKind::max));
            pre = ad::add(ad::matmul(ad::sub(x, pooled), gamma), beta);
            break;
        }
    }
    return ad::mask_rows(ad::activation(pre, layer.activation), cardinalities);
}

ad::Var dense_apply(const DenseLayer& layer, ParamBinder& binder, ad::Var x) {
    if (x.shape().size() < 2 || x.shape().back() != layer.weight.dim(0)) {
        throw DimensionError("dense layer expects last axis " + std::to_string(layer.weight.dim(0)) +
                             ", got " + shape_string(x.shape()));
    }
    ad::Var w = binder.bind(layer.weight, "weight");
    ad::Var b = binder.bind(layer.bias, "bias");
    return ad::activation(ad::add(ad::matmul(x, w), b), layer.activation);
}

ad::Var pool_apply(ad::Var x, std::span<const std::size_t> cardinalities, PoolSpec spec) {
    return ad::set_reduce(x, cardinalities, spec.kind);
}

Tensor dropout_mask(const Shape& shape, const DropoutSpec& spec, Rng& rng) {
    if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw ContractError("dropout rate must be in [0, 1)");
    const double keep_scale = 1.0 / (1.0 - spec.rate);
    Tensor mask(shape);
    if (shape.size() == 3 && spec.simultaneous) {
        const std::size_t B = shape[0], N = shape[1], K = shape[2];
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t k = 0; k < K; ++k) {
                const double m = bernoulli(rng, spec.rate) ? 0.0 : keep_scale;
                for (std::size_t n = 0; n < N; ++n) mask[(b * N + n) * K + k] = m;
            }
        }
    } else {
        for (auto& m : mask.data()) m = bernoulli(rng, spec.rate) ? 0.0 : keep_scale;
    }
    return mask;
}

ad::Var dropout_apply(ad::Var x, const DropoutSpec& spec, Rng* rng, bool training,
                      const MaskObserver* observer) {
    if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw ContractError("dropout rate must be in [0, 1)");
    if (!training || spec.rate == 0.0) return x;
    if (!rng) throw ContractError("training-mode dropout needs an rng");
    Tensor mask = dropout_mask(x.shape(), spec, *rng);
    if (observer && *observer) (*observer)(mask);
    return ad::mul(x, x.tape().constant(std::move(mask), "dropout-mask"));
}

ad::Var normalize_apply(ad::Var x, std::span<const std::size_t> cardinalities) {
    const Shape s = x.shape();
    if (s.size() != 3) throw DimensionError("normalize expects [B, N, K], got " + shape_string(s));
    for (auto c : cardinalities)
        if (c < 2) throw DegenerateError("normalization needs at least 2 members per set");
    ad::Var centered =
        ad::mask_rows(ad::sub(x, as_row(ad::set_reduce(x, cardinalities, ReduceKind::mean))),
                      cardinalities);
    ad::Var per_axis = ad::set_reduce(ad::mul(centered, centered), cardinalities, ReduceKind::mean);
    ad::Var variance = ad::reduce(per_axis, 1, ReduceKind::mean);  // [B]
    ad::Var stddev = ad::clamp_min(ad::sqrt(variance), 1e-8);
    return ad::div(centered, ad::reshape(stddev, {s[0], 1, 1}));
}

// ---------------------------------------------------------------------------
// Tensor-level entry points

SetBatch equivariant_forward(const EquivariantLayer& layer, const SetBatch& x) {
    x.validate();
    ad::Tape tape;
    ParamBinder binder(tape, false);
    ad::Var in = tape.constant(x.values);
    ad::Var out = equivariant_apply(layer, binder, in, x.cardinalities);
    return SetBatch{out.value(), x.cardinalities};
}

Tensor set_pool(const SetBatch& x, PoolSpec spec) {
    x.validate();
    ad::Tape tape;
    return pool_apply(tape.constant(x.values), x.cardinalities, spec).value();
}

SetBatch dropout_forward(const SetBatch& x, const DropoutSpec& spec, Rng& rng, bool training) {
    x.validate();
    ad::Tape tape;
    ad::Var out = dropout_apply(tape.constant(x.values), spec, &rng, training);
    return SetBatch{out.value(), x.cardinalities};
}

Tensor dense_forward(const Tensor& weight, const Tensor& bias, const Tensor& x,
                     Activation activation) {
    ad::Tape tape;
    ParamBinder binder(tape, false);
    DenseLayer layer{weight, bias, activation};
    return dense_apply(layer, binder, tape.constant(x)).value();
}

SetBatch normalize_sets(const SetBatch& x) {
    x.validate();
    ad::Tape tape;
    return SetBatch{normalize_apply(tape.constant(x.values), x.cardinalities).value(),
                    x.cardinalities};
}

}  // namespace setnet

#include <cmath>

#include "setnet/error.hpp"
#include "setnet/train.hpp"

namespace setnet::train {

namespace {

Stage equivariant_stage(EquivariantLayer layer) {
    Stage s;
    s.kind = Stage::Kind::equivariant;
    s.equivariant = std::move(layer);
    return s;
}

Stage dense_stage(DenseLayer layer) {
    Stage s;
    s.kind = Stage::Kind::dense;
    s.dense = std::move(layer);
    return s;
}

Stage pool_stage(ReduceKind kind) {
    Stage s;
    s.kind = Stage::Kind::pool;
    s.pool.kind = kind;
    return s;
}

Stage dropout_stage(DropoutSpec spec) {
    Stage s;
    s.kind = Stage::Kind::dropout;
    s.dropout = spec;
    return s;
}

Stage plain_stage(Stage::Kind kind) {
    Stage s;
    s.kind = kind;
    return s;
}

}  // namespace

ad::Var SetModel::forward(ParamBinder& binder, ad::Var x, std::span<const std::size_t> cardinalities,
                          const ForwardOptions& options) const {
    bool pooled = false;
    bool members_last = false;
    for (const Stage& s : stages) {
        switch (s.kind) {
            case Stage::Kind::normalize:
                x = normalize_apply(x, cardinalities);
                break;
            case Stage::Kind::equivariant:
                x = equivariant_apply(s.equivariant, binder, x, cardinalities);
                if (options.taps) options.taps->push_back(x);
                break;
            case Stage::Kind::dense:
                x = dense_apply(s.dense, binder, x);
                if (!pooled && !members_last && x.shape().size() == 3) x = ad::mask_rows(x, cardinalities);
                break;
            case Stage::Kind::pool:
                x = pool_apply(x, cardinalities, s.pool);
                pooled = true;
                break;
            case Stage::Kind::dropout:
                x = dropout_apply(x, s.dropout, options.rng, options.training, options.observer);
                break;
            case Stage::Kind::flatten: {
                const Shape sh = x.shape();
                // With members on the last axis swap_axes has already required full sets.
                for (auto c : cardinalities) {
                    if (!members_last && c != sh[1]) {
                        throw ContractError(name + " needs full sets of " + std::to_string(sh[1]));
                    }
                }
                x = ad::reshape(x, {sh[0], sh[1] * sh[2]});
                pooled = true;
                break;
            }
            case Stage::Kind::swap_axes:
                for (auto c : cardinalities) {
                    if (c != x.shape()[members_last ? 2 : 1]) throw ContractError(name + " needs full sets");
                }
                x = ad::swap_last_axes(x);
                members_last = !members_last;
                break;
        }
    }
    return x;
}

Tensor SetModel::predict(const SetBatch& batch) const {
    batch.validate();
    ad::Tape tape;
    ParamBinder binder(tape, false);
    return forward(binder, tape.constant(batch.values), batch.cardinalities).value();
}

std::vector<std::pair<std::string, const Tensor*>> SetModel::parameters() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string p = "s" + std::to_string(i) + ".";
        const Stage& s = stages[i];
        if (s.kind == Stage::Kind::equivariant) {
            const auto& l = s.equivariant;
            if (l.variant != EquivariantVariant::channel_factored) out.emplace_back(p + "lambda", &l.lambda);
            out.emplace_back(p + "gamma", &l.gamma);
            if (l.variant == EquivariantVariant::channel_factored) out.emplace_back(p + "beta", &l.beta);
        } else if (s.kind == Stage::Kind::dense) {
            out.emplace_back(p + "weight", &s.dense.weight);
            out.emplace_back(p + "bias", &s.dense.bias);
        }
    }
    return out;
}

std::vector<Tensor*> SetModel::mutable_parameters() {
    std::vector<Tensor*> out;
    for (const auto& [name, t] : parameters()) out.push_back(const_cast<Tensor*>(t));
    return out;
}

std::size_t SetModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : parameters()) n += t->size();
    return n;
}

std::size_t SetModel::equivariant_stage_count() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.kind == Stage::Kind::equivariant;
    return n;
}

bool SetModel::per_member_output() const {
    for (const auto& s : stages)
        if (s.kind == Stage::Kind::pool || s.kind == Stage::Kind::flatten) return false;
    return true;
}

Checkpoint SetModel::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.set_meta("model", name);
    for (const auto& [n, t] : parameters()) ckpt.tensors.push_back({n, *t});
    return ckpt;
}

void SetModel::load(const Checkpoint& ckpt) {
    auto params = parameters();
    for (const auto& [n, t] : params) {
        const Tensor* src = ckpt.find(n);
        if (!src) throw FormatError("checkpoint lacks parameter " + n);
        if (src->shape() != t->shape()) {
            throw FormatError("checkpoint parameter " + n + " has shape " + shape_string(src->shape()) +
                              ", model expects " + shape_string(t->shape()));
        }
    }
    for (const auto& [n, t] : params) *const_cast<Tensor*>(t) = *ckpt.find(n);
}

// ---------------------------------------------------------------------------

std::string_view to_string(MnistVariant v) noexcept {
    switch (v) {
        case MnistVariant::I: return "I";
        case MnistVariant::II: return "II";
        case MnistVariant::III: return "III";
        case MnistVariant::IV: return "IV";
    }
    return "unknown";
}

MnistVariant parse_mnist_variant(std::string_view s) {
    for (auto v : {MnistVariant::I, MnistVariant::II, MnistVariant::III, MnistVariant::IV})
        if (s == to_string(v)) return v;
    throw ConfigError("unknown mnist_sum variant '" + std::string(s) + "'");
}

SetModel build_mnist_model(MnistVariant variant, const MnistModelOptions& o, Rng& rng) {
    const std::size_t n = o.set_size, P = o.pixels, classes = 9 * n + 1;
    const std::size_t e = o.encoder_width, f = o.set_width, h = o.head_width;
    if (n == 0 || P == 0 || e == 0 || f == 0 || h == 0) throw ConfigError("mnist model sizes must be positive");
    const Activation act = o.activation;

    // III/IV: encoder, one layer before the pool, one after, output.
    const double budget = static_cast<double>((P * e + e) + (e * f + f) + (f * h + h) + (h * classes + classes));
    // Flat variants: first hidden h1 sized to the budget, then h1 -> h -> classes.
    auto first_hidden = [&](std::size_t inputs, std::size_t extra) {
        const double fixed = static_cast<double>(h + h * classes + classes + extra);
        const double per_unit = static_cast<double>(inputs + 1 + h);
        return static_cast<std::size_t>(std::max(1.0, std::round((budget - fixed) / per_unit)));
    };

    SetModel m;
    m.name = "mnist-" + std::string(to_string(variant));
    switch (variant) {
        case MnistVariant::I: {
            const std::size_t h1 = first_hidden(n * P, 0);
            m.stages.push_back(plain_stage(Stage::Kind::flatten));
            m.stages.push_back(dense_stage(DenseLayer::create(n * P, h1, act, rng)));
            m.stages.push_back(dropout_stage(o.dropout));
            m.stages.push_back(dense_stage(DenseLayer::create(h1, h, act, rng)));
            break;
        }
        case MnistVariant::II: {
            const std::size_t c = o.mix_channels;
            const std::size_t h1 = first_hidden(P * c, n * c + c);
            m.stages.push_back(plain_stage(Stage::Kind::swap_axes));  // [B, P, n]
            m.stages.push_back(dense_stage(DenseLayer::create(n, c, act, rng)));
            m.stages.push_back(plain_stage(Stage::Kind::flatten));
            m.stages.push_back(dense_stage(DenseLayer::create(P * c, h1, act, rng)));
            m.stages.push_back(dropout_stage(o.dropout));
            m.stages.push_back(dense_stage(DenseLayer::create(h1, h, act, rng)));
            break;
        }
        case MnistVariant::III:
        case MnistVariant::IV: {
            m.stages.push_back(dense_stage(DenseLayer::create(P, e, act, rng)));
            m.stages.push_back(dropout_stage(o.dropout));
            if (variant == MnistVariant::III) {
                m.stages.push_back(dense_stage(DenseLayer::create(e, f, act, rng)));
            } else {
                m.stages.push_back(equivariant_stage(EquivariantLayer::create(
                    EquivariantVariant::channel_factored, e, f, act, rng)));
            }
            m.stages.push_back(pool_stage(o.pool));
            m.stages.push_back(dense_stage(DenseLayer::create(f, h, act, rng)));
            break;
        }
    }
    m.stages.push_back(dense_stage(DenseLayer::create(h, classes, Activation::identity, rng)));
    return m;
}

SetModel build_pointcloud_model(const PointCloudModelOptions& o, Rng& rng) {
    if (o.widths.empty() || o.classes < 2) throw ConfigError("pointcloud model needs widths and >= 2 classes");
    SetModel m;
    m.name = "pointcloud";
    m.stages.push_back(plain_stage(Stage::Kind::normalize));
    std::size_t in = 3;
    for (auto w : o.widths) {
        m.stages.push_back(equivariant_stage(EquivariantLayer::create(o.layer, in, w, o.activation, rng)));
        in = w;
    }
    m.stages.push_back(pool_stage(o.pool));
    m.stages.push_back(dropout_stage(o.dropout));
    m.stages.push_back(dense_stage(DenseLayer::create(in, in, o.activation, rng)));
    m.stages.push_back(dense_stage(DenseLayer::create(in, o.classes, Activation::identity, rng)));
    return m;
}

SetModel build_regression_model(const RegressionModelOptions& o, Rng& rng) {
    if (o.widths.empty()) throw ConfigError("regression model needs widths");
    SetModel m;
    m.name = "regression-equivariant";
    std::size_t in = o.features;
    for (auto w : o.widths) {
        m.stages.push_back(
            equivariant_stage(EquivariantLayer::create(o.layer, o.aggregate, in, w, o.activation, rng)));
        m.stages.push_back(dropout_stage(o.dropout));
        in = w;
    }
    m.stages.push_back(equivariant_stage(
        EquivariantLayer::create(o.layer, o.aggregate, in, 1, Activation::identity, rng)));
    return m;
}

SetModel build_member_mlp(const RegressionModelOptions& o, std::size_t target_parameters, Rng& rng) {
    if (o.widths.empty()) throw ConfigError("member MLP needs widths");
    const std::size_t depth = o.widths.size();
    auto count_for = [&](std::size_t w) {
        std::size_t total = o.features * w + w + (w + 1);
        total += (depth - 1) * (w * w + w);
        return total;
    };
    std::size_t best = 1;
    for (std::size_t w = 1; w <= 4096; ++w) {
        const auto diff = [&](std::size_t v) {
            const double c = static_cast<double>(count_for(v));
            return std::abs(c - static_cast<double>(target_parameters));
        };
        if (diff(w) < diff(best)) best = w;
        if (count_for(w) > target_parameters) break;
    }
    SetModel m;
    m.name = "regression-mlp";
    std::size_t in = o.features;
    for (std::size_t d = 0; d < depth; ++d) {
        m.stages.push_back(dense_stage(DenseLayer::create(in, best, o.activation, rng)));
        m.stages.push_back(dropout_stage(o.dropout));
        in = best;
    }
    m.stages.push_back(dense_stage(DenseLayer::create(in, 1, Activation::identity, rng)));
    return m;
}

}  // namespace setnet::train

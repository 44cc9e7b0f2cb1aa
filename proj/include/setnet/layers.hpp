#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "setnet/autodiff.hpp"
#include "setnet/random.hpp"
#include "setnet/tensor.hpp"

namespace setnet {

/// B sets padded to N_max members of K channels. Rows at index >=
/// cardinalities[b] of set b are padding and never reach any set output.
struct SetBatch {
    Tensor values;  // [B, N_max, K]
    std::vector<std::size_t> cardinalities;

    /// Every set uses all N_max rows.
    static SetBatch full(Tensor values);

    std::size_t batch_size() const { return values.dim(0); }
    std::size_t max_members() const { return values.dim(1); }
    std::size_t channels() const { return values.dim(2); }

    /// Throws DimensionError / EmptyReductionError on a malformed batch.
    void validate() const;
};

enum class EquivariantVariant {
    scalar_sum,        // sigma(lambda x + gamma agg(x) 1), K = K' = 1
    scalar_max,        // sigma(lambda x - gamma max(x) 1), K = K' = 1
    channel_full,      // sigma(x Lambda -/+ 1 agg(x) Gamma)
    channel_factored,  // sigma(beta + (x - 1 max(x)) Gamma)
};

/// Set aggregate feeding the shared term. Sum and mean enter with a plus
/// sign, max with a minus sign, except scalar_sum which always adds.
enum class Aggregate { sum, max, mean };

std::string_view to_string(EquivariantVariant v) noexcept;
EquivariantVariant parse_variant(std::string_view s);
std::string_view to_string(Aggregate a) noexcept;
Aggregate parse_aggregate(std::string_view s);
std::string_view to_string(ReduceKind k) noexcept;
ReduceKind parse_reduce(std::string_view s);
std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view s);

Aggregate default_aggregate(EquivariantVariant v) noexcept;

struct EquivariantLayer {
    EquivariantVariant variant = EquivariantVariant::channel_factored;
    Aggregate aggregate = Aggregate::max;
    Tensor lambda;  // [K, K'] (or [1, 1]); unused by channel_factored
    Tensor gamma;   // [K, K'] (or [1, 1])
    Tensor beta;    // [K'], channel_factored only
    Activation activation = Activation::identity;

    /// Uniform on +-sqrt(6 / (K + K')) weights, zero bias.
    static EquivariantLayer create(EquivariantVariant variant, std::size_t in, std::size_t out,
                                   Activation activation, Rng& rng);
    static EquivariantLayer create(EquivariantVariant variant, Aggregate aggregate, std::size_t in,
                                   std::size_t out, Activation activation, Rng& rng);

    std::size_t in_channels() const { return gamma.dim(0); }
    std::size_t out_channels() const { return gamma.dim(1); }
    std::size_t parameter_count() const;
    void validate() const;
};

struct DenseLayer {
    Tensor weight;  // [K, K']
    Tensor bias;    // [K']
    Activation activation = Activation::identity;

    static DenseLayer create(std::size_t in, std::size_t out, Activation activation, Rng& rng);
    std::size_t parameter_count() const { return weight.size() + bias.size(); }
};

struct PoolSpec {
    ReduceKind kind = ReduceKind::max;
};

struct DropoutSpec {
    double rate = 0.0;
    /// One mask per (set, channel) shared by all members of the set.
    bool simultaneous = true;
};

/// Called with every dropout mask drawn in training mode.
using MaskObserver = std::function<void(const Tensor& mask)>;

/// Maps parameter tensors onto tape leaves: trainable parameters become
/// variables whose gradients can be looked up afterwards, frozen ones become
/// constants.
class ParamBinder {
public:
    ParamBinder(ad::Tape& tape, bool trainable) : tape_(&tape), trainable_(trainable) {}

    ad::Tape& tape() const { return *tape_; }
    ad::Var bind(const Tensor& parameter, std::string_view label = {});
    /// Leaf bound for `parameter`; throws ContractError if it was never bound.
    ad::Var var_of(const Tensor& parameter) const;
    bool trainable() const { return trainable_; }

private:
    ad::Tape* tape_;
    bool trainable_;
    std::vector<std::pair<const Tensor*, ad::Var>> bound_;
};

// ---------------------------------------------------------------------------
// Differentiable layer application on [B, N, K] set tensors.

ad::Var equivariant_apply(const EquivariantLayer& layer, ParamBinder& binder, ad::Var x,
                          std::span<const std::size_t> cardinalities);
/// Affine map on the last axis plus nonlinearity (any rank >= 2).
ad::Var dense_apply(const DenseLayer& layer, ParamBinder& binder, ad::Var x);
ad::Var pool_apply(ad::Var x, std::span<const std::size_t> cardinalities, PoolSpec spec);
/// Inverted dropout. Rank-3 inputs with `simultaneous` share one mask per
/// (set, channel); everything else draws per entry. Identity when not training.
ad::Var dropout_apply(ad::Var x, const DropoutSpec& spec, Rng* rng, bool training,
                      const MaskObserver* observer = nullptr);
/// Per set: subtract the per-axis mean of the real rows, divide by the global
/// standard deviation (floored at 1e-8). Requires cardinalities >= 2.
ad::Var normalize_apply(ad::Var x, std::span<const std::size_t> cardinalities);

/// Drawn dropout mask for a rank-2 or rank-3 shape, entries in {0, 1/(1-rate)}.
Tensor dropout_mask(const Shape& shape, const DropoutSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------
// Tensor-level entry points.

SetBatch equivariant_forward(const EquivariantLayer& layer, const SetBatch& x);
Tensor set_pool(const SetBatch& x, PoolSpec spec);
SetBatch dropout_forward(const SetBatch& x, const DropoutSpec& spec, Rng& rng, bool training);
Tensor dense_forward(const Tensor& weight, const Tensor& bias, const Tensor& x,
                     Activation activation);
SetBatch normalize_sets(const SetBatch& x);

}  // namespace setnet

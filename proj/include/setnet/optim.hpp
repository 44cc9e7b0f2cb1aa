#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "setnet/tensor.hpp"

namespace setnet {

enum class OptimizerKind { sgd, adam, adamax };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer(std::string_view s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Rescale gradients to this global L2 norm when exceeded; 0 disables.
    double clip_norm = 0.0;
};

/// SGD, Adam (bias-corrected) and Adamax (infinity-norm second moment).
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config);

    /// One update. Every gradient must be finite and match its parameter's
    /// shape, otherwise nothing is modified and the call throws.
    void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);

    const OptimizerConfig& config() const noexcept { return config_; }
    std::uint64_t steps() const noexcept { return t_; }
    const std::vector<Tensor>& first_moments() const noexcept { return m_; }
    const std::vector<Tensor>& second_moments() const noexcept { return v_; }

    /// Restores state captured from the accessors above.
    void restore(std::uint64_t steps, std::vector<Tensor> first, std::vector<Tensor> second);

private:
    OptimizerConfig config_;
    std::uint64_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

double global_norm(std::span<const Tensor* const> grads) noexcept;

}  // namespace setnet

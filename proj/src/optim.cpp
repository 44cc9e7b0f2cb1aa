#include "setnet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "setnet/error.hpp"

namespace setnet {

std::string_view to_string(OptimizerKind kind) noexcept {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::adamax: return "adamax";
    }
    return "unknown";
}

OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    if (s == "adamax") return OptimizerKind::adamax;
    throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
    if (!(config_.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
        !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
        throw ConfigError("moment decay rates must lie in [0, 1)");
    }
    if (config_.clip_norm < 0.0) throw ConfigError("clip norm must be non-negative");
}

double global_norm(std::span<const Tensor* const> grads) noexcept {
    double total = 0.0;
    for (const Tensor* g : grads)
        for (double v : g->data()) total += v * v;
    return std::sqrt(total);
}

void Optimizer::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
    if (params.size() != grads.size()) throw DimensionError("one gradient per parameter required");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->shape() != grads[i]->shape()) {
            throw DimensionError("gradient shape " + shape_string(grads[i]->shape()) +
                                 " does not match parameter " + shape_string(params[i]->shape()));
        }
        require_finite(*grads[i], "gradient " + std::to_string(i));
    }
    if (config_.kind != OptimizerKind::sgd) {
        if (m_.empty()) {
            for (const Tensor* p : params) {
                m_.emplace_back(p->shape());
                v_.emplace_back(p->shape());
            }
        } else if (m_.size() != params.size()) {
            throw DimensionError("parameter count changed between optimizer steps");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (m_[i].shape() != params[i]->shape()) {
                throw DimensionError("parameter shape changed between optimizer steps");
            }
        }
    }

    double clip_scale = 1.0;
    if (config_.clip_norm > 0.0) {
        const double norm = global_norm(grads);
        if (norm > config_.clip_norm) clip_scale = config_.clip_norm / norm;
    }

    ++t_;
    const double lr = config_.learning_rate;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double t = static_cast<double>(t_);
    const double bias1 = 1.0 - std::pow(b1, t);
    const double bias2 = 1.0 - std::pow(b2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i]->data();
        auto g = grads[i]->data();
        switch (config_.kind) {
            case OptimizerKind::sgd:
                for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= lr * clip_scale * g[j];
                break;
            case OptimizerKind::adam: {
                auto m = m_[i].data();
                auto v = v_[i].data();
                for (std::size_t j = 0; j < theta.size(); ++j) {
                    const double gj = clip_scale * g[j];
                    m[j] = b1 * m[j] + (1.0 - b1) * gj;
                    v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                    const double m_hat = m[j] / bias1;
                    const double v_hat = v[j] / bias2;
                    theta[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
                }
                break;
            }
            case OptimizerKind::adamax: {
                auto m = m_[i].data();
                auto u = v_[i].data();
                const double step = lr / bias1;
                for (std::size_t j = 0; j < theta.size(); ++j) {
                    const double gj = clip_scale * g[j];
                    m[j] = b1 * m[j] + (1.0 - b1) * gj;
                    u[j] = std::max(b2 * u[j], std::abs(gj));
                    theta[j] -= step * m[j] / std::max(u[j], 1e-12);
                }
                break;
            }
        }
    }
}

void Optimizer::restore(std::uint64_t steps, std::vector<Tensor> first, std::vector<Tensor> second) {
    if (first.size() != second.size()) throw DimensionError("moment lists differ in length");
    t_ = steps;
    m_ = std::move(first);
    v_ = std::move(second);
}

}  // namespace setnet

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "setnet/error.hpp"
#include "setnet/optim.hpp"

using namespace setnet;

namespace {

void step_once(Optimizer& opt, Tensor& theta, const Tensor& grad) {
    Tensor* p[] = {&theta};
    const Tensor* g[] = {&grad};
    opt.step(p, g);
}

/// Parameter after `steps` updates with a constant gradient.
Tensor run_constant(OptimizerKind kind, const Tensor& grad, int steps) {
    Optimizer opt({kind, 1e-3, 0.9, 0.999, 1e-14, 0.0});
    Tensor theta(grad.shape(), 0.0);
    for (int i = 0; i < steps; ++i) step_once(opt, theta, grad);
    return theta;
}

}  // namespace

TEST(Optimizer, SgdStep) {
    Optimizer opt({OptimizerKind::sgd, 0.1});
    Tensor theta = Tensor::scalar(1.0);
    step_once(opt, theta, Tensor::scalar(2.0));
    EXPECT_DOUBLE_EQ(theta.item(), 0.8);
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(Optimizer, AdamFirstStepIsLearningRate) {
    for (double g : {1e-4, 1.0, 1e4}) {
        Optimizer opt({OptimizerKind::adam, 1e-3});
        Tensor theta({3}, 0.0);
        step_once(opt, theta, Tensor({3}, g));
        for (double v : theta.values()) EXPECT_NEAR(v, -1e-3, 1e-3 * 1e-3) << g;
    }
}

TEST(Optimizer, AdamaxConvergesOnQuadratic) {
    for (auto [b1, b2] : {std::pair{0.1, 0.9}, std::pair{0.9, 0.999}}) {
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::adamax;
        cfg.learning_rate = 0.01;
        cfg.beta1 = b1;
        cfg.beta2 = b2;
        Optimizer opt(cfg);
        Tensor theta = Tensor::scalar(3.0);
        double ref = 3.0, m = 0.0, u = 0.0;
        for (int t = 1; t <= 500; ++t) {
            step_once(opt, theta, Tensor::scalar(2.0 * theta.item()));
            const double g = 2.0 * ref;
            m = b1 * m + (1.0 - b1) * g;
            u = std::max(b2 * u, std::abs(g));
            ref -= 0.01 / (1.0 - std::pow(b1, t)) * m / u;
        }
        EXPECT_NEAR(theta.item(), ref, 1e-12) << b1;
        if (b1 == 0.1) {
            EXPECT_LT(std::abs(theta.item()), 1e-2);
        }
    }
}

TEST(Optimizer, AdamaxHandlesZeroGradients) {
    Optimizer opt({OptimizerKind::adamax, 0.01});
    Tensor theta = Tensor::vector({1.0, 2.0});
    for (int i = 0; i < 5; ++i) step_once(opt, theta, Tensor::vector({0.0, 0.0}));
    EXPECT_EQ(theta, Tensor::vector({1.0, 2.0}));
}

TEST(Optimizer, AdaptiveUpdatesIgnoreGradientScale) {
    const Tensor g = Tensor::vector({0.3, -2.0, 5.0});
    for (auto kind : {OptimizerKind::adam, OptimizerKind::adamax}) {
        const Tensor base = run_constant(kind, g, 2000);
        for (double c : {0.01, 100.0}) {
            const Tensor scaled = run_constant(kind, scale(g, c), 2000);
            for (std::size_t i = 0; i < g.size(); ++i)
                EXPECT_NEAR(scaled[i], base[i], 1e-6 * std::abs(base[i])) << to_string(kind) << " " << c;
        }
    }
}

TEST(Optimizer, RefusesNonFiniteGradients) {
    Optimizer opt({OptimizerKind::adam, 1e-3});
    Tensor theta = Tensor::vector({1.0, 2.0});
    Tensor bad = Tensor::vector({0.5, std::numeric_limits<double>::infinity()});
    EXPECT_THROW(step_once(opt, theta, bad), NumericError);
    EXPECT_EQ(theta, Tensor::vector({1.0, 2.0}));
    EXPECT_EQ(opt.steps(), 0u);
    EXPECT_THROW(step_once(opt, theta, Tensor::vector({1.0})), DimensionError);
}

TEST(Optimizer, ConfigValidation) {
    EXPECT_THROW(Optimizer({OptimizerKind::adam, 0.0}), ConfigError);
    EXPECT_THROW(Optimizer({OptimizerKind::adam, 1e-3, 1.0}), ConfigError);
    EXPECT_THROW(Optimizer({OptimizerKind::adam, 1e-3, 0.9, 0.999, 1e-8, -1.0}), ConfigError);
    EXPECT_EQ(parse_optimizer("adamax"), OptimizerKind::adamax);
    EXPECT_THROW(parse_optimizer("rmsprop"), ConfigError);
}

TEST(Optimizer, ClippingRescalesToGlobalNorm) {
    Optimizer opt({OptimizerKind::sgd, 1.0, 0.9, 0.999, 1e-8, 1.0});
    Tensor a = Tensor::vector({0.0}), b = Tensor::vector({0.0});
    const Tensor ga = Tensor::vector({3.0}), gb = Tensor::vector({4.0});
    Tensor* p[] = {&a, &b};
    const Tensor* g[] = {&ga, &gb};
    EXPECT_DOUBLE_EQ(global_norm(g), 5.0);
    opt.step(p, g);
    EXPECT_DOUBLE_EQ(a[0], -0.6);
    EXPECT_DOUBLE_EQ(b[0], -0.8);
}

TEST(Optimizer, TrajectoriesAreDeterministicAndRestorable) {
    Rng rng(51);
    std::vector<Tensor> grads;
    for (int i = 0; i < 40; ++i) grads.push_back(Tensor::normal({4}, rng));
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::adamax}) {
        Optimizer a({kind, 1e-2}), b({kind, 1e-2});
        Tensor ta({4}, 1.0), tb({4}, 1.0);
        for (int i = 0; i < 20; ++i) {
            step_once(a, ta, grads[i]);
            step_once(b, tb, grads[i]);
        }
        EXPECT_EQ(ta, tb);
        Optimizer resumed({kind, 1e-2});
        resumed.restore(a.steps(), a.first_moments(), a.second_moments());
        Tensor tr = ta;
        for (int i = 20; i < 40; ++i) {
            step_once(a, ta, grads[i]);
            step_once(resumed, tr, grads[i]);
        }
        EXPECT_EQ(ta, tr) << to_string(kind);
        EXPECT_EQ(a.steps(), 40u);
    }
}

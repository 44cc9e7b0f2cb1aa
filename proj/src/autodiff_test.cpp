#include <cmath>

#include <gtest/gtest.h>

#include "setnet/autodiff.hpp"
#include "setnet/error.hpp"

using namespace setnet;

TEST(Tape, ForwardScale) {
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor::scalar(3.0), "x");
    ad::Var y = ad::scale(x, 2.0);
    EXPECT_EQ(tape.forward(y).item(), 6.0);
    tape.set_leaf(x, Tensor::scalar(-1.5));
    EXPECT_EQ(tape.forward(y).item(), -3.0);
}

TEST(Tape, ForwardMax) {
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor::vector({1, 5, 2}));
    EXPECT_EQ(tape.forward(ad::reduce(x, 0, ReduceKind::max)).item(), 5.0);
}

TEST(Tape, MaxNormalizedLayer) {
    // beta = 0, Gamma = I, identity activation: x - max(x).
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor({1, 2, 1}, {1, 2}));
    const std::vector<std::size_t> cards{2};
    ad::Var mx = ad::reshape(ad::set_reduce(x, cards, ReduceKind::max), {1, 1, 1});
    ad::Var y = ad::matmul(ad::sub(x, mx), tape.constant(Tensor::matrix({{1}})));
    EXPECT_EQ(tape.forward(y), Tensor({1, 2, 1}, {-1, 0}));
}

TEST(Tape, BackwardSquare) {
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor::scalar(3.0));
    const ad::GradientMap g = tape.backward(ad::mul(x, x));
    EXPECT_EQ(g[x].item(), 6.0);
    EXPECT_EQ(g.size(), 1u);
}

TEST(Tape, BackwardNeedsScalarRoot) {
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor::vector({1, 2}));
    EXPECT_THROW(tape.backward(ad::scale(x, 2.0)), ContractError);
}

TEST(Tape, NonFiniteNodeIsReported) {
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor::vector({1, 2}));
    ad::Var zero = tape.constant(Tensor::vector({0, 1}));
    try {
        ad::div(x, zero);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("div"), std::string::npos) << e.what();
    }
}

TEST(Tape, MaxGradientRoutesToArgmaxRow) {
    ad::Tape tape;
    // One set, three members, two channels; argmax rows are 2 and 1.
    ad::Var x = tape.variable(Tensor({1, 3, 2}, {4, 1, 0, 2, 7, -1}));
    const std::vector<std::size_t> cards{3};
    const ad::GradientMap g = tape.backward(ad::sum(ad::set_reduce(x, cards, ReduceKind::max)));
    EXPECT_EQ(g[x], Tensor({1, 3, 2}, {0, 0, 0, 1, 1, 0}));
}

TEST(Tape, MeanGradientIsUniformOverRealRows) {
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor({1, 4, 1}, {1, 2, 3, 99}));
    const std::vector<std::size_t> cards{2};
    const ad::GradientMap g = tape.backward(ad::sum(ad::set_reduce(x, cards, ReduceKind::mean)));
    EXPECT_EQ(g[x], Tensor({1, 4, 1}, {0.5, 0.5, 0, 0}));
}

TEST(Tape, SoftmaxCrossEntropyValue) {
    ad::Tape tape;
    ad::Var logits = tape.variable(Tensor::matrix({{1, 2, 3}, {1000, 0, 0}}));
    const std::vector<std::size_t> labels{2, 0};
    const ad::Var loss = ad::softmax_cross_entropy(logits, labels);
    const double first = -(3.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
    EXPECT_NEAR(tape.value(loss).item(), first / 2.0, 1e-12);
    const std::vector<std::size_t> bad{3, 0};
    EXPECT_THROW(ad::softmax_cross_entropy(logits, bad), ContractError);
}

TEST(Tape, MaskedSquaredErrorIgnoresUnlabeled) {
    ad::Tape tape;
    ad::Var pred = tape.variable(Tensor::vector({1, 2, 3}));
    const Tensor target = Tensor::vector({0, 100, 1});
    const Tensor mask = Tensor::vector({1, 0, 1});
    const ad::Var loss = ad::masked_squared_error(pred, target, mask);
    EXPECT_DOUBLE_EQ(tape.value(loss).item(), (1.0 + 4.0) / 2.0);
    const ad::GradientMap g = tape.backward(loss);
    EXPECT_EQ(g[pred], Tensor::vector({1, 0, 2}));
    ad::Var none = ad::masked_squared_error(pred, target, Tensor::vector({0, 0, 0}));
    EXPECT_EQ(tape.value(none).item(), 0.0);
}

TEST(GradCheck, LinearModelIsExact) {
    Rng rng(4);
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor::normal({4, 3}, rng));
    ad::Var w = tape.variable(Tensor::normal({3, 2}, rng));
    ad::Var b = tape.variable(Tensor::normal({2}, rng));
    ad::Var root = ad::sum(ad::add(ad::matmul(x, w), b));
    const ad::GradCheckReport r = ad::gradient_check(tape, root, 1e-5, 1e-8);
    EXPECT_TRUE(r.passed);
    EXPECT_LT(r.max_relative_error, 1e-8);
    EXPECT_EQ(r.checked, 12u + 6u + 2u);
}

TEST(GradCheck, ThreeLayerNetworkMatchesFiniteDifferences) {
    Rng rng(8);
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor::normal({5, 3}, rng));
    ad::Var w1 = tape.variable(Tensor::normal({3, 6}, rng, 0.7));
    ad::Var w2 = tape.variable(Tensor::normal({6, 4}, rng, 0.7));
    ad::Var w3 = tape.variable(Tensor::normal({4, 3}, rng, 0.7));
    ad::Var h = ad::activation(ad::matmul(x, w1), Activation::tanh);
    h = ad::activation(ad::matmul(h, w2), Activation::elu);
    h = ad::activation(ad::matmul(h, w3), Activation::sigmoid);
    const std::vector<std::size_t> labels{0, 2, 1, 1, 0};
    ad::Var loss = ad::softmax_cross_entropy(h, labels);
    const ad::GradCheckReport r = ad::gradient_check(tape, loss, 1e-5, 1e-4);
    EXPECT_TRUE(r.passed) << r.max_relative_error;
    EXPECT_LT(r.max_relative_error, 1e-4);
    EXPECT_EQ(r.excluded, 0u);
}

TEST(GradCheck, ElementwisePrimitives) {
    Rng rng(12);
    ad::Tape tape;
    ad::Var a = tape.variable(Tensor::uniform({3, 4}, rng, 0.5, 2.0));
    ad::Var b = tape.variable(Tensor::uniform({4}, rng, 0.5, 2.0));
    ad::Var e = ad::div(ad::mul(a, b), ad::add_scalar(ad::sqrt(a), 1.0));
    e = ad::sub(e, ad::neg(ad::clamp_min(b, 1.0)));
    e = ad::swap_last_axes(ad::reshape(e, {2, 6, 1}));
    ad::Var root = ad::mean(ad::activation(e, Activation::tanh));
    const ad::GradCheckReport r = ad::gradient_check(tape, root, 1e-5, 1e-4);
    EXPECT_TRUE(r.passed) << r.max_relative_error;
}

TEST(GradCheck, TiePointIsExcluded) {
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor({1, 2, 1}, {1, 1}));
    const std::vector<std::size_t> cards{2};
    ad::Var root = ad::sum(ad::set_reduce(x, cards, ReduceKind::max));
    const ad::GradCheckReport r = ad::gradient_check(tape, root, 1e-5, 1e-4);
    EXPECT_GE(r.excluded, 1u);
    EXPECT_TRUE(r.passed);
}

TEST(GradCheck, RejectsNonPositiveStep) {
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor::scalar(1.0));
    EXPECT_THROW(ad::gradient_check(tape, ad::mul(x, x), 0.0, 1e-4), ContractError);
}

TEST(Tape, MaskRowsZeroesPadding) {
    ad::Tape tape;
    ad::Var x = tape.variable(Tensor({2, 2, 1}, {1, 2, 3, 4}));
    const std::vector<std::size_t> cards{1, 2};
    EXPECT_EQ(tape.value(ad::mask_rows(x, cards)), Tensor({2, 2, 1}, {1, 0, 3, 4}));
    const std::vector<std::size_t> empty{0, 2};
    EXPECT_THROW(ad::mask_rows(x, empty), EmptyReductionError);
    const std::vector<std::size_t> too_many{3, 2};
    EXPECT_THROW(ad::mask_rows(x, too_many), DimensionError);
}

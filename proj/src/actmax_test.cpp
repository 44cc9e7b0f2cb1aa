#include <gtest/gtest.h>

#include "setnet/error.hpp"
#include "setnet/train.hpp"

using namespace setnet;
using namespace setnet::train;

namespace {

SetModel small_model() {
    Rng rng(101);
    PointCloudModelOptions o;
    o.widths = {6, 4};
    o.classes = 2;
    return build_pointcloud_model(o, rng);
}

}  // namespace

TEST(ActMax, ZeroBudgetKeepsInitialCloud) {
    const SetModel m = small_model();
    ActMaxOptions o;
    o.points = 12;
    o.budget = 0;
    Rng a(5), b(5);
    const ActMaxResult r = activation_maximization(m, o, a);
    EXPECT_EQ(r.points, Tensor::uniform(Shape{12, 3}, b, -1.0, 1.0));
    EXPECT_EQ(r.iterations, 0u);
    EXPECT_TRUE(r.history.empty());
}

TEST(ActMax, ActivationRises) {
    const SetModel m = small_model();
    ActMaxOptions o;
    o.layer = 1;
    o.unit = 2;
    o.points = 20;
    o.budget = 300;
    Rng rng(6);
    const ActMaxResult r = activation_maximization(m, o, rng);
    ASSERT_EQ(r.history.size(), 300u);
    EXPECT_EQ(r.points.shape(), (Shape{20, 3}));
    EXPECT_GT(r.activation, r.history.front());
    EXPECT_EQ(r.success, r.activation > o.threshold);
}

TEST(ActMax, RejectsBadTargets) {
    const SetModel m = small_model();
    Rng rng(7);
    ActMaxOptions o;
    o.points = 10;
    o.budget = 1;
    o.layer = 2;
    EXPECT_THROW(activation_maximization(m, o, rng), ContractError);
    o.layer = 1;
    o.unit = 4;
    EXPECT_THROW(activation_maximization(m, o, rng), ContractError);
    o.unit = 0;
    o.points = 1;
    EXPECT_THROW(activation_maximization(m, o, rng), ContractError);
}

TEST(ActMax, MonotoneUnitRisesEveryStep) {
    SetModel m;
    Stage s;
    s.kind = Stage::Kind::equivariant;
    s.equivariant = {EquivariantVariant::channel_full, Aggregate::sum, Tensor({3, 1}, {0.5, -1.0, 0.25}),
                     Tensor({3, 1}, 0.0), {}, Activation::tanh};
    m.stages.push_back(s);
    ActMaxOptions o;
    o.points = 8;
    o.budget = 200;
    Rng rng(8);
    const ActMaxResult r = activation_maximization(m, o, rng);
    for (std::size_t i = 1; i < r.history.size(); ++i) ASSERT_GT(r.history[i], r.history[i - 1]) << i;
    EXPECT_GT(r.activation, r.history.back());
    EXPECT_TRUE(r.success);
}

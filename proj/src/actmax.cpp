#include "setnet/error.hpp"
#include "setnet/train.hpp"

namespace setnet::train {

namespace {

/// Mean over points of one unit of one equivariant stage, with its gradient
/// with respect to the input coordinates.
std::pair<double, Tensor> unit_response(const SetModel& model, const ActMaxOptions& o, const Tensor& x) {
    ad::Tape tape;
    ParamBinder binder(tape, false);
    ad::Var in = tape.variable(x.reshaped({1, x.dim(0), 3}), "points");
    std::vector<ad::Var> taps;
    ForwardOptions fo;
    fo.taps = &taps;
    const std::vector<std::size_t> cards{x.dim(0)};
    model.forward(binder, in, cards, fo);
    if (o.layer >= taps.size()) {
        throw ContractError("model has " + std::to_string(taps.size()) + " equivariant stages, layer " +
                            std::to_string(o.layer) + " requested");
    }
    ad::Var act = taps[o.layer];
    const std::size_t K = act.shape()[2];
    if (o.unit >= K) {
        throw ContractError("layer " + std::to_string(o.layer) + " has " + std::to_string(K) + " units");
    }
    Tensor selector(Shape{1, 1, K});
    selector[o.unit] = 1.0 / static_cast<double>(x.dim(0));
    ad::Var objective = ad::sum(ad::mul(act, tape.constant(std::move(selector))));
    const ad::GradientMap grads = tape.backward(objective);
    return {objective.value().item(), grads[in].reshaped({x.dim(0), 3})};
}

}  // namespace

ActMaxResult activation_maximization(const SetModel& model, const ActMaxOptions& o, Rng& rng) {
    if (o.points < 2) throw ContractError("activation maximisation needs at least 2 points");
    ActMaxResult r;
    r.points = Tensor::uniform(Shape{o.points, 3}, rng, -1.0, 1.0);

    OptimizerConfig oc;
    oc.kind = OptimizerKind::adamax;
    oc.learning_rate = o.learning_rate;
    oc.beta1 = o.beta1;
    oc.beta2 = o.beta2;
    Optimizer opt(oc);

    for (std::size_t it = 0; it < o.budget; ++it) {
        auto [value, grad] = unit_response(model, o, r.points);
        r.history.push_back(value);
        Tensor ascent = scale(grad, -1.0);
        Tensor* params[] = {&r.points};
        const Tensor* grads[] = {&ascent};
        opt.step(params, grads);
        r.iterations = it + 1;
    }
    r.activation = unit_response(model, o, r.points).first;
    r.success = r.activation > o.threshold;
    return r;
}

}  // namespace setnet::train

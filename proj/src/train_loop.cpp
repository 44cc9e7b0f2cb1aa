#include <chrono>
#include <cmath>
#include <ostream>

#include "setnet/error.hpp"
#include "setnet/text.hpp"
#include "setnet/train.hpp"

namespace setnet::train {

double scatter_metric(std::span<const double> z_pred, std::span<const double> z_spec) {
    if (z_pred.empty()) throw ContractError("scatter needs at least one member");
    if (z_pred.size() != z_spec.size()) throw ContractError("scatter inputs differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < z_pred.size(); ++i) {
        if (!(z_spec[i] > -1.0)) throw ContractError("scatter needs z_spec > -1");
        total += std::abs(z_spec[i] - z_pred[i]) / (1.0 + z_spec[i]);
    }
    return total / static_cast<double>(z_pred.size());
}

std::string format_metrics(const MetricsRecord& r) {
    std::string line = "epoch=" + std::to_string(r.epoch) + " split=" + r.split +
                       " loss=" + format_double(r.loss);
    if (r.accuracy) line += " accuracy=" + format_double(*r.accuracy);
    if (r.scatter) line += " scatter=" + format_double(*r.scatter);
    return line;
}

bool higher_is_better(Experiment e) noexcept { return e != Experiment::setregression; }

namespace {

struct RegressionTargets {
    Tensor target;  // [B, N, 1]
    Tensor mask;    // [B, N, 1]
    double labeled = 0.0;
};

RegressionTargets regression_targets(const data::LabeledSetDataset& ds,
                                     std::span<const std::size_t> indices, std::size_t n_max) {
    RegressionTargets t{Tensor(Shape{indices.size(), n_max, 1}), Tensor(Shape{indices.size(), n_max, 1}), 0.0};
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto& z = ds.targets[indices[b]];
        const auto& has = ds.labeled[indices[b]];
        for (std::size_t m = 0; m < z.size(); ++m) {
            t.target[b * n_max + m] = z[m];
            t.mask[b * n_max + m] = has[m] ? 1.0 : 0.0;
            t.labeled += has[m] ? 1.0 : 0.0;
        }
    }
    return t;
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t C = logits.dim(1);
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
        if (logits[row * C + c] > logits[row * C + best]) best = c;
    return best;
}

std::vector<std::size_t> batch_indices(std::span<const std::size_t> order, std::size_t start,
                                       std::size_t batch) {
    const std::size_t end = std::min(order.size(), start + batch);
    return {order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end)};
}

void store_optimizer(Checkpoint& ckpt, const Optimizer& opt,
                     const std::vector<std::pair<std::string, const Tensor*>>& params) {
    ckpt.set_meta("optimizer_steps", std::to_string(opt.steps()));
    const auto& m = opt.first_moments();
    const auto& v = opt.second_moments();
    for (std::size_t i = 0; i < m.size() && i < params.size(); ++i) {
        ckpt.tensors.push_back({"opt.m." + params[i].first, m[i]});
    }
    for (std::size_t i = 0; i < v.size() && i < params.size(); ++i) {
        ckpt.tensors.push_back({"opt.v." + params[i].first, v[i]});
    }
}

void restore_optimizer(const Checkpoint& ckpt, Optimizer& opt,
                       const std::vector<std::pair<std::string, const Tensor*>>& params) {
    auto steps_text = ckpt.meta_value("optimizer_steps");
    if (!steps_text) throw FormatError("checkpoint has no optimizer state");
    auto steps = parse_integer(*steps_text);
    if (!steps || *steps < 0) throw FormatError("checkpoint optimizer_steps is malformed");
    std::vector<Tensor> m, v;
    for (const auto& [name, t] : params) {
        if (const Tensor* mt = ckpt.find("opt.m." + name)) m.push_back(*mt);
        if (const Tensor* vt = ckpt.find("opt.v." + name)) v.push_back(*vt);
    }
    opt.restore(static_cast<std::uint64_t>(*steps), std::move(m), std::move(v));
}

std::size_t meta_count(const Checkpoint& ckpt, const std::string& key) {
    auto text = ckpt.meta_value(key);
    auto v = text ? parse_integer(*text) : std::nullopt;
    if (!v || *v < 0) throw FormatError("checkpoint meta " + key + " missing or malformed");
    return static_cast<std::size_t>(*v);
}

double meta_real(const Checkpoint& ckpt, const std::string& key) {
    auto text = ckpt.meta_value(key);
    auto v = text ? parse_double(*text) : std::nullopt;
    if (!v) throw FormatError("checkpoint meta " + key + " missing or malformed");
    return *v;
}

void attach_config(Checkpoint& ckpt, const ExperimentConfig& config) {
    for (const auto& [k, v] : to_values(config)) ckpt.set_meta("config." + k, v);
}

}  // namespace

Evaluation evaluate(const SetModel& model, const PreparedData& prepared,
                    const data::LabeledSetDataset& ds, std::size_t batch) {
    if (ds.size() == 0) throw ContractError("cannot evaluate an empty dataset");
    if (batch == 0) throw ContractError("evaluation batch must be positive");
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    Evaluation ev;
    double loss_total = 0.0, weight = 0.0;
    std::size_t correct = 0;
    std::vector<double> z_pred, z_spec;
    for (std::size_t start = 0; start < order.size(); start += batch) {
        const auto idx = batch_indices(order, start, batch);
        const SetBatch sb = data::collate(ds, idx);
        ad::Tape tape;
        ParamBinder binder(tape, false);
        ad::Var out = model.forward(binder, tape.constant(sb.values), sb.cardinalities);
        if (ds.task == data::Task::classification) {
            std::vector<std::size_t> labels;
            for (auto i : idx) labels.push_back(ds.labels[i]);
            loss_total += ad::softmax_cross_entropy(out, labels).value().item() * static_cast<double>(idx.size());
            weight += static_cast<double>(idx.size());
            for (std::size_t b = 0; b < idx.size(); ++b) {
                const std::size_t p = argmax_row(out.value(), b);
                ev.predictions.push_back(p);
                correct += p == labels[b];
            }
        } else {
            const std::size_t n_max = sb.max_members();
            const RegressionTargets t = regression_targets(ds, idx, n_max);
            loss_total += ad::masked_squared_error(out, t.target, t.mask).value().item() * t.labeled;
            weight += t.labeled;
            for (std::size_t b = 0; b < idx.size(); ++b) {
                for (std::size_t m = 0; m < sb.cardinalities[b]; ++m) {
                    if (!ds.labeled[idx[b]][m]) continue;
                    const double scale = prepared.target_scale, shift = prepared.target_mean;
                    z_pred.push_back(out.value()[b * n_max + m] * scale + shift);
                    z_spec.push_back(ds.targets[idx[b]][m] * scale + shift);
                }
            }
        }
    }
    ev.loss = weight > 0.0 ? loss_total / weight : 0.0;
    if (ds.task == data::Task::classification) {
        ev.metric = static_cast<double>(correct) / static_cast<double>(ds.size());
    } else {
        ev.metric = scatter_metric(z_pred, z_spec);
    }
    return ev;
}

TrainResult train_loop(const ExperimentConfig& config, SetModel& model, const PreparedData& prepared,
                       const TrainOptions& options) {
    const auto& train_ds = prepared.train;
    if (train_ds.size() == 0) throw ContractError("training dataset is empty");
    if (prepared.val.size() == 0) throw ContractError("validation dataset is empty");
    const bool classification = train_ds.task == data::Task::classification;
    const bool higher = higher_is_better(config.experiment);
    const auto named = model.parameters();
    std::vector<Tensor*> params = model.mutable_parameters();

    Optimizer opt(config.optim);
    TrainResult result;
    std::size_t first_epoch = 1;
    bool have_best = false;
    if (options.resume) {
        const Checkpoint ckpt = load_checkpoint(*options.resume);
        model.load(ckpt);
        restore_optimizer(ckpt, opt, named);
        first_epoch = meta_count(ckpt, "epoch") + 1;
        result.best_epoch = meta_count(ckpt, "best_epoch");
        result.best_metric = meta_real(ckpt, "best_metric");
        have_best = result.best_epoch > 0;
    }

    const std::size_t last_epoch =
        options.stop_after ? std::min(options.stop_after, config.epochs) : config.epochs;
    for (std::size_t epoch = first_epoch; epoch <= last_epoch; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        Rng rng(derive_seed(config.seed, 1000 + epoch));
        const Permutation order = Permutation::random(train_ds.size(), rng);

        double loss_total = 0.0, weight = 0.0;
        std::size_t correct = 0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < train_ds.size(); start += config.batch, ++batch_no) {
            const auto idx = batch_indices(order.mapping(), start, config.batch);
            SetBatch sb;
            if (prepared.augment) {
                data::LabeledSetDataset local = train_ds.subset(idx);
                for (auto& s : local.sets) s = data::augment_cloud(s, rng);
                std::vector<std::size_t> all(idx.size());
                for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                sb = data::collate(local, all);
            } else {
                sb = data::collate(train_ds, idx);
            }

            try {
                ad::Tape tape;
                ParamBinder binder(tape, true);
                ForwardOptions fo;
                fo.training = true;
                fo.rng = &rng;
                fo.observer = options.dropout_observer;
                ad::Var out = model.forward(binder, tape.constant(sb.values), sb.cardinalities, fo);
                ad::Var loss;
                double w = 0.0;
                if (classification) {
                    std::vector<std::size_t> labels;
                    for (auto i : idx) labels.push_back(train_ds.labels[i]);
                    loss = ad::softmax_cross_entropy(out, labels);
                    w = static_cast<double>(idx.size());
                    for (std::size_t b = 0; b < idx.size(); ++b) correct += argmax_row(out.value(), b) == labels[b];
                } else {
                    const RegressionTargets t = regression_targets(train_ds, idx, sb.max_members());
                    loss = ad::masked_squared_error(out, t.target, t.mask);
                    w = t.labeled;
                }
                loss_total += loss.value().item() * w;
                weight += w;

                const ad::GradientMap grads = tape.backward(loss);
                std::vector<const Tensor*> grad_ptrs;
                grad_ptrs.reserve(params.size());
                for (Tensor* p : params) grad_ptrs.push_back(&grads[binder.var_of(*p)]);
                opt.step(params, grad_ptrs);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_no) + ": " + e.what());
            }
        }

        MetricsRecord train_rec;
        train_rec.epoch = epoch;
        train_rec.split = "train";
        train_rec.loss = weight > 0.0 ? loss_total / weight : 0.0;
        if (classification) train_rec.accuracy = static_cast<double>(correct) / static_cast<double>(train_ds.size());

        const Evaluation ev = evaluate(model, prepared, prepared.val, config.batch);
        MetricsRecord val_rec;
        val_rec.epoch = epoch;
        val_rec.split = "val";
        val_rec.loss = ev.loss;
        if (classification) {
            val_rec.accuracy = ev.metric;
        } else {
            val_rec.scatter = ev.metric;
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        train_rec.wall_seconds = val_rec.wall_seconds = seconds;

        if (options.metrics) {
            *options.metrics << format_metrics(train_rec) << '\n' << format_metrics(val_rec) << '\n';
            options.metrics->flush();
        }
        if (options.timing) *options.timing << "epoch=" << epoch << " seconds=" << seconds << '\n';
        result.history.push_back(train_rec);
        result.history.push_back(val_rec);
        result.epochs_run = epoch;

        const bool improved = !have_best || (higher ? ev.metric > result.best_metric : ev.metric < result.best_metric);
        if (improved) {
            have_best = true;
            result.best_epoch = epoch;
            result.best_metric = ev.metric;
        }

        if (!options.checkpoint_dir.empty()) {
            std::filesystem::create_directories(options.checkpoint_dir);
            Checkpoint ckpt = model.to_checkpoint();
            ckpt.set_meta("experiment", std::string(to_string(config.experiment)));
            ckpt.set_meta("variant", config.variant);
            ckpt.set_meta("epoch", std::to_string(epoch));
            ckpt.set_meta("val_loss", format_double(ev.loss));
            ckpt.set_meta("val_metric", format_double(ev.metric));
            attach_config(ckpt, config);
            if (improved) save_checkpoint(options.checkpoint_dir / "checkpoint_best.ckpt", ckpt);
            ckpt.set_meta("best_epoch", std::to_string(result.best_epoch));
            ckpt.set_meta("best_metric", format_double(result.best_metric));
            store_optimizer(ckpt, opt, named);
            save_checkpoint(options.checkpoint_dir / "checkpoint_last.ckpt", ckpt);
        }
    }
    return result;
}

}  // namespace setnet::train

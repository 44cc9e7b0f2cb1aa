#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "setnet/error.hpp"
#include "setnet/train.hpp"

using namespace setnet;
using namespace setnet::train;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_pointcloud(std::size_t epochs) {
    return resolve_config({{"experiment", "pointcloud"},
                           {"seed", "17"},
                           {"model.widths", "8,8"},
                           {"data.points", "16"},
                           {"data.classes", "sphere,cube"},
                           {"data.train_clouds", "40"},
                           {"data.test_clouds", "20"},
                           {"optim.lr", "0.005"},
                           {"train.batch", "8"},
                           {"train.epochs", std::to_string(epochs)}});
}

ExperimentConfig small_regression(std::size_t epochs) {
    return resolve_config({{"experiment", "setregression"},
                           {"seed", "23"},
                           {"model.widths", "8,8"},
                           {"data.clusters", "40"},
                           {"data.features", "4"},
                           {"data.min_size", "3"},
                           {"data.max_size", "9"},
                           {"train.batch", "8"},
                           {"train.epochs", std::to_string(epochs)}});
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("setnet_train_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<Tensor> snapshot(const SetModel& m) {
    std::vector<Tensor> out;
    for (const auto& [name, t] : m.parameters()) out.push_back(*t);
    return out;
}

}  // namespace

TEST(Scatter, KnownValues) {
    const std::vector<double> z{0.1, 0.4, 0.25};
    EXPECT_EQ(scatter_metric(z, z), 0.0);
    const std::vector<double> pred{0.0}, spec{1.0};
    EXPECT_DOUBLE_EQ(scatter_metric(pred, spec), 0.5);
    const std::vector<double> p2{0.2, 0.0, 1.5}, s2{0.1, 0.5, 1.0};
    const double expected = (0.1 / 1.1 + 0.5 / 1.5 + 0.5 / 2.0) / 3.0;
    EXPECT_NEAR(scatter_metric(p2, s2), expected, 1e-15);
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) sum += scatter_metric(std::span(p2).subspan(i, 1), std::span(s2).subspan(i, 1));
    EXPECT_NEAR(scatter_metric(p2, s2), sum / 3.0, 1e-15);
}

TEST(Scatter, Errors) {
    const std::vector<double> empty, one{0.1}, two{0.1, 0.2}, bad{-1.0};
    EXPECT_THROW(scatter_metric(empty, empty), ContractError);
    EXPECT_THROW(scatter_metric(one, two), ContractError);
    EXPECT_THROW(scatter_metric(one, bad), ContractError);
}

TEST(Metrics, LineFormat) {
    MetricsRecord r;
    r.epoch = 3;
    r.split = "val";
    r.loss = 0.5;
    r.accuracy = 0.25;
    r.wall_seconds = 12.0;
    EXPECT_EQ(format_metrics(r), "epoch=3 split=val loss=0.5 accuracy=0.25");
    r.accuracy.reset();
    r.scatter = 0.0125;
    EXPECT_EQ(format_metrics(r), "epoch=3 split=val loss=0.5 scatter=0.0125");
    EXPECT_TRUE(higher_is_better(Experiment::mnist_sum));
    EXPECT_FALSE(higher_is_better(Experiment::setregression));
}

TEST(TrainLoop, LossFallsAndEpochCountIsHonoured) {
    const ExperimentConfig c = small_pointcloud(8);
    const PreparedData data = prepare_data(c);
    SetModel model = build_model(c, data);
    std::ostringstream metrics, timing;
    TrainOptions o;
    o.metrics = &metrics;
    o.timing = &timing;
    const TrainResult r = train_loop(c, model, data, o);
    EXPECT_EQ(r.epochs_run, 8u);
    ASSERT_EQ(r.history.size(), 16u);
    EXPECT_LT(r.history[14].loss, r.history[0].loss);
    EXPECT_GE(r.best_epoch, 1u);
    EXPECT_GT(r.best_metric, 0.5);

    std::istringstream lines(metrics.str());
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
        EXPECT_EQ(line.find("seconds"), std::string::npos);
        ++count;
    }
    EXPECT_EQ(count, 16u);
    EXPECT_NE(timing.str().find("seconds="), std::string::npos);
}

TEST(TrainLoop, RunsAreDeterministic) {
    const ExperimentConfig c = small_regression(3);
    std::string logs[2];
    std::vector<Tensor> params[2];
    for (int i = 0; i < 2; ++i) {
        const PreparedData data = prepare_data(c);
        SetModel model = build_model(c, data);
        std::ostringstream metrics;
        TrainOptions o;
        o.metrics = &metrics;
        train_loop(c, model, data, o);
        logs[i] = metrics.str();
        params[i] = snapshot(model);
    }
    EXPECT_EQ(logs[0], logs[1]);
    EXPECT_EQ(params[0], params[1]);
    EXPECT_NE(logs[0].find("scatter="), std::string::npos);
}

TEST(TrainLoop, ResumeContinuesBitIdentically) {
    const ExperimentConfig c = small_pointcloud(4);
    const PreparedData data = prepare_data(c);

    const fs::path full_dir = scratch("full"), split_dir = scratch("split");
    SetModel full = build_model(c, data);
    std::ostringstream full_log;
    TrainOptions fo;
    fo.checkpoint_dir = full_dir;
    fo.metrics = &full_log;
    const TrainResult full_r = train_loop(c, full, data, fo);

    SetModel first = build_model(c, data);
    std::ostringstream split_log;
    TrainOptions so;
    so.checkpoint_dir = split_dir;
    so.metrics = &split_log;
    so.stop_after = 2;
    EXPECT_EQ(train_loop(c, first, data, so).epochs_run, 2u);

    SetModel resumed = build_model(c, data);
    so.stop_after = 0;
    so.resume = split_dir / "checkpoint_last.ckpt";
    const TrainResult res_r = train_loop(c, resumed, data, so);
    EXPECT_EQ(res_r.epochs_run, 4u);
    EXPECT_EQ(split_log.str(), full_log.str());
    EXPECT_EQ(snapshot(resumed), snapshot(full));
    EXPECT_EQ(res_r.best_epoch, full_r.best_epoch);
    EXPECT_EQ(res_r.best_metric, full_r.best_metric);

    const Checkpoint last = load_checkpoint(full_dir / "checkpoint_last.ckpt");
    EXPECT_EQ(last.meta_value("epoch"), "4");
    EXPECT_EQ(last.meta_value("experiment"), "pointcloud");
    EXPECT_TRUE(last.meta_value("optimizer_steps").has_value());
    EXPECT_TRUE(last.meta_value("config.model.widths").has_value());
    const Checkpoint best = load_checkpoint(full_dir / "checkpoint_best.ckpt");
    EXPECT_EQ(best.meta_value("epoch"), std::to_string(full_r.best_epoch));

    SetModel reloaded = build_model(c, data);
    reloaded.load(best);
    const Evaluation ev = evaluate(reloaded, data, data.val, c.batch);
    EXPECT_EQ(ev.metric, full_r.best_metric);

    fs::remove_all(full_dir);
    fs::remove_all(split_dir);
}

TEST(TrainLoop, DropoutMasksAreSharedAcrossMembers) {
    const ExperimentConfig c = small_regression(1);
    const PreparedData data = prepare_data(c);
    SetModel model = build_model(c, data);
    std::size_t masks = 0, violations = 0;
    const MaskObserver observer = [&](const Tensor& m) {
        ++masks;
        const std::size_t B = m.dim(0), N = m.dim(1), K = m.dim(2);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t n = 1; n < N; ++n)
                    violations += m[(b * N + n) * K + k] != m[b * N * K + k];
    };
    TrainOptions o;
    o.dropout_observer = &observer;
    train_loop(c, model, data, o);
    EXPECT_GT(masks, 0u);
    EXPECT_EQ(violations, 0u);
}

TEST(TrainLoop, RejectsEmptyData) {
    const ExperimentConfig c = small_pointcloud(1);
    PreparedData data = prepare_data(c);
    SetModel model = build_model(c, data);
    PreparedData empty = data;
    empty.val = data.val.subset({});
    EXPECT_THROW(train_loop(c, model, empty, {}), ContractError);
    EXPECT_THROW(evaluate(model, data, data.val, 0), ContractError);
}

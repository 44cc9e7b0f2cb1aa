#include <cmath>

#include "setnet/error.hpp"
#include "setnet/train.hpp"

namespace setnet::train {

namespace {

enum Stream : std::uint64_t { data_stream = 1, model_stream = 2, test_stream = 3 };

/// Per-feature standardisation with statistics from `reference` (all members).
void standardize_features(const data::LabeledSetDataset& reference,
                          std::vector<data::LabeledSetDataset*> targets) {
    const std::size_t K = reference.channels();
    std::vector<double> mean(K, 0.0), sq(K, 0.0);
    double count = 0.0;
    for (const auto& s : reference.sets) {
        for (std::size_t m = 0; m < s.dim(0); ++m)
            for (std::size_t k = 0; k < K; ++k) mean[k] += s[m * K + k];
        count += static_cast<double>(s.dim(0));
    }
    for (auto& v : mean) v /= count;
    for (const auto& s : reference.sets)
        for (std::size_t m = 0; m < s.dim(0); ++m)
            for (std::size_t k = 0; k < K; ++k) sq[k] += std::pow(s[m * K + k] - mean[k], 2);
    std::vector<double> sd(K);
    for (std::size_t k = 0; k < K; ++k) sd[k] = std::max(std::sqrt(sq[k] / count), 1e-8);
    for (auto* ds : targets)
        for (auto& s : ds->sets)
            for (std::size_t m = 0; m < s.dim(0); ++m)
                for (std::size_t k = 0; k < K; ++k) s[m * K + k] = (s[m * K + k] - mean[k]) / sd[k];
}

void standardize_targets(PreparedData& p) {
    double sum = 0.0, n = 0.0;
    for (std::size_t c = 0; c < p.train.size(); ++c)
        for (std::size_t m = 0; m < p.train.targets[c].size(); ++m)
            if (p.train.labeled[c][m]) {
                sum += p.train.targets[c][m];
                n += 1.0;
            }
    if (n < 2.0) throw DegenerateError("training split needs at least two labeled members");
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t c = 0; c < p.train.size(); ++c)
        for (std::size_t m = 0; m < p.train.targets[c].size(); ++m)
            if (p.train.labeled[c][m]) sq += std::pow(p.train.targets[c][m] - mean, 2);
    p.target_mean = mean;
    p.target_scale = std::max(std::sqrt(sq / n), 1e-8);
    for (auto* ds : {&p.train, &p.val})
        for (auto& z : ds->targets)
            for (auto& v : z) v = (v - p.target_mean) / p.target_scale;
}

PreparedData prepare_mnist(const ExperimentConfig& c, Rng& rng) {
    const DataConfig& d = c.data;
    const data::DigitImages images = d.source == "mnist" ? data::load_mnist_idx(d.mnist_images, d.mnist_labels)
                                                         : data::synth_digits(d.digits, rng);
    auto [train_pool, val_pool] = data::split_instances(images.count(), 2.0 / 3.0, rng);
    PreparedData p;
    p.train = data::build_sum_sets(images, d.set_size, d.train_sets, rng, train_pool);
    p.val = data::build_sum_sets(images, d.set_size, d.val_sets, rng, val_pool);
    return p;
}

PreparedData prepare_pointcloud(const ExperimentConfig& c, Rng& rng) {
    const DataConfig& d = c.data;
    PreparedData p;
    if (d.source == "off") {
        p.train = data::load_mesh_dataset(d.mesh_list, d.points, rng);
        p.val = data::load_mesh_dataset(d.mesh_test_list, d.points, rng);
        const std::size_t classes = std::max(p.train.num_classes, p.val.num_classes);
        p.train.num_classes = p.val.num_classes = classes;
    } else {
        p.train = data::synth_shapes(d.classes, d.points, d.train_clouds, rng);
        Rng test_rng(derive_seed(c.seed, test_stream));
        p.val = data::synth_shapes(d.classes, d.points, d.test_clouds, test_rng);
    }
    p.augment = d.augment;
    return p;
}

PreparedData prepare_regression(const ExperimentConfig& c, Rng& rng) {
    const DataConfig& d = c.data;
    data::LabeledSetDataset all;
    if (d.source == "csv") {
        data::CatalogColumns cols = data::default_catalog_columns(d.clusters.features);
        cols.id_column = d.csv_id;
        if (!d.csv_features.empty()) cols.feature_columns = d.csv_features;
        cols.label_column = d.csv_label;
        cols.mask_column = d.csv_mask;
        all = data::load_cluster_catalog(d.csv, cols);
    } else {
        data::ClusterSynthOptions o = d.clusters;
        all = data::synth_clusters(o, rng);
    }
    if (all.size() < 2) throw DegenerateError("need at least two clusters to split");
    auto [train_idx, val_idx] = data::split_instances(all.size(), 1.0 - d.val_fraction, rng);
    if (train_idx.empty() || val_idx.empty()) throw DegenerateError("cluster split left one side empty");
    PreparedData p;
    p.train = all.subset(train_idx);
    p.val = all.subset(val_idx);
    const data::LabeledSetDataset reference = p.train;
    standardize_features(reference, {&p.train, &p.val});
    standardize_targets(p);
    return p;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, data_stream));
    PreparedData p;
    switch (config.experiment) {
        case Experiment::mnist_sum: p = prepare_mnist(config, rng); break;
        case Experiment::pointcloud: p = prepare_pointcloud(config, rng); break;
        case Experiment::setregression: p = prepare_regression(config, rng); break;
    }
    p.train.validate();
    p.val.validate();
    return p;
}

SetModel build_model(const ExperimentConfig& config, const PreparedData& prepared) {
    Rng rng(derive_seed(config.seed, model_stream));
    switch (config.experiment) {
        case Experiment::mnist_sum: {
            MnistModelOptions o;
            o.set_size = config.data.set_size;
            o.pixels = prepared.train.channels();
            const auto& w = config.widths;
            o.encoder_width = w[0];
            o.set_width = w.size() > 1 ? w[1] : w[0];
            o.head_width = w.size() > 2 ? w[2] : o.set_width;
            o.activation = config.activation;
            o.pool = config.pool.kind;
            o.dropout = config.dropout;
            return build_mnist_model(parse_mnist_variant(config.variant), o, rng);
        }
        case Experiment::pointcloud: {
            PointCloudModelOptions o;
            o.widths = config.widths;
            o.classes = prepared.train.num_classes;
            o.activation = config.activation;
            o.layer = config.layer;
            o.pool = config.pool.kind;
            o.dropout = config.dropout;
            return build_pointcloud_model(o, rng);
        }
        case Experiment::setregression: {
            RegressionModelOptions o;
            o.features = prepared.train.channels();
            o.widths = config.widths;
            o.activation = config.activation;
            o.layer = config.layer;
            o.aggregate = config.aggregate;
            o.dropout = config.dropout;
            if (config.variant == "equivariant") return build_regression_model(o, rng);
            Rng sizing(0);
            const std::size_t target = build_regression_model(o, sizing).parameter_count();
            return build_member_mlp(o, target, rng);
        }
    }
    throw ConfigError("unknown experiment");
}

theorem::SetFunction as_set_function(const SetModel& model) {
    return [&model](const Tensor& x) {
        if (x.rank() != 2) throw DimensionError("set function expects [n, K]");
        const std::size_t n = x.dim(0), K = x.dim(1);
        Tensor out = model.predict(SetBatch::full(x.reshaped({1, n, K})));
        if (out.rank() == 3) return out.reshaped({n, out.dim(2)});
        return out.reshaped({out.size()});
    };
}

}  // namespace setnet::train

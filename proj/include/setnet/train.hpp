#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "setnet/checkpoint.hpp"
#include "setnet/data.hpp"
#include "setnet/layers.hpp"
#include "setnet/optim.hpp"
#include "setnet/theorem.hpp"

namespace setnet::train {

enum class Experiment { mnist_sum, pointcloud, setregression };
std::string_view to_string(Experiment e) noexcept;
Experiment parse_experiment(std::string_view s);

// ---------------------------------------------------------------------------
// Configuration

/// Flat `key=value` text, '#' starts a comment. Keys carry their section as a
/// dotted prefix ("optim.lr").
using ConfigValues = std::map<std::string, std::string>;

struct ConfigKey {
    std::string key;
    /// "auto" means the value depends on the experiment.
    std::string default_value;
    std::string help;
};

/// Every recognised key, in the order they are written out.
std::span<const ConfigKey> config_keys();
bool is_config_key(std::string_view key);

/// Throws ConfigError on malformed lines, unknown or repeated keys.
ConfigValues parse_config(std::istream& is, const std::string& source = "config");
ConfigValues load_config(const std::filesystem::path& path);

struct DataConfig {
    std::string source = "synthetic";  // synthetic | mnist | off | csv

    // mnist_sum
    std::filesystem::path mnist_images;
    std::filesystem::path mnist_labels;
    std::size_t digits = 6000;  // synthetic digit images
    std::size_t set_size = 3;
    std::size_t train_sets = 2000;
    std::size_t val_sets = 1000;

    // pointcloud
    std::size_t points = 100;
    std::size_t train_clouds = 400;
    std::size_t test_clouds = 200;
    std::vector<data::ShapeClass> classes;
    std::filesystem::path mesh_list;
    std::filesystem::path mesh_test_list;
    bool augment = true;

    // setregression
    std::filesystem::path csv;
    std::string csv_id = "cluster_id";
    std::vector<std::string> csv_features;
    std::string csv_label = "z_spec";
    std::string csv_mask = "has_spec";
    data::ClusterSynthOptions clusters;
    double val_fraction = 0.1;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::mnist_sum;
    std::uint64_t seed = 1;

    std::string variant;
    std::vector<std::size_t> widths;
    Activation activation = Activation::elu;
    PoolSpec pool;
    EquivariantVariant layer = EquivariantVariant::channel_factored;
    Aggregate aggregate = Aggregate::max;
    DropoutSpec dropout;
    OptimizerConfig optim;
    std::size_t batch = 32;
    std::size_t epochs = 30;
    DataConfig data;
    std::filesystem::path output_dir = "runs/default";

    /// Throws ConfigError when a budget is zero or the variant does not fit
    /// the experiment.
    void validate() const;
};

/// Fills defaults (experiment-specific where "auto"), parses and validates.
ExperimentConfig resolve_config(const ConfigValues& values);
/// Every key with its concrete value; resolve_config(to_values(c)) == c.
ConfigValues to_values(const ExperimentConfig& config);
void write_config(std::ostream& os, const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Models

struct ForwardOptions {
    bool training = false;
    Rng* rng = nullptr;
    const MaskObserver* observer = nullptr;
    /// Receives the output of every equivariant stage, in order.
    std::vector<ad::Var>* taps = nullptr;
};

struct Stage {
    enum class Kind { normalize, equivariant, dense, pool, dropout, flatten, swap_axes };
    Kind kind = Kind::dense;
    EquivariantLayer equivariant;
    DenseLayer dense;
    PoolSpec pool;
    DropoutSpec dropout;
};

/// A feed-forward stack over [B, N, K] set batches producing either set-level
/// logits [B, C] or per-member outputs [B, N, C].
class SetModel {
public:
    std::string name;
    std::vector<Stage> stages;

    ad::Var forward(ParamBinder& binder, ad::Var x, std::span<const std::size_t> cardinalities,
                    const ForwardOptions& options = {}) const;
    /// Evaluation-mode forward pass on plain tensors.
    Tensor predict(const SetBatch& batch) const;

    /// Stable names "s<stage>.<field>".
    std::vector<std::pair<std::string, const Tensor*>> parameters() const;
    std::vector<Tensor*> mutable_parameters();
    std::size_t parameter_count() const;
    std::size_t equivariant_stage_count() const;
    bool per_member_output() const;

    Checkpoint to_checkpoint() const;
    /// Throws FormatError when a tensor is missing or has the wrong shape.
    void load(const Checkpoint& ckpt);
};

enum class MnistVariant { I, II, III, IV };
std::string_view to_string(MnistVariant v) noexcept;
MnistVariant parse_mnist_variant(std::string_view s);

struct MnistModelOptions {
    std::size_t set_size = 3;
    std::size_t pixels = 784;
    /// III/IV: instance encoder, per-member layer before pooling, dense
    /// layer after pooling. I/II share the last one.
    std::size_t encoder_width = 128;
    std::size_t set_width = 128;
    std::size_t head_width = 128;
    /// Channels per pixel after mixing the stacked images in II.
    std::size_t mix_channels = 3;
    Activation activation = Activation::elu;
    ReduceKind pool = ReduceKind::sum;
    DropoutSpec dropout{0.2, true};
};

/// I: concatenated images -> MLP. II: images stacked as per-pixel channels,
/// mixed, flattened -> MLP. III: shared encoder -> set pooling -> dense.
/// IV: shared encoder -> channel_factored layer -> set pooling -> dense.
/// Every variant ends in a (9n + 1)-way linear output; I and II size their
/// first hidden layer so the parameter count lands next to III/IV.
SetModel build_mnist_model(MnistVariant variant, const MnistModelOptions& options, Rng& rng);

struct PointCloudModelOptions {
    std::vector<std::size_t> widths{64, 64, 64};
    std::size_t classes = 4;
    Activation activation = Activation::tanh;
    EquivariantVariant layer = EquivariantVariant::channel_factored;
    ReduceKind pool = ReduceKind::max;
    DropoutSpec dropout{0.5, true};
};

/// normalize -> equivariant stack -> set pooling -> dropout -> dense -> logits.
SetModel build_pointcloud_model(const PointCloudModelOptions& options, Rng& rng);

struct RegressionModelOptions {
    std::size_t features = 17;
    std::vector<std::size_t> widths{64, 64, 64};
    Activation activation = Activation::tanh;
    EquivariantVariant layer = EquivariantVariant::channel_full;
    Aggregate aggregate = Aggregate::mean;
    DropoutSpec dropout{0.5, true};
};

/// Equivariant stack with a final linear single-channel layer; one output per
/// member and no pooling.
SetModel build_regression_model(const RegressionModelOptions& options, Rng& rng);
/// Per-member MLP of the same depth whose hidden width is chosen so that its
/// parameter count matches `target_parameters` as closely as possible.
SetModel build_member_mlp(const RegressionModelOptions& options, std::size_t target_parameters,
                          Rng& rng);

// ---------------------------------------------------------------------------
// Training

/// mean over members of |z_spec - z| / (1 + z_spec).
double scatter_metric(std::span<const double> z_pred, std::span<const double> z_spec);

/// Train/validation datasets ready for the model. Regression targets are
/// standardised; `target_mean` and `target_scale` undo that for reporting.
struct PreparedData {
    data::LabeledSetDataset train;
    data::LabeledSetDataset val;
    bool augment = false;
    double target_mean = 0.0;
    double target_scale = 1.0;
};

struct MetricsRecord {
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    std::optional<double> accuracy;
    std::optional<double> scatter;
    double wall_seconds = 0.0;
};

/// `epoch=.. split=.. loss=.. accuracy=..` (or scatter=..). Wall time is left
/// out so logs of identical runs compare byte for byte.
std::string format_metrics(const MetricsRecord& record);

struct Evaluation {
    double loss = 0.0;
    /// Accuracy for classification, scatter for regression.
    double metric = 0.0;
    std::vector<std::size_t> predictions;  // classification only
};

Evaluation evaluate(const SetModel& model, const PreparedData& prepared,
                    const data::LabeledSetDataset& ds, std::size_t batch);

struct TrainOptions {
    /// Checkpoints go here when non-empty.
    std::filesystem::path checkpoint_dir;
    std::ostream* metrics = nullptr;
    std::ostream* timing = nullptr;
    /// checkpoint_last from an earlier run of the same config.
    std::optional<std::filesystem::path> resume;
    /// Stop after this epoch (0 = run all configured epochs).
    std::size_t stop_after = 0;
    const MaskObserver* dropout_observer = nullptr;
};

struct TrainResult {
    std::vector<MetricsRecord> history;
    std::size_t best_epoch = 0;
    double best_metric = 0.0;
    std::size_t epochs_run = 0;
};

/// Shuffled mini-batch epochs. Every random draw of epoch e derives from
/// (seed, e), so a run resumed from checkpoint_last continues bit-identically.
/// A non-finite loss or gradient aborts with NumericError naming the step.
TrainResult train_loop(const ExperimentConfig& config, SetModel& model, const PreparedData& prepared,
                       const TrainOptions& options);

bool higher_is_better(Experiment e) noexcept;

// ---------------------------------------------------------------------------
// Experiments

PreparedData prepare_data(const ExperimentConfig& config);
SetModel build_model(const ExperimentConfig& config, const PreparedData& prepared);

/// Wraps a model as a black-box function on one set [n, K]: per-member output
/// for per-member models, logits otherwise.
theorem::SetFunction as_set_function(const SetModel& model);

// ---------------------------------------------------------------------------
// Activation maximisation

struct ActMaxOptions {
    std::size_t layer = 0;  // equivariant stage index
    std::size_t unit = 0;
    std::size_t points = 100;
    std::size_t budget = 10000;
    double learning_rate = 0.01;
    double beta1 = 0.1;
    double beta2 = 0.9;
    /// A run succeeds when the mean activation exceeds this.
    double threshold = 0.5;
};

struct ActMaxResult {
    Tensor points;  // [m, 3]
    double activation = 0.0;
    bool success = false;
    std::size_t iterations = 0;
    std::vector<double> history;  // activation before each step
};

/// Adamax ascent on the coordinates of a uniform [-1, 1]^3 initial cloud to
/// raise the mean (over points) output of one unit of an equivariant stage.
ActMaxResult activation_maximization(const SetModel& model, const ActMaxOptions& options, Rng& rng);

}  // namespace setnet::train

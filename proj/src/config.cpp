#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "setnet/error.hpp"
#include "setnet/text.hpp"
#include "setnet/train.hpp"

namespace setnet::train {

std::string_view to_string(Experiment e) noexcept {
    switch (e) {
        case Experiment::mnist_sum: return "mnist_sum";
        case Experiment::pointcloud: return "pointcloud";
        case Experiment::setregression: return "setregression";
    }
    return "unknown";
}

Experiment parse_experiment(std::string_view s) {
    for (auto e : {Experiment::mnist_sum, Experiment::pointcloud, Experiment::setregression})
        if (s == to_string(e)) return e;
    throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

namespace {

const std::vector<ConfigKey> keys = {
    {"experiment", "mnist_sum", "mnist_sum | pointcloud | setregression"},
    {"seed", "1", "single seed every random draw derives from"},
    {"model.variant", "auto", "I | II | III | IV (mnist_sum), equivariant (pointcloud), equivariant | mlp (setregression)"},
    {"model.widths", "auto", "comma-separated hidden widths"},
    {"model.activation", "auto", "identity | tanh | elu | sigmoid"},
    {"model.pool", "auto", "set pooling: sum | max | mean"},
    {"model.layer", "auto", "equivariant layer: channel_full | channel_factored"},
    {"model.aggregate", "auto", "channel_full set aggregate: sum | max | mean"},
    {"dropout.rate", "auto", "dropout rate in [0, 1)"},
    {"dropout.simultaneous", "true", "share one mask per (set, channel) across members"},
    {"optim.kind", "auto", "sgd | adam | adamax"},
    {"optim.lr", "auto", "learning rate"},
    {"optim.beta1", "0.9", "first moment decay"},
    {"optim.beta2", "0.999", "second moment decay"},
    {"optim.eps", "1e-08", "Adam stabiliser"},
    {"optim.clip", "0", "global gradient norm clip, 0 disables"},
    {"train.batch", "auto", "sets per mini-batch"},
    {"train.epochs", "auto", "training epochs"},
    {"data.source", "synthetic", "synthetic | mnist | off | csv"},
    {"data.mnist_images", "", "IDX image file (source=mnist)"},
    {"data.mnist_labels", "", "IDX label file (source=mnist)"},
    {"data.digits", "6000", "synthetic digit images to render"},
    {"data.set_size", "3", "images per set"},
    {"data.train_sets", "2000", "training sets"},
    {"data.val_sets", "1000", "validation sets"},
    {"data.points", "100", "points per cloud"},
    {"data.train_clouds", "400", "synthetic training clouds"},
    {"data.test_clouds", "200", "synthetic test clouds"},
    {"data.classes", "sphere,cube,cylinder,torus", "synthetic shape classes"},
    {"data.mesh_list", "", "training list of '<off path> <label>' lines (source=off)"},
    {"data.mesh_test_list", "", "test list of '<off path> <label>' lines (source=off)"},
    {"data.augment", "true", "random z-rotation and scaling of training clouds"},
    {"data.csv", "", "cluster catalog (source=csv)"},
    {"data.csv_id", "cluster_id", "catalog set id column"},
    {"data.csv_features", "", "catalog feature columns, empty means f0..f{features-1}"},
    {"data.csv_label", "z_spec", "catalog target column"},
    {"data.csv_mask", "has_spec", "catalog label availability column"},
    {"data.clusters", "500", "synthetic clusters"},
    {"data.min_size", "10", "smallest synthetic cluster"},
    {"data.max_size", "40", "largest synthetic cluster"},
    {"data.features", "17", "synthetic features per member"},
    {"data.labeled_fraction", "0.3", "fraction of members with a target"},
    {"data.noise", "1", "synthetic feature noise"},
    {"data.val_fraction", "0.1", "held-out fraction of clusters"},
    {"output.dir", "runs/default", "directory for config, metrics, checkpoints and dumps"},
};

struct ExperimentDefaults {
    const char* variant;
    const char* widths;
    const char* activation;
    const char* pool;
    const char* layer;
    const char* aggregate;
    const char* dropout;
    const char* optim;
    const char* lr;
    const char* batch;
    const char* epochs;
};

ExperimentDefaults defaults_for(Experiment e) {
    switch (e) {
        case Experiment::mnist_sum:
            return {"IV", "128", "elu", "sum", "channel_factored", "max", "0.2", "adam", "0.005", "32", "30"};
        case Experiment::pointcloud:
            return {"equivariant", "64,64,64", "tanh", "max", "channel_factored", "max", "0.5",
                    "adamax", "0.001", "32", "40"};
        case Experiment::setregression:
            return {"equivariant", "64,64,64", "tanh", "mean", "channel_full", "mean", "0.2",
                    "adam", "0.001", "16", "60"};
    }
    throw ConfigError("unknown experiment");
}

std::string auto_value(const ExperimentDefaults& d, const std::string& key) {
    if (key == "model.variant") return d.variant;
    if (key == "model.widths") return d.widths;
    if (key == "model.activation") return d.activation;
    if (key == "model.pool") return d.pool;
    if (key == "model.layer") return d.layer;
    if (key == "model.aggregate") return d.aggregate;
    if (key == "dropout.rate") return d.dropout;
    if (key == "optim.kind") return d.optim;
    if (key == "optim.lr") return d.lr;
    if (key == "train.batch") return d.batch;
    if (key == "train.epochs") return d.epochs;
    throw ConfigError("no experiment default for " + key);
}

class Reader {
public:
    explicit Reader(ConfigValues values) : values_(std::move(values)) {}

    const std::string& text(const std::string& key) const { return values_.at(key); }

    double real(const std::string& key) const {
        auto v = parse_double(text(key));
        if (!v) throw ConfigError(key + ": expected a number, got '" + text(key) + "'");
        return *v;
    }

    std::size_t count(const std::string& key) const {
        auto v = parse_integer(text(key));
        if (!v || *v < 0) throw ConfigError(key + ": expected a non-negative integer, got '" + text(key) + "'");
        return static_cast<std::size_t>(*v);
    }

    std::uint64_t seed(const std::string& key) const {
        const std::string& t = text(key);
        std::uint64_t v = 0;
        if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
            t.size() > 20) {
            throw ConfigError(key + ": expected an unsigned integer, got '" + t + "'");
        }
        for (char c : t) v = v * 10 + static_cast<std::uint64_t>(c - '0');
        return v;
    }

    bool flag(const std::string& key) const {
        const std::string& t = text(key);
        if (t == "true" || t == "1") return true;
        if (t == "false" || t == "0") return false;
        throw ConfigError(key + ": expected true or false, got '" + t + "'");
    }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        if (trim(text(key)).empty()) return out;
        for (auto& item : split(text(key), ',')) out.emplace_back(trim(item));
        return out;
    }

private:
    ConfigValues values_;
};

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

std::span<const ConfigKey> config_keys() { return keys; }

bool is_config_key(std::string_view key) {
    return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.key == key; });
}

ConfigValues parse_config(std::istream& is, const std::string& source) {
    ConfigValues values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no);
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
        std::string key(trim(std::string_view(line).substr(0, eq)));
        std::string value(trim(std::string_view(line).substr(eq + 1)));
        if (!is_config_key(key)) throw ConfigError(where + ": unknown key '" + key + "'");
        if (!values.emplace(key, value).second) throw ConfigError(where + ": key '" + key + "' repeated");
    }
    return values;
}

ConfigValues load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    return parse_config(is, path.string());
}

void ExperimentConfig::validate() const {
    auto positive = [](std::size_t v, const char* key) {
        if (v == 0) throw ConfigError(std::string(key) + " must be positive");
    };
    positive(batch, "train.batch");
    positive(epochs, "train.epochs");
    if (!(optim.learning_rate > 0.0)) throw ConfigError("optim.lr must be positive");
    if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) || !(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) {
        throw ConfigError("optim.beta1 and optim.beta2 must lie in [0, 1)");
    }
    if (!(optim.epsilon > 0.0)) throw ConfigError("optim.eps must be positive");
    if (!(optim.clip_norm >= 0.0)) throw ConfigError("optim.clip must be non-negative");
    if (!(dropout.rate >= 0.0 && dropout.rate < 1.0)) throw ConfigError("dropout.rate must lie in [0, 1)");
    if (widths.empty()) throw ConfigError("model.widths needs at least one width");
    for (auto w : widths) positive(w, "model.widths entries");
    if (layer == EquivariantVariant::scalar_sum || layer == EquivariantVariant::scalar_max) {
        throw ConfigError("model.layer must be a channel variant for multi-channel data");
    }
    static const std::set<std::string> sources = {"synthetic", "mnist", "off", "csv"};
    if (!sources.count(data.source)) throw ConfigError("unknown data.source '" + data.source + "'");

    switch (experiment) {
        case Experiment::mnist_sum:
            parse_mnist_variant(variant);
            if (data.source != "synthetic" && data.source != "mnist") {
                throw ConfigError("mnist_sum reads data.source synthetic or mnist");
            }
            positive(data.set_size, "data.set_size");
            positive(data.train_sets, "data.train_sets");
            positive(data.val_sets, "data.val_sets");
            if (data.source == "synthetic") positive(data.digits, "data.digits");
            if (data.source == "mnist" && (data.mnist_images.empty() || data.mnist_labels.empty())) {
                throw ConfigError("data.source=mnist needs data.mnist_images and data.mnist_labels");
            }
            break;
        case Experiment::pointcloud:
            if (variant != "equivariant") throw ConfigError("pointcloud supports model.variant=equivariant");
            if (data.source != "synthetic" && data.source != "off") {
                throw ConfigError("pointcloud reads data.source synthetic or off");
            }
            if (data.points < 2) throw ConfigError("data.points must be at least 2");
            if (data.source == "synthetic") {
                positive(data.train_clouds, "data.train_clouds");
                positive(data.test_clouds, "data.test_clouds");
                if (data.classes.size() < 2) throw ConfigError("data.classes needs at least two shapes");
            } else if (data.mesh_list.empty() || data.mesh_test_list.empty()) {
                throw ConfigError("data.source=off needs data.mesh_list and data.mesh_test_list");
            }
            break;
        case Experiment::setregression:
            if (variant != "equivariant" && variant != "mlp") {
                throw ConfigError("setregression supports model.variant=equivariant or mlp");
            }
            if (data.source != "synthetic" && data.source != "csv") {
                throw ConfigError("setregression reads data.source synthetic or csv");
            }
            if (data.source == "csv" && data.csv.empty()) throw ConfigError("data.source=csv needs data.csv");
            positive(data.clusters.count, "data.clusters");
            positive(data.clusters.features, "data.features");
            if (data.clusters.min_size < 1 || data.clusters.max_size < data.clusters.min_size) {
                throw ConfigError("need 1 <= data.min_size <= data.max_size");
            }
            if (!(data.clusters.labeled_fraction > 0.0 && data.clusters.labeled_fraction <= 1.0)) {
                throw ConfigError("data.labeled_fraction must lie in (0, 1]");
            }
            if (!(data.val_fraction > 0.0 && data.val_fraction < 1.0)) {
                throw ConfigError("data.val_fraction must lie in (0, 1)");
            }
            break;
    }
}

ExperimentConfig resolve_config(const ConfigValues& given) {
    for (const auto& [k, v] : given)
        if (!is_config_key(k)) throw ConfigError("unknown key '" + k + "'");

    ConfigValues values;
    for (const auto& k : keys) values[k.key] = k.default_value;
    for (const auto& [k, v] : given) values[k] = v;
    const Experiment experiment = parse_experiment(values["experiment"]);
    const ExperimentDefaults defaults = defaults_for(experiment);
    for (auto& [k, v] : values)
        if (v == "auto") v = auto_value(defaults, k);

    const Reader r(values);
    ExperimentConfig c;
    c.experiment = experiment;
    c.seed = r.seed("seed");
    c.variant = r.text("model.variant");
    c.widths.clear();
    for (const auto& w : r.list("model.widths")) {
        auto v = parse_integer(w);
        if (!v || *v <= 0) throw ConfigError("model.widths: bad width '" + w + "'");
        c.widths.push_back(static_cast<std::size_t>(*v));
    }
    c.activation = parse_activation(r.text("model.activation"));
    c.pool.kind = parse_reduce(r.text("model.pool"));
    c.layer = parse_variant(r.text("model.layer"));
    c.aggregate = parse_aggregate(r.text("model.aggregate"));
    c.dropout.rate = r.real("dropout.rate");
    c.dropout.simultaneous = r.flag("dropout.simultaneous");
    c.optim.kind = parse_optimizer(r.text("optim.kind"));
    c.optim.learning_rate = r.real("optim.lr");
    c.optim.beta1 = r.real("optim.beta1");
    c.optim.beta2 = r.real("optim.beta2");
    c.optim.epsilon = r.real("optim.eps");
    c.optim.clip_norm = r.real("optim.clip");
    c.batch = r.count("train.batch");
    c.epochs = r.count("train.epochs");

    DataConfig& d = c.data;
    d.source = r.text("data.source");
    d.mnist_images = r.text("data.mnist_images");
    d.mnist_labels = r.text("data.mnist_labels");
    d.digits = r.count("data.digits");
    d.set_size = r.count("data.set_size");
    d.train_sets = r.count("data.train_sets");
    d.val_sets = r.count("data.val_sets");
    d.points = r.count("data.points");
    d.train_clouds = r.count("data.train_clouds");
    d.test_clouds = r.count("data.test_clouds");
    d.classes.clear();
    for (const auto& s : r.list("data.classes")) d.classes.push_back(data::parse_shape(s));
    d.mesh_list = r.text("data.mesh_list");
    d.mesh_test_list = r.text("data.mesh_test_list");
    d.augment = r.flag("data.augment");
    d.csv = r.text("data.csv");
    d.csv_id = r.text("data.csv_id");
    d.csv_features = r.list("data.csv_features");
    d.csv_label = r.text("data.csv_label");
    d.csv_mask = r.text("data.csv_mask");
    d.clusters.count = r.count("data.clusters");
    d.clusters.min_size = r.count("data.min_size");
    d.clusters.max_size = r.count("data.max_size");
    d.clusters.features = r.count("data.features");
    d.clusters.labeled_fraction = r.real("data.labeled_fraction");
    d.clusters.noise = r.real("data.noise");
    d.val_fraction = r.real("data.val_fraction");
    c.output_dir = r.text("output.dir");
    c.validate();
    return c;
}

ConfigValues to_values(const ExperimentConfig& c) {
    ConfigValues v;
    v["experiment"] = std::string(to_string(c.experiment));
    v["seed"] = std::to_string(c.seed);
    v["model.variant"] = c.variant;
    std::vector<std::string> widths;
    for (auto w : c.widths) widths.push_back(std::to_string(w));
    v["model.widths"] = join(widths);
    v["model.activation"] = std::string(to_string(c.activation));
    v["model.pool"] = std::string(to_string(c.pool.kind));
    v["model.layer"] = std::string(to_string(c.layer));
    v["model.aggregate"] = std::string(to_string(c.aggregate));
    v["dropout.rate"] = format_double(c.dropout.rate);
    v["dropout.simultaneous"] = bool_text(c.dropout.simultaneous);
    v["optim.kind"] = std::string(to_string(c.optim.kind));
    v["optim.lr"] = format_double(c.optim.learning_rate);
    v["optim.beta1"] = format_double(c.optim.beta1);
    v["optim.beta2"] = format_double(c.optim.beta2);
    v["optim.eps"] = format_double(c.optim.epsilon);
    v["optim.clip"] = format_double(c.optim.clip_norm);
    v["train.batch"] = std::to_string(c.batch);
    v["train.epochs"] = std::to_string(c.epochs);

    const DataConfig& d = c.data;
    v["data.source"] = d.source;
    v["data.mnist_images"] = d.mnist_images.string();
    v["data.mnist_labels"] = d.mnist_labels.string();
    v["data.digits"] = std::to_string(d.digits);
    v["data.set_size"] = std::to_string(d.set_size);
    v["data.train_sets"] = std::to_string(d.train_sets);
    v["data.val_sets"] = std::to_string(d.val_sets);
    v["data.points"] = std::to_string(d.points);
    v["data.train_clouds"] = std::to_string(d.train_clouds);
    v["data.test_clouds"] = std::to_string(d.test_clouds);
    std::vector<std::string> classes;
    for (auto s : d.classes) classes.emplace_back(data::to_string(s));
    v["data.classes"] = join(classes);
    v["data.mesh_list"] = d.mesh_list.string();
    v["data.mesh_test_list"] = d.mesh_test_list.string();
    v["data.augment"] = bool_text(d.augment);
    v["data.csv"] = d.csv.string();
    v["data.csv_id"] = d.csv_id;
    v["data.csv_features"] = join(d.csv_features);
    v["data.csv_label"] = d.csv_label;
    v["data.csv_mask"] = d.csv_mask;
    v["data.clusters"] = std::to_string(d.clusters.count);
    v["data.min_size"] = std::to_string(d.clusters.min_size);
    v["data.max_size"] = std::to_string(d.clusters.max_size);
    v["data.features"] = std::to_string(d.clusters.features);
    v["data.labeled_fraction"] = format_double(d.clusters.labeled_fraction);
    v["data.noise"] = format_double(d.clusters.noise);
    v["data.val_fraction"] = format_double(d.val_fraction);
    v["output.dir"] = c.output_dir.string();
    return v;
}

void write_config(std::ostream& os, const ExperimentConfig& config) {
    const ConfigValues values = to_values(config);
    for (const auto& k : keys) os << k.key << '=' << values.at(k.key) << '\n';
}

}  // namespace setnet::train

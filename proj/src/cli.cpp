#include "setnet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "setnet/error.hpp"
#include "setnet/text.hpp"
#include "setnet/theorem.hpp"
#include "setnet/train.hpp"

namespace setnet::cli {

namespace {

namespace fs = std::filesystem;
using train::ExperimentConfig;

/// One CLI flag per config key, plus --config for a base file.
struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App& app) {
        app.add_option("--config", config_path, "flat key=value config file; flags override it");
        for (const auto& k : train::config_keys()) {
            std::string help = k.help + " [default: " + (k.default_value.empty() ? "<empty>" : k.default_value) + "]";
            options[k.key] = app.add_option("--" + k.key, values[k.key], help);
        }
    }

    ExperimentConfig resolve() const {
        train::ConfigValues merged;
        if (!config_path.empty()) merged = train::load_config(config_path);
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) merged[key] = values.at(key);
        return train::resolve_config(merged);
    }
};

double basis_structure_deviation(const theorem::WeightMatrix& b) {
    const Tensor& e = b.entries();
    const std::size_t n = b.n();
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double ref = i == j ? e.at(0, 0) : e.at(0, 1);
            dev = std::max(dev, std::abs(e.at(i, j) - ref));
        }
    }
    return dev;
}

int verify_theorem(std::size_t n, std::uint64_t seed, std::ostream& out) {
    if (n < 2) throw ConfigError("--n must be at least 2");
    if (n > theorem::exhaustive_limit) {
        throw BudgetError("verify-theorem enumerates S_n and computes the commutant only for n <= " +
                          std::to_string(theorem::exhaustive_limit));
    }
    const auto basis = theorem::commutant_basis(n);
    double structure = 0.0;
    for (const auto& b : basis) structure = std::max(structure, basis_structure_deviation(b));

    Rng rng(derive_seed(seed, 7));
    const double lambda = uniform(rng, -10.0, 10.0), gamma = uniform(rng, -10.0, 10.0);
    const auto tied = theorem::WeightMatrix::tied(n, lambda, gamma);
    const bool tied_exhaustive = theorem::commutes_with_all(tied, theorem::CommuteMode::exhaustive);
    const bool tied_transpositions = theorem::commutes_with_all(tied, theorem::CommuteMode::transpositions);
    Tensor broken = tied.entries();
    broken[1] += 1e-3;
    const bool perturbed =
        theorem::commutes_with_all(theorem::WeightMatrix(broken), theorem::CommuteMode::exhaustive);

    const bool pass = basis.size() == 2 && structure <= 1e-10 && tied_exhaustive && tied_transpositions && !perturbed;
    out << "Commutant of the permutation representation of S_" << n << " has dimension " << basis.size()
        << (basis.size() == 2 ? ", spanned by I and 11^T" : "") << ".\n";
    out << "n=" << n << '\n'
        << "commutant_dimension=" << basis.size() << '\n'
        << "basis_structure_deviation=" << format_double(structure) << '\n'
        << "tied_lambda=" << format_double(lambda) << '\n'
        << "tied_gamma=" << format_double(gamma) << '\n'
        << "tied_commutes_exhaustive=" << (tied_exhaustive ? "true" : "false") << '\n'
        << "tied_commutes_transpositions=" << (tied_transpositions ? "true" : "false") << '\n'
        << "perturbed_commutes=" << (perturbed ? "true" : "false") << '\n'
        << "verdict=" << (pass ? "pass" : "fail") << '\n';
    return pass ? ok : failure;
}

void write_resolved(const ExperimentConfig& config, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream os(dir / "config.resolved.cfg");
    train::write_config(os, config);
}

int train_command(const ExperimentConfig& config, bool resume, std::ostream& out) {
    const fs::path dir = config.output_dir;
    write_resolved(config, dir);
    const train::PreparedData prepared = train::prepare_data(config);
    train::SetModel model = train::build_model(config, prepared);

    train::TrainOptions options;
    options.checkpoint_dir = dir;
    const fs::path last = dir / "checkpoint_last.ckpt";
    if (resume) {
        if (!fs::exists(last)) throw ConfigError("--resume given but " + last.string() + " does not exist");
        options.resume = last;
    }
    std::ofstream metrics(dir / "metrics.log", resume ? std::ios::app : std::ios::trunc);
    std::ofstream timing(dir / "timing.log", resume ? std::ios::app : std::ios::trunc);
    options.metrics = &metrics;
    options.timing = &timing;

    out << "experiment=" << train::to_string(config.experiment) << " model=" << model.name
        << " parameters=" << model.parameter_count() << " train_sets=" << prepared.train.size()
        << " val_sets=" << prepared.val.size() << '\n';
    const train::TrainResult r = train::train_loop(config, model, prepared, options);
    for (const auto& rec : r.history)
        if (rec.split == "val") out << train::format_metrics(rec) << '\n';
    const char* metric = train::higher_is_better(config.experiment) ? "accuracy" : "scatter";
    out << "best_epoch=" << r.best_epoch << " best_val_" << metric << "=" << format_double(r.best_metric) << '\n';
    out << "outputs written to " << dir.string() << '\n';
    return ok;
}

struct LoadedRun {
    ExperimentConfig config;
    train::PreparedData prepared;
    train::SetModel model;
    Checkpoint checkpoint;
};

LoadedRun load_run(const fs::path& checkpoint) {
    LoadedRun run;
    run.checkpoint = load_checkpoint(checkpoint);
    train::ConfigValues values;
    for (const auto& [k, v] : run.checkpoint.meta)
        if (k.rfind("config.", 0) == 0) values[k.substr(7)] = v;
    if (values.empty()) throw FormatError("checkpoint " + checkpoint.string() + " carries no config");
    run.config = train::resolve_config(values);
    run.prepared = train::prepare_data(run.config);
    run.model = train::build_model(run.config, run.prepared);
    run.model.load(run.checkpoint);
    return run;
}

int eval_command(const fs::path& checkpoint, std::ostream& out) {
    LoadedRun run = load_run(checkpoint);
    const train::Evaluation ev = train::evaluate(run.model, run.prepared, run.prepared.val, run.config.batch);
    out << "experiment=" << train::to_string(run.config.experiment) << " model=" << run.model.name << '\n';
    out << "val_loss=" << format_double(ev.loss) << '\n' << "val_metric=" << format_double(ev.metric) << '\n';
    auto recorded = run.checkpoint.meta_value("val_metric");
    if (recorded) {
        auto v = parse_double(*recorded);
        if (!v) throw FormatError("checkpoint val_metric is not a number");
        const double diff = std::abs(*v - ev.metric);
        out << "recorded_val_metric=" << *recorded << '\n'
            << "difference=" << format_double(diff) << '\n'
            << "reproduced=" << (diff <= 1e-9 ? "true" : "false") << '\n';
        if (diff > 1e-9) throw NumericError("evaluation differs from the recorded metric by " + format_double(diff));
    }
    return ok;
}

int check_equivariance_command(const ExperimentConfig& config, const std::string& checkpoint,
                               std::size_t members, std::size_t trials, std::ostream& out) {
    LoadedRun run;
    if (!checkpoint.empty()) {
        run = load_run(checkpoint);
    } else {
        run.config = config;
        run.prepared = train::prepare_data(config);
        run.model = train::build_model(config, run.prepared);
    }
    const bool flat = run.config.experiment == train::Experiment::mnist_sum &&
                      (run.config.variant == "I" || run.config.variant == "II");
    if (members == 0 || flat) members = run.prepared.train.sets.front().dim(0);
    Rng rng(derive_seed(run.config.seed, 9));
    const auto report = theorem::check_equivariance_empirical(train::as_set_function(run.model), members,
                                                              run.prepared.train.channels(), trials, rng);
    const bool per_member = run.model.per_member_output();
    const bool certified = per_member ? report.equivariant() : report.invariant();
    out << "model=" << run.model.name << '\n'
        << "property=" << (per_member ? "equivariant" : "invariant") << '\n'
        << theorem::to_key_values(report) << "certified=" << (certified ? "true" : "false") << '\n';
    return ok;
}

int actmax_command(const fs::path& checkpoint, const train::ActMaxOptions& options, std::uint64_t seed,
                   const std::string& out_dir, std::ostream& out) {
    LoadedRun run = load_run(checkpoint);
    Rng rng(derive_seed(seed, 11));
    const train::ActMaxResult r = train::activation_maximization(run.model, options, rng);
    const fs::path dir = out_dir.empty() ? checkpoint.parent_path() / "dumps" : fs::path(out_dir);
    fs::create_directories(dir);
    const fs::path file =
        dir / ("actmax_l" + std::to_string(options.layer) + "_u" + std::to_string(options.unit) + ".xyz");
    std::ofstream os(file);
    data::write_xyz(os, r.points);
    out << "layer=" << options.layer << '\n'
        << "unit=" << options.unit << '\n'
        << "iterations=" << r.iterations << '\n'
        << "activation=" << format_double(r.activation) << '\n'
        << "success=" << (r.success ? "true" : "false") << '\n'
        << "dump=" << file.string() << '\n';
    return ok;
}

int sample_mesh_command(const std::string& mesh, const std::string& shape, std::size_t points,
                        std::uint64_t seed, bool augment, const std::string& out_path, std::ostream& out,
                        std::ostream& err) {
    if (mesh.empty() == shape.empty()) throw ConfigError("give exactly one of --mesh or --shape");
    if (points == 0) throw ConfigError("--points must be positive");
    Rng rng(derive_seed(seed, 13));
    Tensor cloud;
    if (!mesh.empty()) {
        std::vector<std::string> warnings;
        const data::TriangleMesh m = data::load_off(mesh, &warnings);
        for (const auto& w : warnings) err << "warning: " << w << '\n';
        cloud = data::sample_point_cloud(m, points, rng);
    } else {
        cloud = data::sample_shape(data::parse_shape(shape), points, rng);
    }
    if (augment) cloud = data::augment_cloud(cloud, rng);
    if (out_path.empty()) {
        data::write_xyz(out, cloud);
    } else {
        if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
        std::ofstream os(out_path);
        data::write_xyz(os, cloud);
        out << "points=" << points << '\n' << "dump=" << out_path << '\n';
    }
    return ok;
}

int exit_code_for(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return config;
        case ErrorCategory::format: return format;
        case ErrorCategory::numeric: return numeric;
        case ErrorCategory::budget: return budget;
        default: return failure;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Permutation-equivariant set networks: verification, training and evaluation"};
    app.name("setnet");
    app.require_subcommand(1);
    app.footer("Exit codes: 0 ok, 1 usage, 2 config, 3 format, 4 numeric, 5 budget, 6 other failure.");

    std::size_t theorem_n = 4;
    std::uint64_t theorem_seed = 1;
    auto* verify = app.add_subcommand("verify-theorem", "check that only lambda I + gamma 11^T commutes with S_n");
    verify->add_option("--n", theorem_n, "set size, 2..7")->capture_default_str();
    verify->add_option("--seed", theorem_seed, "seed for the sampled tied matrix")->capture_default_str();

    ConfigFlags check_flags;
    std::string check_checkpoint;
    std::size_t check_members = 0, check_trials = 20;
    auto* check = app.add_subcommand("check-equivariance", "empirically certify a model's permutation symmetry");
    check_flags.attach(*check);
    check->add_option("--checkpoint", check_checkpoint, "check a trained model instead of a fresh one");
    check->add_option("--members", check_members, "set size to probe, 0 uses the data's set size")
        ->capture_default_str();
    check->add_option("--trials", check_trials, "random inputs and permutations")->capture_default_str();

    ConfigFlags train_flags;
    bool resume = false;
    auto* train_cmd = app.add_subcommand("train", "train a model and write config, metrics and checkpoints");
    train_flags.attach(*train_cmd);
    train_cmd->add_flag("--resume", resume, "continue from <output.dir>/checkpoint_last.ckpt");

    std::string eval_checkpoint;
    auto* eval = app.add_subcommand("eval", "re-evaluate a checkpoint on its validation split");
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();

    std::string act_checkpoint, act_out;
    std::uint64_t act_seed = 1;
    train::ActMaxOptions act_options;
    auto* actmax = app.add_subcommand("actmax", "maximise one unit's activation over input point coordinates");
    actmax->add_option("--checkpoint", act_checkpoint, "pointcloud checkpoint file")->required();
    actmax->add_option("--layer", act_options.layer, "equivariant stage index")->capture_default_str();
    actmax->add_option("--unit", act_options.unit, "channel within the stage")->capture_default_str();
    actmax->add_option("--points", act_options.points, "particles in the optimised cloud")->capture_default_str();
    actmax->add_option("--budget", act_options.budget, "Adamax iterations")->capture_default_str();
    actmax->add_option("--threshold", act_options.threshold, "activation counted as success")->capture_default_str();
    actmax->add_option("--seed", act_seed, "seed for the initial cloud")->capture_default_str();
    actmax->add_option("--out", act_out, "dump directory, default <checkpoint dir>/dumps");

    std::string mesh_path, mesh_shape, mesh_out;
    std::size_t mesh_points = 1000;
    std::uint64_t mesh_seed = 1;
    bool mesh_augment = false;
    auto* sample = app.add_subcommand("sample-mesh", "sample a point cloud from an OFF mesh or analytic shape");
    sample->add_option("--mesh", mesh_path, "OFF mesh file");
    sample->add_option("--shape", mesh_shape, "sphere | cube | cylinder | torus | cone");
    sample->add_option("--points", mesh_points, "points to sample")->capture_default_str();
    sample->add_option("--seed", mesh_seed, "sampling seed")->capture_default_str();
    sample->add_flag("--augment", mesh_augment, "apply a random z-rotation and scale");
    sample->add_option("--out", mesh_out, "xyz output file, default stdout");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }

    try {
        if (verify->parsed()) return verify_theorem(theorem_n, theorem_seed, out);
        if (check->parsed()) {
            const ExperimentConfig config = check_checkpoint.empty() ? check_flags.resolve() : ExperimentConfig{};
            return check_equivariance_command(config, check_checkpoint, check_members, check_trials, out);
        }
        if (train_cmd->parsed()) return train_command(train_flags.resolve(), resume, out);
        if (eval->parsed()) return eval_command(eval_checkpoint, out);
        if (actmax->parsed()) return actmax_command(act_checkpoint, act_options, act_seed, act_out, out);
        if (sample->parsed()) {
            return sample_mesh_command(mesh_path, mesh_shape, mesh_points, mesh_seed, mesh_augment, mesh_out, out, err);
        }
    } catch (const Error& e) {
        err << "error [" << to_string(e.category()) << "]: " << e.what() << '\n';
        return exit_code_for(e.category());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failure;
    }
    return usage;
}

}  // namespace setnet::cli

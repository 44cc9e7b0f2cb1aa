#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "setnet/cli.hpp"

using namespace setnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string without_output_dir(const std::string& text) {
    std::istringstream is(text);
    std::string line, kept;
    while (std::getline(is, line))
        if (line.rfind("meta config.output.dir ", 0) != 0) kept += line + '\n';
    return kept;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("setnet_pipeline_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::string> pointcloud_args(const fs::path& dir, int epochs) {
    return {"train",          "--experiment",        "pointcloud", "--seed",         "5",
            "--model.widths", "8,8",                 "--data.points", "24",          "--data.train_clouds",
            "48",             "--data.test_clouds",  "24",         "--train.batch",  "8",
            "--optim.lr",     "0.005",               "--train.epochs", std::to_string(epochs),
            "--output.dir",   dir.string()};
}

}  // namespace

TEST(Pipeline, TrainTwiceIsByteIdentical) {
    const fs::path a = scratch("a"), b = scratch("b");
    const Outcome ra = invoke(pointcloud_args(a, 3));
    ASSERT_EQ(ra.code, cli::ok) << ra.err;
    ASSERT_EQ(invoke(pointcloud_args(b, 3)).code, cli::ok);
    for (const char* f : {"metrics.log", "checkpoint_last.ckpt", "checkpoint_best.ckpt", "config.resolved.cfg"})
        EXPECT_TRUE(fs::exists(a / f)) << f;
    EXPECT_FALSE(slurp(a / "metrics.log").empty());
    EXPECT_EQ(slurp(a / "metrics.log"), slurp(b / "metrics.log"));
    EXPECT_NE(ra.out.find("best_epoch="), std::string::npos);
    EXPECT_NE(ra.out.find("epoch=3 split=val"), std::string::npos);

    const Outcome again = invoke({"train", "--config", (a / "config.resolved.cfg").string(), "--output.dir",
                                  (b / "rerun").string()});
    ASSERT_EQ(again.code, cli::ok) << again.err;
    EXPECT_EQ(slurp(b / "rerun" / "metrics.log"), slurp(a / "metrics.log"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Pipeline, ResumeAppendsTheSameEpochs) {
    const fs::path full = scratch("full"), part = scratch("part");
    ASSERT_EQ(invoke(pointcloud_args(full, 4)).code, cli::ok);
    ASSERT_EQ(invoke(pointcloud_args(part, 2)).code, cli::ok);
    auto resume = pointcloud_args(part, 4);
    resume.push_back("--resume");
    const Outcome r = invoke(resume);
    ASSERT_EQ(r.code, cli::ok) << r.err;
    EXPECT_EQ(slurp(part / "metrics.log"), slurp(full / "metrics.log"));
    EXPECT_EQ(without_output_dir(slurp(part / "checkpoint_last.ckpt")),
              without_output_dir(slurp(full / "checkpoint_last.ckpt")));
    auto missing = pointcloud_args(scratch("none"), 2);
    missing.push_back("--resume");
    EXPECT_EQ(invoke(missing).code, cli::config);
    fs::remove_all(full);
    fs::remove_all(part);
}

TEST(Pipeline, EvalCheckAndActmaxOnTrainedCheckpoint) {
    const fs::path dir = scratch("eval");
    ASSERT_EQ(invoke(pointcloud_args(dir, 2)).code, cli::ok);
    const std::string ckpt = (dir / "checkpoint_best.ckpt").string();

    const Outcome ev = invoke({"eval", "--checkpoint", ckpt});
    EXPECT_EQ(ev.code, cli::ok) << ev.err;
    EXPECT_NE(ev.out.find("reproduced=true"), std::string::npos) << ev.out;

    const Outcome ce = invoke({"check-equivariance", "--checkpoint", ckpt, "--trials", "20"});
    EXPECT_EQ(ce.code, cli::ok) << ce.err;
    EXPECT_NE(ce.out.find("property=invariant"), std::string::npos);
    EXPECT_NE(ce.out.find("certified=true"), std::string::npos) << ce.out;

    const Outcome am = invoke({"actmax", "--checkpoint", ckpt, "--layer", "1", "--unit", "3", "--points", "16",
                               "--budget", "40", "--out", (dir / "dumps").string()});
    EXPECT_EQ(am.code, cli::ok) << am.err;
    EXPECT_NE(am.out.find("iterations=40"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "dumps" / "actmax_l1_u3.xyz"));
    EXPECT_EQ(invoke({"actmax", "--checkpoint", ckpt, "--layer", "7", "--budget", "1"}).code, cli::failure);
    fs::remove_all(dir);
}

TEST(Pipeline, CheckEquivarianceOnFreshModels) {
    const Outcome reg = invoke({"check-equivariance", "--experiment", "setregression", "--data.clusters", "20",
                                "--trials", "20"});
    EXPECT_EQ(reg.code, cli::ok) << reg.err;
    EXPECT_NE(reg.out.find("property=equivariant"), std::string::npos);
    EXPECT_NE(reg.out.find("certified=true"), std::string::npos);

    const Outcome flat = invoke({"check-equivariance", "--model.variant", "I", "--data.digits", "200",
                                 "--data.train_sets", "20", "--data.val_sets", "10", "--trials", "10"});
    EXPECT_EQ(flat.code, cli::ok) << flat.err;
    EXPECT_NE(flat.out.find("certified=false"), std::string::npos) << flat.out;

    const Outcome deep = invoke({"check-equivariance", "--model.variant", "IV", "--data.digits", "200",
                                 "--data.train_sets", "20", "--data.val_sets", "10", "--trials", "10"});
    EXPECT_NE(deep.out.find("certified=true"), std::string::npos) << deep.out;
}

TEST(Pipeline, RegressionTrainAndEval) {
    const fs::path dir = scratch("reg");
    const Outcome r = invoke({"train", "--experiment", "setregression", "--data.clusters", "40", "--model.widths",
                              "8,8", "--train.epochs", "2", "--output.dir", dir.string()});
    ASSERT_EQ(r.code, cli::ok) << r.err;
    EXPECT_NE(r.out.find("best_val_scatter="), std::string::npos);
    const Outcome ev = invoke({"eval", "--checkpoint", (dir / "checkpoint_last.ckpt").string()});
    EXPECT_NE(ev.out.find("reproduced=true"), std::string::npos) << ev.out << ev.err;
    fs::remove_all(dir);
}

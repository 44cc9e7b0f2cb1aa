#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "setnet/data.hpp"
#include "setnet/error.hpp"

using namespace setnet;
using namespace setnet::data;

namespace {

LabeledSetDataset parse(const std::string& text, const CatalogColumns& cols) {
    std::istringstream is(text);
    return read_cluster_catalog(is, cols);
}

CatalogColumns two_features() { return {"id", {"a", "b"}, "z", "m"}; }

}  // namespace

TEST(Catalog, GroupsRowsByClusterInFirstAppearanceOrder) {
    const std::string csv =
        "id,a,b,z,m\n"
        "7,1,2,0.3,1\n"
        "3,0,0,0.1,0\n"
        "7,3,4,,0\n"
        "3,1,1,0.2,1\n"
        "3,2,2,0.2,1\n"
        "7,5,6,0.31,1\n"
        "3,4,4,0.1,0\n"
        "3,5,5,0.1,0\n";
    const LabeledSetDataset ds = parse(csv, two_features());
    ds.validate();
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.task, Task::regression);
    EXPECT_EQ(ds.sets[0].dim(0), 3u);
    EXPECT_EQ(ds.sets[1].dim(0), 5u);
    EXPECT_EQ(ds.sets[0], Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(ds.labeled[0], (std::vector<std::uint8_t>{1, 0, 1}));
    EXPECT_EQ(ds.targets[0][0], 0.3);
    EXPECT_EQ(ds.targets[0][1], 0.0);
    EXPECT_EQ(ds.targets[0][2], 0.31);
}

TEST(Catalog, HeaderlessColumnsAreIndices) {
    const LabeledSetDataset ds = parse("1,0.5,0.2,1\n1,0.7,0.3,1\n2,0.1,0.4,0\n", {"0", {"1"}, "2", "3"});
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.sets[0], Tensor({2, 1}, {0.5, 0.7}));
    EXPECT_EQ(ds.targets[0], (std::vector<double>{0.2, 0.3}));
    EXPECT_EQ(ds.labeled[1], (std::vector<std::uint8_t>{0}));
}

TEST(Catalog, ErrorsNameTheRow) {
    auto message = [](const std::string& text, const CatalogColumns& cols) {
        try {
            parse(text, cols);
        } catch (const FormatError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message("id,a,b,z,m\n1,1,x,0.1,1\n", two_features()).find("row 2"), std::string::npos);
    EXPECT_NE(message("id,a,b,z,m\n1,1,2,0.1,1\n1,1,2,,1\n", two_features()).find("row 3"), std::string::npos);
    EXPECT_NE(message("id,a,z,m\n1,1,0.1,1\n", two_features()).find("b"), std::string::npos);
    EXPECT_NE(message("id,a,b,z,m\n1,1,2,0.1\n", two_features()).find("row 2"), std::string::npos);
}

TEST(Catalog, SyntheticRoundTrip) {
    ClusterSynthOptions o;
    o.count = 20;
    o.features = 5;
    Rng rng(91);
    const LabeledSetDataset ds = synth_clusters(o, rng);
    std::stringstream ss;
    write_cluster_catalog(ss, ds);
    const LabeledSetDataset back = read_cluster_catalog(ss, default_catalog_columns(5));
    ASSERT_EQ(back.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(back.sets[i], ds.sets[i]);
        EXPECT_EQ(back.labeled[i], ds.labeled[i]);
        for (std::size_t m = 0; m < ds.targets[i].size(); ++m)
            if (ds.labeled[i][m]) {
                EXPECT_EQ(back.targets[i][m], ds.targets[i][m]);
            }
    }
}

TEST(Catalog, FileLoad) {
    const auto path = std::filesystem::temp_directory_path() / "setnet_catalog.csv";
    { std::ofstream(path) << "id,a,b,z,m\n1,1,2,0.1,1\n"; }
    EXPECT_EQ(load_cluster_catalog(path, two_features()).size(), 1u);
    std::filesystem::remove(path);
    EXPECT_THROW(load_cluster_catalog(path, two_features()), FormatError);
}

TEST(SyntheticClusters, SizesLabelsAndSharedLatent) {
    ClusterSynthOptions o;
    o.count = 400;
    Rng rng(92);
    const LabeledSetDataset ds = synth_clusters(o, rng);
    ds.validate();
    ASSERT_EQ(ds.latent.size(), ds.size());
    double labeled = 0.0, members = 0.0, dev = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t n = ds.sets[i].dim(0);
        EXPECT_GE(n, o.min_size);
        EXPECT_LE(n, o.max_size);
        EXPECT_EQ(ds.sets[i].dim(1), o.features);
        EXPECT_GE(ds.latent[i], 0.05);
        EXPECT_LE(ds.latent[i], 0.6);
        for (std::size_t m = 0; m < n; ++m) {
            members += 1.0;
            if (ds.labeled[i][m]) {
                labeled += 1.0;
                dev = std::max(dev, std::abs(ds.targets[i][m] - ds.latent[i]));
            }
        }
    }
    EXPECT_NEAR(labeled / members, 0.3, 0.02);
    EXPECT_LT(dev, 6 * o.member_scatter);
    Rng again(92);
    EXPECT_EQ(synth_clusters(o, again).sets, ds.sets);
}

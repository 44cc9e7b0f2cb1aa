#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "setnet/data.hpp"
#include "setnet/error.hpp"

using namespace setnet;
using namespace setnet::data;

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                       static_cast<char>(v)};
    os.write(b, 4);
}

std::string idx_images(std::size_t count, std::size_t rows, std::size_t cols, const std::vector<unsigned char>& px) {
    std::ostringstream os;
    put_u32(os, idx_images_magic);
    put_u32(os, static_cast<std::uint32_t>(count));
    put_u32(os, static_cast<std::uint32_t>(rows));
    put_u32(os, static_cast<std::uint32_t>(cols));
    os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    return os.str();
}

std::string idx_labels(const std::vector<unsigned char>& labels) {
    std::ostringstream os;
    put_u32(os, idx_labels_magic);
    put_u32(os, static_cast<std::uint32_t>(labels.size()));
    os.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
    return os.str();
}

std::string format_error(const std::string& bytes, bool images) {
    std::istringstream is(bytes);
    try {
        if (images) {
            read_idx_images(is);
        } else {
            read_idx_labels(is);
        }
    } catch (const FormatError& e) {
        return e.what();
    }
    return {};
}

/// Single-pixel images whose labels follow `weights` (relative frequencies).
DigitImages labelled_pool(const std::vector<std::size_t>& weights) {
    DigitImages d;
    for (std::size_t digit = 0; digit < weights.size(); ++digit)
        for (std::size_t i = 0; i < weights[digit]; ++i) d.labels.push_back(static_cast<std::uint8_t>(digit));
    d.images = Tensor({d.labels.size(), 1, 1});
    for (std::size_t i = 0; i < d.labels.size(); ++i) d.images[i] = d.labels[i] / 9.0;
    return d;
}

}  // namespace

TEST(Idx, RoundTrip) {
    Rng rng(61);
    std::vector<unsigned char> px(5 * 4 * 3);
    for (auto& p : px) p = static_cast<unsigned char>(uniform_index(rng, 256));
    std::istringstream is(idx_images(5, 4, 3, px));
    const Tensor t = read_idx_images(is);
    ASSERT_EQ(t.shape(), (Shape{5, 4, 3}));
    for (std::size_t i = 0; i < px.size(); ++i) EXPECT_EQ(t[i], px[i] / 255.0);
    std::istringstream ls(idx_labels({3, 1, 4, 1, 5}));
    EXPECT_EQ(read_idx_labels(ls), (std::vector<std::uint8_t>{3, 1, 4, 1, 5}));
}

TEST(Idx, OfficialTrainingHeader) {
    std::istringstream is(idx_images(60000, 28, 28, std::vector<unsigned char>(60000 * 28 * 28)));
    const Tensor t = read_idx_images(is);
    EXPECT_EQ(t.shape(), (Shape{60000, 28, 28}));
}

TEST(Idx, TruncationAndMagicErrors) {
    const std::string full = idx_images(2, 2, 2, std::vector<unsigned char>(8, 7));
    const std::string cut = format_error(full.substr(0, full.size() - 3), true);
    EXPECT_NE(cut.find("truncated at byte offset 21"), std::string::npos) << cut;
    EXPECT_NE(format_error(full.substr(0, 6), true).find("byte offset 6"), std::string::npos);
    EXPECT_NE(format_error(idx_labels({1, 2}), true).find("bad magic"), std::string::npos);
    EXPECT_NE(format_error(full, false).find("bad magic"), std::string::npos);
    EXPECT_NE(format_error(idx_labels({1, 12}), false).find("not a digit"), std::string::npos);
}

TEST(Idx, LoadChecksCountsMatch) {
    const auto dir = std::filesystem::temp_directory_path();
    const auto img = dir / "setnet_idx_images", lab = dir / "setnet_idx_labels";
    {
        std::ofstream(img, std::ios::binary) << idx_images(3, 1, 1, {0, 128, 255});
        std::ofstream(lab, std::ios::binary) << idx_labels({1, 2});
    }
    EXPECT_THROW(load_mnist_idx(img, lab), FormatError);
    { std::ofstream(lab, std::ios::binary) << idx_labels({1, 2, 3}); }
    const DigitImages d = load_mnist_idx(img, lab);
    EXPECT_EQ(d.count(), 3u);
    EXPECT_EQ(d.pixels(), 1u);
    EXPECT_THROW(load_mnist_idx(dir / "setnet_missing", lab), FormatError);
    std::filesystem::remove(img);
    std::filesystem::remove(lab);
}

TEST(SumSets, LabelIsDigitSum) {
    DigitImages d = labelled_pool({0, 1, 0, 1, 1});  // digits 1, 3, 4
    Rng rng(62);
    const LabeledSetDataset ds = build_sum_sets(d, 3, 5, rng);
    EXPECT_EQ(ds.num_classes, 28u);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(ds.labels[i], 8u);
        EXPECT_EQ(ds.sets[i].shape(), (Shape{3, 1}));
    }
    ds.validate();
}

TEST(SumSets, LabelsBoundedByNineN) {
    Rng rng(63);
    const DigitImages d = synth_digits(300, rng);
    const LabeledSetDataset ds = build_sum_sets(d, 3, 500, rng);
    for (auto l : ds.labels) EXPECT_LE(l, 27u);
    for (const auto& src : ds.sources) {
        const std::set<std::size_t> uniq(src.begin(), src.end());
        EXPECT_EQ(uniq.size(), 3u);
    }
    EXPECT_THROW(build_sum_sets(d, 0, 1, rng), ContractError);
}

TEST(SumSets, LabelHistogramMatchesConvolution) {
    const std::vector<std::size_t> weights{900, 1400, 1100, 700, 1000, 600, 1300, 800, 1200, 1000};
    const DigitImages d = labelled_pool(weights);
    const std::size_t n = 3, count = 50000;
    Rng rng(64);
    const LabeledSetDataset ds = build_sum_sets(d, n, count, rng);

    double total = 0.0;
    for (auto w : weights) total += static_cast<double>(w);
    std::vector<double> dist{1.0};
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> next(dist.size() + 9, 0.0);
        for (std::size_t s = 0; s < dist.size(); ++s)
            for (std::size_t digit = 0; digit < 10; ++digit) next[s + digit] += dist[s] * weights[digit] / total;
        dist = next;
    }
    std::vector<double> observed(dist.size(), 0.0);
    for (auto l : ds.labels) observed[l] += 1.0;

    // Pool sparse tail bins so every expected count is at least 5.
    std::vector<std::pair<double, double>> bins;
    double eo = 0.0, oo = 0.0;
    for (std::size_t s = 0; s < dist.size(); ++s) {
        eo += dist[s] * count;
        oo += observed[s];
        if (eo >= 5.0) {
            bins.emplace_back(eo, oo);
            eo = oo = 0.0;
        }
    }
    if (eo > 0.0) {
        bins.back().first += eo;
        bins.back().second += oo;
    }
    double chi2 = 0.0;
    for (const auto& [e, o] : bins) chi2 += (o - e) * (o - e) / e;
    const boost::math::chi_squared dist_chi(static_cast<double>(bins.size() - 1));
    const double p = 1.0 - boost::math::cdf(dist_chi, chi2);
    EXPECT_GT(p, 0.01) << "chi2=" << chi2 << " bins=" << bins.size();
}

TEST(SumSets, SplitPoolsAreDisjoint) {
    Rng rng(65);
    const DigitImages d = synth_digits(600, rng);
    auto [train, val] = split_instances(d.count(), 2.0 / 3.0, rng);
    EXPECT_NEAR(static_cast<double>(train.size()), 400.0, 1.0);
    EXPECT_EQ(train.size() + val.size(), 600u);
    const LabeledSetDataset a = build_sum_sets(d, 3, 300, rng, train);
    const LabeledSetDataset b = build_sum_sets(d, 3, 300, rng, val);
    std::set<std::size_t> used;
    for (const auto& s : a.sources) used.insert(s.begin(), s.end());
    for (const auto& s : b.sources)
        for (auto i : s) EXPECT_EQ(used.count(i), 0u);
    EXPECT_THROW(split_instances(10, 1.0, rng), ContractError);
}

TEST(SumSets, BuildersAreDeterministic) {
    Rng r1(66), r2(66);
    const DigitImages d1 = synth_digits(100, r1), d2 = synth_digits(100, r2);
    EXPECT_EQ(d1.images, d2.images);
    EXPECT_EQ(d1.labels, d2.labels);
    const LabeledSetDataset a = build_sum_sets(d1, 4, 50, r1), b = build_sum_sets(d2, 4, 50, r2);
    EXPECT_EQ(a.sets, b.sets);
    EXPECT_EQ(a.labels, b.labels);
}

TEST(SyntheticDigits, ShapeRangeAndBalance) {
    Rng rng(67);
    const DigitImages d = synth_digits(2000, rng);
    EXPECT_EQ(d.images.shape(), (Shape{2000, 28, 28}));
    for (double v : d.images.values()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
    std::map<int, int> counts;
    for (auto l : d.labels) ++counts[l];
    EXPECT_EQ(counts.size(), 10u);
    for (const auto& [digit, c] : counts) EXPECT_GT(c, 120) << digit;
}

TEST(Collate, PadsToLargestSet) {
    LabeledSetDataset ds;
    ds.sets = {Tensor({2, 1}, {1, 2}), Tensor({3, 1}, {3, 4, 5})};
    ds.labels = {0, 1};
    ds.num_classes = 2;
    const std::vector<std::size_t> idx{1, 0};
    const SetBatch b = collate(ds, idx);
    EXPECT_EQ(b.values, Tensor({2, 3, 1}, {3, 4, 5, 1, 2, 0}));
    EXPECT_EQ(b.cardinalities, (std::vector<std::size_t>{3, 2}));
    EXPECT_EQ(ds.subset(idx).labels, (std::vector<std::size_t>{1, 0}));
}

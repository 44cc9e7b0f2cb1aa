#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>

#include "setnet/data.hpp"
#include "setnet/error.hpp"

namespace setnet::data {

std::size_t LabeledSetDataset::channels() const {
    if (sets.empty()) throw ContractError("empty dataset has no channel count");
    return sets.front().dim(1);
}

void LabeledSetDataset::validate() const {
    for (const auto& s : sets) {
        if (s.rank() != 2 || s.dim(0) == 0) throw ContractError("each set must be a non-empty [n, K]");
        if (s.dim(1) != sets.front().dim(1)) throw ContractError("sets disagree on channel count");
    }
    if (task == Task::classification) {
        if (labels.size() != sets.size()) throw ContractError("one label per set required");
        for (auto l : labels)
            if (l >= num_classes) throw ContractError("label outside [0, num_classes)");
    } else {
        if (targets.size() != sets.size() || labeled.size() != sets.size()) {
            throw ContractError("regression targets and masks needed for every set");
        }
        for (std::size_t i = 0; i < sets.size(); ++i) {
            if (targets[i].size() != sets[i].dim(0) || labeled[i].size() != sets[i].dim(0)) {
                throw ContractError("one target and mask entry per member required");
            }
        }
    }
}

LabeledSetDataset LabeledSetDataset::subset(std::span<const std::size_t> indices) const {
    LabeledSetDataset out;
    out.task = task;
    out.num_classes = num_classes;
    for (auto i : indices) {
        if (i >= sets.size()) throw ContractError("subset index out of range");
        out.sets.push_back(sets[i]);
        if (!labels.empty()) out.labels.push_back(labels[i]);
        if (!targets.empty()) out.targets.push_back(targets[i]);
        if (!labeled.empty()) out.labeled.push_back(labeled[i]);
        if (!latent.empty()) out.latent.push_back(latent[i]);
        if (!sources.empty()) out.sources.push_back(sources[i]);
    }
    return out;
}

SetBatch collate(const LabeledSetDataset& ds, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ContractError("cannot collate an empty batch");
    const std::size_t K = ds.channels();
    std::size_t n_max = 0;
    for (auto i : indices) n_max = std::max(n_max, ds.sets.at(i).dim(0));
    SetBatch batch{Tensor(Shape{indices.size(), n_max, K}), {}};
    double* dst = batch.values.data().data();
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const Tensor& s = ds.sets[indices[b]];
        std::copy(s.data().begin(), s.data().end(), dst + b * n_max * K);
        batch.cardinalities.push_back(s.dim(0));
    }
    return batch;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

class ByteReader {
public:
    explicit ByteReader(std::istream& is) : is_(is) {}

    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4, "32-bit header field");
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
               (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
    }

    void read(unsigned char* dst, std::size_t n, const char* what) {
        is_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(is_.gcount());
        if (got != n) {
            throw FormatError("IDX truncated at byte offset " + std::to_string(offset_ + got) +
                              " while reading " + what);
        }
        offset_ += n;
    }

    std::size_t offset() const { return offset_; }

private:
    std::istream& is_;
    std::size_t offset_ = 0;
};

void check_magic(std::uint32_t got, std::uint32_t want) {
    if (got != want) {
        throw FormatError("IDX bad magic at byte offset 0: got " + std::to_string(got) +
                          ", expected " + std::to_string(want));
    }
}

}  // namespace

Tensor read_idx_images(std::istream& is) {
    ByteReader r(is);
    check_magic(r.u32(), idx_images_magic);
    const std::size_t count = r.u32(), rows = r.u32(), cols = r.u32();
    std::vector<unsigned char> bytes(count * rows * cols);
    r.read(bytes.data(), bytes.size(), "pixel data");
    Tensor images(Shape{count, rows, cols});
    for (std::size_t i = 0; i < bytes.size(); ++i) images[i] = bytes[i] / 255.0;
    return images;
}

std::vector<std::uint8_t> read_idx_labels(std::istream& is) {
    ByteReader r(is);
    check_magic(r.u32(), idx_labels_magic);
    const std::size_t count = r.u32();
    std::vector<std::uint8_t> labels(count);
    r.read(labels.data(), count, "label data");
    for (std::size_t i = 0; i < count; ++i) {
        if (labels[i] > 9) {
            throw FormatError("IDX label " + std::to_string(labels[i]) + " at byte offset " +
                              std::to_string(8 + i) + " is not a digit");
        }
    }
    return labels;
}

DigitImages load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    std::ifstream is(images, std::ios::binary);
    if (!is) throw FormatError("cannot open " + images.string());
    std::ifstream ls(labels, std::ios::binary);
    if (!ls) throw FormatError("cannot open " + labels.string());
    DigitImages out{read_idx_images(is), read_idx_labels(ls)};
    if (out.images.dim(0) != out.labels.size()) {
        throw FormatError("image count " + std::to_string(out.images.dim(0)) +
                          " differs from label count " + std::to_string(out.labels.size()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sum sets

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_instances(
    std::size_t total, double first_fraction, Rng& rng) {
    if (!(first_fraction > 0.0 && first_fraction < 1.0)) {
        throw ContractError("split fraction must lie in (0, 1)");
    }
    const Permutation p = Permutation::random(total, rng);
    const auto cut = static_cast<std::size_t>(first_fraction * static_cast<double>(total));
    std::vector<std::size_t> first(p.mapping().begin(), p.mapping().begin() + cut);
    std::vector<std::size_t> second(p.mapping().begin() + cut, p.mapping().end());
    return {std::move(first), std::move(second)};
}

LabeledSetDataset build_sum_sets(const DigitImages& images, std::size_t n, std::size_t count,
                                 Rng& rng, std::span<const std::size_t> pool) {
    if (n == 0) throw ContractError("set size must be at least 1");
    std::vector<std::size_t> all;
    if (pool.empty()) {
        all.resize(images.count());
        std::iota(all.begin(), all.end(), std::size_t{0});
        pool = all;
    }
    if (pool.size() < n) throw ContractError("image pool smaller than the set size");
    const std::size_t pixels = images.pixels();

    LabeledSetDataset ds;
    ds.task = Task::classification;
    ds.num_classes = 9 * n + 1;
    ds.sets.reserve(count);
    std::vector<std::size_t> picks;
    for (std::size_t s = 0; s < count; ++s) {
        picks.clear();
        while (picks.size() < n) {
            const std::size_t idx = pool[uniform_index(rng, pool.size())];
            if (std::find(picks.begin(), picks.end(), idx) == picks.end()) picks.push_back(idx);
        }
        Tensor set(Shape{n, pixels});
        std::size_t label = 0;
        for (std::size_t m = 0; m < n; ++m) {
            const auto src = images.images.data().subspan(picks[m] * pixels, pixels);
            std::copy(src.begin(), src.end(), set.data().begin() + m * pixels);
            label += images.labels[picks[m]];
        }
        ds.sets.push_back(std::move(set));
        ds.labels.push_back(label);
        ds.sources.push_back(picks);
    }
    return ds;
}

}  // namespace setnet::data

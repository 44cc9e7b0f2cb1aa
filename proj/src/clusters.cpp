#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "setnet/data.hpp"
#include "setnet/error.hpp"
#include "setnet/text.hpp"

namespace setnet::data {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    for (auto& c : split(line, ',')) cells.emplace_back(trim(c));
    return cells;
}

std::size_t resolve(const std::vector<std::string>& header, const std::string& name, bool has_header,
                    std::size_t width) {
    if (has_header) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw FormatError("catalog has no column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
    auto idx = parse_integer(name);
    if (!idx || *idx < 0 || static_cast<std::size_t>(*idx) >= width) {
        throw FormatError("catalog without header: column '" + name + "' is not a valid index");
    }
    return static_cast<std::size_t>(*idx);
}

}  // namespace

LabeledSetDataset read_cluster_catalog(std::istream& is, const CatalogColumns& columns) {
    if (columns.feature_columns.empty()) throw ConfigError("catalog needs at least one feature column");
    std::string line;
    std::size_t row = 0;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_numbers;
    while (std::getline(is, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        rows.push_back(split_csv(line));
        row_numbers.push_back(row);
    }
    if (rows.empty()) throw FormatError("catalog is empty");

    bool has_header = false;
    for (const auto& c : rows.front())
        if (!parse_double(c)) has_header = true;
    const std::vector<std::string> header = has_header ? rows.front() : std::vector<std::string>{};
    const std::size_t width = rows.front().size();

    const std::size_t id_col = resolve(header, columns.id_column, has_header, width);
    std::vector<std::size_t> feat_cols;
    for (const auto& f : columns.feature_columns) feat_cols.push_back(resolve(header, f, has_header, width));
    const std::size_t label_col = resolve(header, columns.label_column, has_header, width);
    const std::size_t mask_col = resolve(header, columns.mask_column, has_header, width);

    struct Group {
        std::vector<double> values;
        std::vector<double> targets;
        std::vector<std::uint8_t> labeled;
    };
    std::vector<Group> groups;
    std::map<std::string, std::size_t> index_of;
    const std::size_t K = feat_cols.size();

    for (std::size_t r = has_header ? 1 : 0; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        const std::string where = "catalog row " + std::to_string(row_numbers[r]);
        if (cells.size() != width) {
            throw FormatError(where + ": expected " + std::to_string(width) + " cells, got " +
                              std::to_string(cells.size()));
        }
        auto [it, inserted] = index_of.try_emplace(cells[id_col], groups.size());
        if (inserted) groups.emplace_back();
        Group& g = groups[it->second];
        for (auto c : feat_cols) {
            auto v = parse_double(cells[c]);
            if (!v) throw FormatError(where + ": non-numeric feature '" + cells[c] + "'");
            g.values.push_back(*v);
        }
        auto mask = parse_double(cells[mask_col]);
        if (!mask) throw FormatError(where + ": non-numeric mask '" + cells[mask_col] + "'");
        const bool has_label = *mask != 0.0;
        double target = 0.0;
        if (has_label) {
            auto t = parse_double(cells[label_col]);
            if (!t) throw FormatError(where + ": non-numeric label '" + cells[label_col] + "'");
            target = *t;
        } else if (!cells[label_col].empty() && !parse_double(cells[label_col])) {
            throw FormatError(where + ": non-numeric label '" + cells[label_col] + "'");
        }
        g.targets.push_back(target);
        g.labeled.push_back(has_label ? 1 : 0);
    }

    LabeledSetDataset ds;
    ds.task = Task::regression;
    for (auto& g : groups) {
        const std::size_t n = g.targets.size();
        ds.sets.emplace_back(Shape{n, K}, std::move(g.values));
        ds.targets.push_back(std::move(g.targets));
        ds.labeled.push_back(std::move(g.labeled));
    }
    return ds;
}

LabeledSetDataset load_cluster_catalog(const std::filesystem::path& path,
                                       const CatalogColumns& columns) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path.string());
    return read_cluster_catalog(is, columns);
}

CatalogColumns default_catalog_columns(std::size_t features) {
    CatalogColumns c;
    c.id_column = "cluster_id";
    for (std::size_t k = 0; k < features; ++k) c.feature_columns.push_back("f" + std::to_string(k));
    c.label_column = "z_spec";
    c.mask_column = "has_spec";
    return c;
}

void write_cluster_catalog(std::ostream& os, const LabeledSetDataset& ds) {
    if (ds.task != Task::regression) throw ContractError("only regression datasets form catalogs");
    ds.validate();
    const std::size_t K = ds.sets.empty() ? 0 : ds.channels();
    os << "cluster_id";
    for (std::size_t k = 0; k < K; ++k) os << ",f" << k;
    os << ",z_spec,has_spec\n";
    for (std::size_t c = 0; c < ds.size(); ++c) {
        const Tensor& s = ds.sets[c];
        for (std::size_t m = 0; m < s.dim(0); ++m) {
            os << c;
            for (std::size_t k = 0; k < K; ++k) os << ',' << format_double(s.at(m, k));
            const bool has = ds.labeled[c][m] != 0;
            os << ',' << (has ? format_double(ds.targets[c][m]) : std::string()) << ','
               << (has ? 1 : 0) << '\n';
        }
    }
}

LabeledSetDataset synth_clusters(const ClusterSynthOptions& o, Rng& rng) {
    if (o.min_size < 1 || o.max_size < o.min_size) throw ConfigError("invalid cluster size range");
    if (o.features < 1) throw ConfigError("clusters need at least one feature");
    if (!(o.labeled_fraction >= 0.0 && o.labeled_fraction <= 1.0)) {
        throw ConfigError("labeled fraction must lie in [0, 1]");
    }
    const std::size_t K = o.features;
    // Per-feature response to redshift and to member brightness.
    std::vector<double> a(K), b(K);
    for (std::size_t k = 0; k < K; ++k) {
        a[k] = standard_normal(rng);
        b[k] = standard_normal(rng);
    }

    LabeledSetDataset ds;
    ds.task = Task::regression;
    for (std::size_t c = 0; c < o.count; ++c) {
        const std::size_t n = o.min_size + uniform_index(rng, o.max_size - o.min_size + 1);
        const double zc = uniform(rng, 0.05, 0.6);
        Tensor set(Shape{n, K});
        std::vector<double> targets(n);
        std::vector<std::uint8_t> labeled(n);
        for (std::size_t m = 0; m < n; ++m) {
            const double brightness = standard_normal(rng);
            for (std::size_t k = 0; k < K; ++k) {
                set[m * K + k] = a[k] * 3.0 * zc + b[k] * brightness + o.noise * standard_normal(rng);
            }
            targets[m] = zc + o.member_scatter * standard_normal(rng);
            labeled[m] = bernoulli(rng, o.labeled_fraction) ? 1 : 0;
        }
        ds.sets.push_back(std::move(set));
        ds.targets.push_back(std::move(targets));
        ds.labeled.push_back(std::move(labeled));
        ds.latent.push_back(zc);
    }
    return ds;
}

}  // namespace setnet::data

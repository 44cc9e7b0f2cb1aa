#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "setnet/data.hpp"
#include "setnet/error.hpp"
#include "setnet/text.hpp"

namespace setnet::data {

namespace {

Point3 sub(const Point3& a, const Point3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Point3 cross(const Point3& a, const Point3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Point3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

}  // namespace

double TriangleMesh::face_area(std::size_t f) const {
    const auto& [i, j, k] = faces.at(f);
    return 0.5 * norm(cross(sub(vertices.at(j), vertices.at(i)), sub(vertices.at(k), vertices.at(i))));
}

double TriangleMesh::total_area() const {
    double a = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) a += face_area(f);
    return a;
}

void TriangleMesh::validate() const {
    for (const auto& f : faces)
        for (auto v : f)
            if (v >= vertices.size()) throw FormatError("face references missing vertex " + std::to_string(v));
    bool any_area = false;
    for (std::size_t f = 0; f < faces.size() && !any_area; ++f) any_area = face_area(f) > 0.0;
    if (!any_area) throw DegenerateError("mesh has no face with positive area");
}

// ---------------------------------------------------------------------------
// OFF

TriangleMesh read_off(std::istream& is, std::vector<std::string>* warnings) {
    std::size_t line_no = 0;
    std::string line;
    // Next non-empty, non-comment line, comments stripped.
    auto next = [&]() -> bool {
        while (std::getline(is, line)) {
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            if (!trim(line).empty()) return true;
        }
        return false;
    };
    auto fail = [&](const std::string& msg) {
        return FormatError("OFF line " + std::to_string(line_no) + ": " + msg);
    };

    if (!next()) throw fail("empty file");
    std::string header(trim(line));
    if (header.rfind("OFF", 0) != 0) throw fail("missing OFF header");
    std::string counts = header.substr(3);
    if (trim(counts).empty()) {
        if (!next()) throw fail("missing element counts");
        counts = line;
    }
    std::size_t nv = 0, nf = 0, ne = 0;
    {
        std::istringstream cs(counts);
        if (!(cs >> nv >> nf)) throw fail("bad element counts");
        cs >> ne;
    }

    TriangleMesh mesh;
    mesh.vertices.reserve(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        if (!next()) throw fail("expected " + std::to_string(nv) + " vertices");
        std::istringstream vs(line);
        std::string tok[3];
        Point3 p{};
        for (int c = 0; c < 3; ++c) {
            if (!(vs >> tok[c])) throw fail("vertex needs 3 coordinates");
            auto d = parse_double(tok[c]);
            if (!d) throw fail("bad coordinate '" + tok[c] + "'");
            p[c] = *d;
        }
        mesh.vertices.push_back(p);
    }
    bool warned = false;
    for (std::size_t f = 0; f < nf; ++f) {
        if (!next()) throw fail("expected " + std::to_string(nf) + " faces");
        std::istringstream fs(line);
        std::size_t k = 0;
        if (!(fs >> k) || k < 3) throw fail("face needs at least 3 vertices");
        std::vector<std::size_t> idx(k);
        for (auto& i : idx) {
            if (!(fs >> i)) throw fail("face lists fewer indices than declared");
            if (i >= nv) throw fail("face index " + std::to_string(i) + " out of range");
        }
        std::string extra;
        if (fs >> extra && warnings && !warned) {
            warnings->push_back("OFF line " + std::to_string(line_no) +
                                ": ignoring trailing face tokens");
            warned = true;
        }
        for (std::size_t t = 1; t + 1 < k; ++t) mesh.faces.push_back({idx[0], idx[t], idx[t + 1]});
    }
    mesh.validate();
    return mesh;
}

TriangleMesh load_off(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path.string());
    return read_off(is, warnings);
}

TriangleMesh box_mesh(const Point3& lo, const Point3& hi) {
    TriangleMesh m;
    for (int i = 0; i < 8; ++i) {
        m.vertices.push_back({(i & 1) ? hi[0] : lo[0], (i & 2) ? hi[1] : lo[1], (i & 4) ? hi[2] : lo[2]});
    }
    // Two triangles per face: -x, +x, -y, +y, -z, +z.
    const std::size_t quads[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                                     {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
    for (const auto& q : quads) {
        m.faces.push_back({q[0], q[1], q[2]});
        m.faces.push_back({q[0], q[2], q[3]});
    }
    return m;
}

// ---------------------------------------------------------------------------
// Sampling

Tensor sample_point_cloud(const TriangleMesh& mesh, std::size_t m, Rng& rng) {
    for (const auto& f : mesh.faces)
        for (auto v : f)
            if (v >= mesh.vertices.size()) throw FormatError("face references missing vertex");
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        total += mesh.face_area(f);
        cumulative[f] = total;
    }
    if (!(total > 0.0)) throw DegenerateError("mesh has zero total area");

    Tensor cloud(Shape{m, 3});
    for (std::size_t i = 0; i < m; ++i) {
        const double pick = uniform01(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        const std::size_t f = std::min<std::size_t>(it - cumulative.begin(), mesh.faces.size() - 1);
        double r1 = uniform01(rng), r2 = uniform01(rng);
        if (r1 + r2 > 1.0) {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        const auto& a = mesh.vertices[mesh.faces[f][0]];
        const auto& b = mesh.vertices[mesh.faces[f][1]];
        const auto& c = mesh.vertices[mesh.faces[f][2]];
        for (int d = 0; d < 3; ++d) cloud[i * 3 + d] = a[d] + r1 * (b[d] - a[d]) + r2 * (c[d] - a[d]);
    }
    return cloud;
}

Augmentation draw_augmentation(Rng& rng) {
    Augmentation aug;
    aug.angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    aug.scale = uniform(rng, 0.8, 1.0 / 0.8);
    return aug;
}

Tensor apply_augmentation(const Tensor& cloud, const Augmentation& aug) {
    if (cloud.rank() != 2 || cloud.dim(1) != 3) {
        throw DimensionError("point cloud must be [m, 3], got " + shape_string(cloud.shape()));
    }
    const double c = std::cos(aug.angle), s = std::sin(aug.angle);
    Tensor out(cloud.shape());
    for (std::size_t i = 0; i < cloud.dim(0); ++i) {
        const double x = cloud[i * 3], y = cloud[i * 3 + 1], z = cloud[i * 3 + 2];
        out[i * 3] = aug.scale * (c * x - s * y);
        out[i * 3 + 1] = aug.scale * (s * x + c * y);
        out[i * 3 + 2] = aug.scale * z;
    }
    return out;
}

Tensor augment_cloud(const Tensor& cloud, Rng& rng) {
    return apply_augmentation(cloud, draw_augmentation(rng));
}

void write_xyz(std::ostream& os, const Tensor& cloud) {
    if (cloud.rank() != 2 || cloud.dim(1) != 3) throw DimensionError("point cloud must be [m, 3]");
    for (std::size_t i = 0; i < cloud.dim(0); ++i) {
        os << format_double(cloud[i * 3]) << ' ' << format_double(cloud[i * 3 + 1]) << ' '
           << format_double(cloud[i * 3 + 2]) << '\n';
    }
}

Tensor read_xyz(std::istream& is) {
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        int n = 0;
        while (ls >> tok) {
            auto v = parse_double(tok);
            if (!v || n == 3) throw FormatError("xyz line " + std::to_string(line_no) + " malformed");
            values.push_back(*v);
            ++n;
        }
        if (n != 3) throw FormatError("xyz line " + std::to_string(line_no) + " needs 3 values");
    }
    const std::size_t m = values.size() / 3;
    return Tensor(Shape{m, 3}, std::move(values));
}

// ---------------------------------------------------------------------------
// Analytic shapes

std::string_view to_string(ShapeClass c) noexcept {
    switch (c) {
        case ShapeClass::sphere: return "sphere";
        case ShapeClass::cube: return "cube";
        case ShapeClass::cylinder: return "cylinder";
        case ShapeClass::torus: return "torus";
        case ShapeClass::cone: return "cone";
    }
    return "unknown";
}

ShapeClass parse_shape(std::string_view s) {
    for (auto c : {ShapeClass::sphere, ShapeClass::cube, ShapeClass::cylinder, ShapeClass::torus,
                   ShapeClass::cone}) {
        if (s == to_string(c)) return c;
    }
    throw ConfigError("unknown shape class '" + std::string(s) + "'");
}

namespace {

Point3 sample_disk(double radius, double z, Rng& rng) {
    const double r = radius * std::sqrt(uniform01(rng));
    const double t = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return {r * std::cos(t), r * std::sin(t), z};
}

Point3 sample_surface(ShapeClass shape, Rng& rng) {
    constexpr double pi = std::numbers::pi;
    switch (shape) {
        case ShapeClass::sphere: {
            Point3 p{standard_normal(rng), standard_normal(rng), standard_normal(rng)};
            const double n = norm(p);
            return {p[0] / n, p[1] / n, p[2] / n};
        }
        case ShapeClass::cube: {
            const std::size_t face = uniform_index(rng, 6);
            const double u = uniform(rng, -1.0, 1.0), v = uniform(rng, -1.0, 1.0);
            const double w = face % 2 ? 1.0 : -1.0;
            switch (face / 2) {
                case 0: return {w, u, v};
                case 1: return {u, w, v};
                default: return {u, v, w};
            }
        }
        case ShapeClass::cylinder: {
            // side area 4 pi, each cap pi
            const double pick = uniform01(rng) * 6.0;
            if (pick < 1.0) return sample_disk(1.0, -1.0, rng);
            if (pick < 2.0) return sample_disk(1.0, 1.0, rng);
            const double t = uniform(rng, 0.0, 2.0 * pi);
            return {std::cos(t), std::sin(t), uniform(rng, -1.0, 1.0)};
        }
        case ShapeClass::torus: {
            constexpr double R = 1.0, r = 0.35;
            // Area element is proportional to (R + r cos(theta)).
            double theta = 0.0;
            do {
                theta = uniform(rng, 0.0, 2.0 * pi);
            } while (uniform01(rng) * (R + r) > R + r * std::cos(theta));
            const double phi = uniform(rng, 0.0, 2.0 * pi);
            const double ring = R + r * std::cos(theta);
            return {ring * std::cos(phi), ring * std::sin(phi), r * std::sin(theta)};
        }
        case ShapeClass::cone: {
            // apex at z = 1, base radius 1 at z = -1
            const double slant = std::sqrt(1.0 + 4.0);
            const double lateral = pi * slant, base = pi;
            if (uniform01(rng) * (lateral + base) < base) return sample_disk(1.0, -1.0, rng);
            const double rho = std::sqrt(uniform01(rng));  // radius fraction, lateral area ~ rho
            const double t = uniform(rng, 0.0, 2.0 * pi);
            return {rho * std::cos(t), rho * std::sin(t), 1.0 - 2.0 * rho};
        }
    }
    return {0.0, 0.0, 0.0};
}

}  // namespace

Tensor sample_shape(ShapeClass shape, std::size_t m, Rng& rng) {
    Tensor cloud(Shape{m, 3});
    for (std::size_t i = 0; i < m; ++i) {
        const Point3 p = sample_surface(shape, rng);
        for (int d = 0; d < 3; ++d) cloud[i * 3 + d] = p[d];
    }
    return cloud;
}

LabeledSetDataset synth_shapes(std::span<const ShapeClass> classes, std::size_t m,
                               std::size_t count, Rng& rng) {
    if (classes.empty()) throw ContractError("need at least one shape class");
    if (m == 0) throw ContractError("clouds need at least one point");
    LabeledSetDataset ds;
    ds.task = Task::classification;
    ds.num_classes = classes.size();
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t label = uniform_index(rng, classes.size());
        ds.sets.push_back(sample_shape(classes[label], m, rng));
        ds.labels.push_back(label);
    }
    return ds;
}

LabeledSetDataset load_mesh_dataset(const std::filesystem::path& list, std::size_t m, Rng& rng) {
    std::ifstream is(list);
    if (!is) throw FormatError("cannot open mesh list " + list.string());
    LabeledSetDataset ds;
    ds.task = Task::classification;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        std::istringstream ls(line);
        std::string path;
        std::size_t label = 0;
        if (!(ls >> path >> label)) {
            throw FormatError("mesh list line " + std::to_string(line_no) + ": need '<path> <label>'");
        }
        std::filesystem::path p(path);
        if (p.is_relative()) p = list.parent_path() / p;
        ds.sets.push_back(sample_point_cloud(load_off(p), m, rng));
        ds.labels.push_back(label);
        ds.num_classes = std::max(ds.num_classes, label + 1);
    }
    if (ds.sets.empty()) throw FormatError("mesh list " + list.string() + " is empty");
    return ds;
}

}  // namespace setnet::data

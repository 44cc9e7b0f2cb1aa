#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "setnet/layers.hpp"
#include "setnet/random.hpp"
#include "setnet/tensor.hpp"

namespace setnet::data {

enum class Task { classification, regression };

/// Variable-cardinality sets with either one class label per set or one
/// (possibly unavailable) regression target per member.
struct LabeledSetDataset {
    Task task = Task::classification;
    std::vector<Tensor> sets;  // each [n_b, K]

    // classification
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;

    // regression
    std::vector<std::vector<double>> targets;
    std::vector<std::vector<std::uint8_t>> labeled;
    /// Set-level ground truth kept by synthetic generators; may be empty.
    std::vector<double> latent;

    /// Source instance indices each set was built from; may be empty.
    std::vector<std::vector<std::size_t>> sources;

    std::size_t size() const noexcept { return sets.size(); }
    std::size_t channels() const;
    /// Throws ContractError when the invariants above are violated.
    void validate() const;
    /// New dataset holding the listed sets, in order.
    LabeledSetDataset subset(std::span<const std::size_t> indices) const;
};

/// Pads the listed sets into one batch (N_max = largest listed set).
SetBatch collate(const LabeledSetDataset& ds, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// MNIST

struct DigitImages {
    Tensor images;  // [count, rows, cols], values in [0, 1]
    std::vector<std::uint8_t> labels;

    std::size_t count() const { return labels.size(); }
    std::size_t pixels() const { return images.dim(1) * images.dim(2); }
};

inline constexpr std::uint32_t idx_images_magic = 0x00000803;  // 2051
inline constexpr std::uint32_t idx_labels_magic = 0x00000801;  // 2049

/// Big-endian IDX image file; bytes scaled to [0, 1].
Tensor read_idx_images(std::istream& is);
std::vector<std::uint8_t> read_idx_labels(std::istream& is);
DigitImages load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Stroke-rendered 28x28 digits with random affine distortion, stroke width
/// and pixel noise. Stand-in for MNIST when no IDX files are available.
DigitImages synth_digits(std::size_t count, Rng& rng);

/// Splits instance indices 0..total-1 into two disjoint shuffled pools.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_instances(
    std::size_t total, double first_fraction, Rng& rng);

/// `count` sets of `n` flattened images drawn (with replacement across sets,
/// without replacement within a set) from `pool`, or from every image when
/// `pool` is empty. Label = sum of digits, in [0, 9n]; 9n + 1 classes.
LabeledSetDataset build_sum_sets(const DigitImages& images, std::size_t n, std::size_t count,
                                 Rng& rng, std::span<const std::size_t> pool = {});

// ---------------------------------------------------------------------------
// Meshes and point clouds

using Point3 = std::array<double, 3>;

struct TriangleMesh {
    std::vector<Point3> vertices;
    std::vector<std::array<std::size_t, 3>> faces;

    double face_area(std::size_t f) const;
    double total_area() const;
    /// Index ranges and at least one face with positive area.
    void validate() const;
};

/// ASCII OFF, including the ModelNet variant with counts glued to the
/// "OFF" token. Polygons are fan-triangulated. Trailing per-face tokens are
/// ignored and reported through `warnings` when given.
TriangleMesh read_off(std::istream& is, std::vector<std::string>* warnings = nullptr);
TriangleMesh load_off(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Closed axis-aligned box [lo, hi]^3 made of 12 triangles.
TriangleMesh box_mesh(const Point3& lo, const Point3& hi);

/// Area-weighted triangle choice, uniform barycentric point inside it. [m, 3].
Tensor sample_point_cloud(const TriangleMesh& mesh, std::size_t m, Rng& rng);

struct Augmentation {
    double angle = 0.0;  // about z, radians
    double scale = 1.0;
};

/// angle ~ U[0, 2 pi), scale ~ U[0.8, 1.25].
Augmentation draw_augmentation(Rng& rng);
/// Rotates about z and then scales uniformly.
Tensor apply_augmentation(const Tensor& cloud, const Augmentation& aug);
Tensor augment_cloud(const Tensor& cloud, Rng& rng);

/// One "x y z" line per point.
void write_xyz(std::ostream& os, const Tensor& cloud);
Tensor read_xyz(std::istream& is);

enum class ShapeClass { sphere, cube, cylinder, torus, cone };
std::string_view to_string(ShapeClass c) noexcept;
ShapeClass parse_shape(std::string_view s);

/// Area-uniform points on a canonical surface: unit sphere, cube [-1,1]^3,
/// cylinder r=1 |z|<=1 with caps, torus R=1 r=0.35 around z, cone r=1
/// z in [-1,1] with base.
Tensor sample_shape(ShapeClass shape, std::size_t m, Rng& rng);

/// `count` clouds, class chosen uniformly; label = position in `classes`.
LabeledSetDataset synth_shapes(std::span<const ShapeClass> classes, std::size_t m,
                               std::size_t count, Rng& rng);

/// Reads a list file of "<path-to-off> <label>" lines and samples one cloud
/// of m points per mesh.
LabeledSetDataset load_mesh_dataset(const std::filesystem::path& list, std::size_t m, Rng& rng);

// ---------------------------------------------------------------------------
// Galaxy-cluster style catalogs

struct CatalogColumns {
    std::string id_column;
    std::vector<std::string> feature_columns;
    std::string label_column;
    /// Non-zero marks a row whose label is available.
    std::string mask_column;
};

/// Comma-separated rows grouped by id into sets (first-appearance order).
/// A header row is detected by a non-numeric first line; without one,
/// columns are addressed by zero-based index ("0", "1", ...). Label cells
/// may be empty only where the mask is zero.
LabeledSetDataset read_cluster_catalog(std::istream& is, const CatalogColumns& columns);
LabeledSetDataset load_cluster_catalog(const std::filesystem::path& path,
                                       const CatalogColumns& columns);

/// Header: cluster_id,f0..f{K-1},z_spec,has_spec. Unlabeled z_spec cells are empty.
void write_cluster_catalog(std::ostream& os, const LabeledSetDataset& ds);
CatalogColumns default_catalog_columns(std::size_t features);

struct ClusterSynthOptions {
    std::size_t count = 500;
    std::size_t min_size = 10;
    std::size_t max_size = 40;
    std::size_t features = 17;
    double labeled_fraction = 0.3;
    /// Per-member, per-feature photometric noise.
    double noise = 1.0;
    /// Member redshift spread around the cluster redshift.
    double member_scatter = 0.005;
};

/// Each cluster draws a shared redshift z_c ~ U[0.05, 0.6]; member features
/// mix z_c, a member-specific brightness and independent noise, so a single
/// member pins z_c down only loosely while the set does much better.
LabeledSetDataset synth_clusters(const ClusterSynthOptions& options, Rng& rng);

}  // namespace setnet::data

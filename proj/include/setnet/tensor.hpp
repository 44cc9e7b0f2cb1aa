#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "setnet/random.hpp"

namespace setnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Rank 0 is a scalar.
class Tensor {
public:
    Tensor() : shape_{}, data_(1, 0.0) {}
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor vector(std::initializer_list<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    /// Entries uniform on [lo, hi).
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);
    static Tensor normal(Shape shape, Rng& rng, double stddev = 1.0);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const;

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // Bounds-checked multi-index access.
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j, std::size_t k);
    double at(std::size_t i, std::size_t j, std::size_t k) const;

    /// Value of a one-element tensor.
    double item() const;

    bool all_finite() const noexcept;

    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Throws NumericError mentioning `context` if any entry is NaN or infinite.
void require_finite(const Tensor& t, const std::string& context);

/// Bijection on {0, ..., n-1}. Acting on a tensor along an axis produces
/// output[i] = input[mapping[i]].
class Permutation {
public:
    explicit Permutation(std::vector<std::size_t> mapping);

    static Permutation identity(std::size_t n);
    static Permutation random(std::size_t n, Rng& rng);
    /// Swap of positions i and j.
    static Permutation transposition(std::size_t n, std::size_t i, std::size_t j);

    std::size_t size() const noexcept { return mapping_.size(); }
    std::size_t operator[](std::size_t i) const noexcept { return mapping_[i]; }
    const std::vector<std::size_t>& mapping() const noexcept { return mapping_; }

    Permutation inverse() const;

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<std::size_t> mapping_;
};

/// Permutation equivalent to acting by `first` and then by `second`:
/// apply(apply(x, first), second) == apply(x, compose(second, first)).
Permutation compose(const Permutation& second, const Permutation& first);

/// Dense n x n matrix P with (P x)[i] = x[mapping[i]].
Tensor permutation_matrix(const Permutation& p);

Tensor apply_permutation(const Tensor& x, const Permutation& p, std::size_t axis);

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---------------------------------------------------------------------------
// Reductions

enum class ReduceKind { sum, max, mean };

struct Reduction {
    Tensor value;
    /// For max: flat index into the reduced axis for each output entry. Ties
    /// go to the lowest index. Empty for sum and mean.
    std::vector<std::size_t> argmax;
};

/// Reduces one axis, accumulating left to right. The output drops the axis.
Reduction reduce_over_axis(const Tensor& x, std::size_t axis, ReduceKind kind);

double sum_all(const Tensor& x) noexcept;

// ---------------------------------------------------------------------------
// Elementwise

enum class Activation { identity, tanh, elu, sigmoid };

double activate(Activation fn, double v) noexcept;
/// Derivative expressed through the input `v` and output `y` = activate(fn, v).
double activate_derivative(Activation fn, double v, double y) noexcept;

Tensor elementwise(const Tensor& x, Activation fn);

/// Result shape of trailing-dimension broadcasting; throws DimensionError.
Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

/// Sums a broadcast result back down to `target`, the shape of one operand.
Tensor reduce_to_shape(const Tensor& x, const Shape& target);

Tensor concatenate(std::span<const Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);

/// Max absolute entry difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);
/// Shape followed by the values in row-major order.
std::ostream& operator<<(std::ostream& os, const Tensor& t);

}  // namespace setnet

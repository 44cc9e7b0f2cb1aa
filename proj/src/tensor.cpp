#include "setnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>

#include "setnet/error.hpp"

namespace setnet {

std::size_t shape_size(const Shape& shape) noexcept {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw DimensionError("tensor shape " + shape_string(shape_) + " holds " +
                             std::to_string(shape_size(shape_)) + " values, got " +
                             std::to_string(data_.size()));
    }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor(Shape{r, c}, std::move(data));
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = setnet::uniform(rng, lo, hi);
    return t;
}

Tensor Tensor::normal(Shape shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = stddev * standard_normal(rng);
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_string(shape_));
    }
    return shape_[axis];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    if (rank() != 2 || i >= shape_[0] || j >= shape_[1]) throw DimensionError("bad 2-index");
    return data_[i * shape_[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return const_cast<Tensor&>(*this).at(i, j);
}

double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
    if (rank() != 3 || i >= shape_[0] || j >= shape_[1] || k >= shape_[2]) {
        throw DimensionError("bad 3-index");
    }
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
    return const_cast<Tensor&>(*this).at(i, j, k);
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const& {
    Tensor copy = *this;
    return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
    if (shape_size(shape) != data_.size()) {
        throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                             shape_string(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
}

void require_finite(const Tensor& t, const std::string& context) {
    if (!t.all_finite()) throw NumericError("non-finite value in " + context);
}

// ---------------------------------------------------------------------------
// Permutation

Permutation::Permutation(std::vector<std::size_t> mapping) : mapping_(std::move(mapping)) {
    std::vector<bool> seen(mapping_.size(), false);
    for (auto m : mapping_) {
        if (m >= mapping_.size() || seen[m]) {
            throw ContractError("permutation mapping is not a bijection");
        }
        seen[m] = true;
    }
}

Permutation Permutation::identity(std::size_t n) {
    std::vector<std::size_t> m(n);
    std::iota(m.begin(), m.end(), std::size_t{0});
    return Permutation(std::move(m));
}

Permutation Permutation::random(std::size_t n, Rng& rng) {
    std::vector<std::size_t> m(n);
    std::iota(m.begin(), m.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        std::swap(m[i - 1], m[uniform_index(rng, i)]);
    }
    return Permutation(std::move(m));
}

Permutation Permutation::transposition(std::size_t n, std::size_t i, std::size_t j) {
    if (i >= n || j >= n) throw ContractError("transposition index out of range");
    auto p = identity(n).mapping();
    std::swap(p[i], p[j]);
    return Permutation(std::move(p));
}

Permutation Permutation::inverse() const {
    std::vector<std::size_t> inv(mapping_.size());
    for (std::size_t i = 0; i < mapping_.size(); ++i) inv[mapping_[i]] = i;
    return Permutation(std::move(inv));
}

Permutation compose(const Permutation& second, const Permutation& first) {
    if (second.size() != first.size()) throw DimensionError("composing permutations of different size");
    std::vector<std::size_t> m(first.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = first[second[i]];
    return Permutation(std::move(m));
}

Tensor permutation_matrix(const Permutation& p) {
    const std::size_t n = p.size();
    Tensor m(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) m[i * n + p[i]] = 1.0;
    return m;
}

Tensor apply_permutation(const Tensor& x, const Permutation& p, std::size_t axis) {
    const auto& shape = x.shape();
    if (axis >= shape.size()) throw DimensionError("permutation axis out of range");
    if (shape[axis] != p.size()) {
        throw DimensionError("permutation of size " + std::to_string(p.size()) +
                             " applied to axis of length " + std::to_string(shape[axis]));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    const std::size_t n = shape[axis];
    Tensor out(shape);
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* from = src.data() + (o * n + p[i]) * inner;
            std::copy(from, from + inner, dst.data() + (o * n + i) * inner);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

namespace {

void require_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(what) + " must be rank 2, got " + shape_string(t.shape()));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul lhs");
    require_matrix(b, "matmul rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    Tensor c(Shape{m, n});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = pc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_tn lhs");
    require_matrix(b, "matmul_tn rhs");
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul_tn " + shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
    }
    Tensor c(Shape{m, n});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = pa + p * m;
        const double* brow = pb + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* row = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_nt lhs");
    require_matrix(b, "matmul_nt rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        throw DimensionError("matmul_nt " + shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
    }
    Tensor c(Shape{m, n});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = pb + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            pc[i * n + j] = acc;
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor t(Shape{n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
    return t;
}

// ---------------------------------------------------------------------------
// Reductions

Reduction reduce_over_axis(const Tensor& x, std::size_t axis, ReduceKind kind) {
    const auto& shape = x.shape();
    if (axis >= shape.size()) throw DimensionError("reduction axis out of range");
    const std::size_t n = shape[axis];
    if (n == 0) throw EmptyReductionError("reduction over zero-length axis " + std::to_string(axis));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];

    Shape out_shape;
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (i != axis) out_shape.push_back(shape[i]);

    Reduction r{Tensor(out_shape), {}};
    auto src = x.data();
    auto dst = r.value.data();
    if (kind == ReduceKind::max) r.argmax.assign(outer * inner, 0);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < inner; ++j) {
            const std::size_t out_idx = o * inner + j;
            double acc = src[o * n * inner + j];
            std::size_t best = 0;
            for (std::size_t i = 1; i < n; ++i) {
                const double v = src[(o * n + i) * inner + j];
                if (kind == ReduceKind::max) {
                    if (v > acc) {
                        acc = v;
                        best = i;
                    }
                } else {
                    acc += v;
                }
            }
            if (kind == ReduceKind::mean) acc /= static_cast<double>(n);
            dst[out_idx] = acc;
            if (kind == ReduceKind::max) r.argmax[out_idx] = best;
        }
    }
    return r;
}

double sum_all(const Tensor& x) noexcept {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    return acc;
}

// ---------------------------------------------------------------------------
// Elementwise

double activate(Activation fn, double v) noexcept {
    switch (fn) {
        case Activation::identity: return v;
        case Activation::tanh: return std::tanh(v);
        case Activation::elu: return v > 0.0 ? v : std::expm1(v);
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-v));
    }
    return v;
}

double activate_derivative(Activation fn, double v, double y) noexcept {
    switch (fn) {
        case Activation::identity: return 1.0;
        case Activation::tanh: return 1.0 - y * y;
        case Activation::elu: return v > 0.0 ? 1.0 : y + 1.0;
        case Activation::sigmoid: return y * (1.0 - y);
    }
    return 1.0;
}

Tensor elementwise(const Tensor& x, Activation fn) {
    Tensor y = x;
    for (auto& v : y.data()) v = activate(fn, v);
    return y;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw DimensionError("cannot broadcast " + shape_string(a) + " with " + shape_string(b));
        }
        out[i] = da == 1 ? db : da;
    }
    return out;
}

namespace {

/// Strides of `shape` aligned to an output of rank `rank`, zero on broadcast axes.
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
    const std::size_t rank = out.size();
    std::vector<std::size_t> strides(rank, 0);
    std::size_t stride = 1;
    for (std::size_t i = shape.size(); i-- > 0;) {
        const std::size_t oi = i + (rank - shape.size());
        strides[oi] = shape[i] == 1 && out[oi] != 1 ? 0 : stride;
        stride *= shape[i];
    }
    return strides;
}

template <typename F>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, F&& f) {
    if (a.shape() == b.shape()) {
        Tensor out(a.shape());
        auto pa = a.data();
        auto pb = b.data();
        auto po = out.data();
        for (std::size_t i = 0; i < po.size(); ++i) po[i] = f(pa[i], pb[i]);
        return out;
    }
    const Shape out_shape = broadcast_shape(a.shape(), b.shape());
    Tensor out(out_shape);
    if (out.size() == 0) return out;
    const auto sa = broadcast_strides(a.shape(), out_shape);
    const auto sb = broadcast_strides(b.shape(), out_shape);
    const std::size_t rank = out_shape.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0, ib = 0;
    auto pa = a.data();
    auto pb = b.data();
    auto po = out.data();
    for (std::size_t flat = 0; flat < po.size(); ++flat) {
        po[flat] = f(pa[ia], pb[ib]);
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < out_shape[d]) break;
            ia -= sa[d] * idx[d];
            ib -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return broadcast_binary(a, b, [](double x, double y) { return x + y; });
}

Tensor subtract(const Tensor& a, const Tensor& b) {
    return broadcast_binary(a, b, [](double x, double y) { return x - y; });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
    return broadcast_binary(a, b, [](double x, double y) { return x * y; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    Tensor out = broadcast_binary(a, b, [](double x, double y) { return x / y; });
    require_finite(out, "divide");
    return out;
}

Tensor scale(const Tensor& x, double s) {
    Tensor y = x;
    for (auto& v : y.data()) v *= s;
    return y;
}

Tensor reduce_to_shape(const Tensor& x, const Shape& target) {
    if (x.shape() == target) return x;
    const Shape& shape = x.shape();
    if (broadcast_shape(shape, target) != shape) {
        throw DimensionError("cannot reduce " + shape_string(shape) + " to " + shape_string(target));
    }
    Tensor out(target);
    const auto st = broadcast_strides(target, shape);
    const std::size_t rank = shape.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t it = 0;
    auto px = x.data();
    auto po = out.data();
    for (std::size_t flat = 0; flat < px.size(); ++flat) {
        po[it] += px[flat];
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            it += st[d];
            if (idx[d] < shape[d]) break;
            it -= st[d] * idx[d];
            idx[d] = 0;
        }
    }
    return out;
}

Tensor concatenate(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concatenate needs at least one tensor");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) throw DimensionError("concatenate axis out of range");
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        if (p.rank() != first.size()) throw DimensionError("concatenate rank mismatch");
        for (std::size_t d = 0; d < first.size(); ++d) {
            if (d != axis && p.shape()[d] != first[d]) {
                throw DimensionError("concatenate shape mismatch: " + shape_string(first) + " vs " +
                                     shape_string(p.shape()));
            }
        }
        out_shape[axis] += p.shape()[axis];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
    for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
    Tensor out(out_shape);
    double* dst = out.data().data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (const auto& p : parts) {
            const std::size_t chunk = p.shape()[axis] * inner;
            const double* src = p.data().data() + o * chunk;
            dst = std::copy(src, src + chunk, dst);
        }
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) { return x.reshaped(std::move(shape)); }

std::ostream& operator<<(std::ostream& os, const Tensor& t) {
    os << shape_string(t.shape()) << " {";
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? ", " : "") << t[i];
    return os << '}';
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("comparing " + shape_string(a.shape()) + " with " +
                             shape_string(b.shape()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace setnet

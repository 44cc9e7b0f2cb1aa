#include "setnet/theorem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "setnet/text.hpp"
#include "setnet/error.hpp"

namespace setnet::theorem {

WeightMatrix::WeightMatrix(Tensor entries) : entries_(std::move(entries)) {
    if (entries_.rank() != 2 || entries_.dim(0) != entries_.dim(1)) {
        throw DimensionError("weight matrix must be square, got " + shape_string(entries_.shape()));
    }
}

WeightMatrix WeightMatrix::tied(std::size_t n, double lambda, double gamma) {
    Tensor t(Shape{n, n}, gamma);
    for (std::size_t i = 0; i < n; ++i) t[i * n + i] += lambda;
    return WeightMatrix(std::move(t));
}

namespace {

bool commutes_with(const Tensor& theta, const Permutation& p, double tol) {
    const Tensor pm = permutation_matrix(p);
    return max_abs_diff(matmul(theta, pm), matmul(pm, theta)) <= tol;
}

}  // namespace

bool commutes_with_all(const WeightMatrix& theta, CommuteMode mode) {
    const std::size_t n = theta.n();
    const Tensor& t = theta.entries();
    double scale = 1.0;
    for (double v : t.data()) scale = std::max(scale, std::abs(v));
    const double tol = 1e-12 * scale;

    if (mode == CommuteMode::exhaustive) {
        if (n > exhaustive_limit) {
            throw BudgetError("exhaustive commutation check limited to n <= " +
                              std::to_string(exhaustive_limit) + ", got " + std::to_string(n));
        }
        std::vector<std::size_t> m(n);
        std::iota(m.begin(), m.end(), std::size_t{0});
        do {
            if (!commutes_with(t, Permutation(m), tol)) return false;
        } while (std::next_permutation(m.begin(), m.end()));
        return true;
    }
    if (n > transposition_limit) {
        throw BudgetError("transposition check limited to n <= " +
                          std::to_string(transposition_limit));
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!commutes_with(t, Permutation::transposition(n, i, j), tol)) return false;
    return true;
}

Svd jacobi_svd(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("svd expects a matrix");
    const std::size_t m = a.dim(0), p = a.dim(1);
    Tensor u = a;
    Tensor v(Shape{p, p});
    for (std::size_t i = 0; i < p; ++i) v[i * p + i] = 1.0;
    auto col = [&](Tensor& t, std::size_t rows, std::size_t c, std::size_t r) -> double& {
        return t[r * (t.size() / rows) + c];
    };
    const double eps = 1e-15;
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < p; ++i) {
            for (std::size_t j = i + 1; j < p; ++j) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t r = 0; r < m; ++r) {
                    const double ui = col(u, m, i, r), uj = col(u, m, j, r);
                    alpha += ui * ui;
                    beta += uj * uj;
                    gamma += ui * uj;
                }
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t r = 0; r < m; ++r) {
                    const double ui = col(u, m, i, r), uj = col(u, m, j, r);
                    col(u, m, i, r) = c * ui - s * uj;
                    col(u, m, j, r) = s * ui + c * uj;
                }
                for (std::size_t r = 0; r < p; ++r) {
                    const double vi = col(v, p, i, r), vj = col(v, p, j, r);
                    col(v, p, i, r) = c * vi - s * vj;
                    col(v, p, j, r) = s * vi + c * vj;
                }
            }
        }
        if (!rotated) break;
    }
    Svd out{std::vector<double>(p, 0.0), std::move(v)};
    for (std::size_t c = 0; c < p; ++c) {
        double norm = 0.0;
        for (std::size_t r = 0; r < m; ++r) norm += col(u, m, c, r) * col(u, m, c, r);
        out.singular_values[c] = std::sqrt(norm);
    }
    return out;
}

std::vector<WeightMatrix> commutant_basis(std::size_t n) {
    if (n < 2 || n > exhaustive_limit) {
        throw ContractError("commutant_basis supports 2 <= n <= " +
                            std::to_string(exhaustive_limit) + ", got " + std::to_string(n));
    }
    const std::size_t unknowns = n * n;
    const std::size_t swaps = n * (n - 1) / 2;
    Tensor system(Shape{swaps * unknowns, unknowns});
    std::size_t row = 0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const Tensor pm = permutation_matrix(Permutation::transposition(n, a, b));
            // (theta P - P theta)[i][j] = sum_k theta[i][k] P[k][j] - P[i][k] theta[k][j]
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j, ++row) {
                    double* eq = system.data().data() + row * unknowns;
                    for (std::size_t k = 0; k < n; ++k) {
                        eq[i * n + k] += pm[k * n + j];
                        eq[k * n + j] -= pm[i * n + k];
                    }
                }
            }
        }
    }
    const Svd svd = jacobi_svd(system);
    const double sigma_max =
        *std::max_element(svd.singular_values.begin(), svd.singular_values.end());
    std::vector<WeightMatrix> basis;
    for (std::size_t c = 0; c < unknowns; ++c) {
        if (svd.singular_values[c] > 1e-8 * sigma_max) continue;
        Tensor b(Shape{n, n});
        for (std::size_t r = 0; r < unknowns; ++r) b[r] = svd.v[r * unknowns + c];
        basis.emplace_back(std::move(b));
    }
    return basis;
}

namespace {

Tensor sorted_rows(const Tensor& t) {
    const std::size_t n = t.dim(0);
    const std::size_t width = t.size() / std::max<std::size_t>(n, 1);
    std::vector<std::vector<double>> rows(n);
    for (std::size_t i = 0; i < n; ++i)
        rows[i].assign(t.data().begin() + i * width, t.data().begin() + (i + 1) * width);
    std::sort(rows.begin(), rows.end());
    Tensor out(t.shape());
    for (std::size_t i = 0; i < n; ++i) std::copy(rows[i].begin(), rows[i].end(), out.data().begin() + i * width);
    return out;
}

}  // namespace

EquivarianceReport check_equivariance_empirical(const SetFunction& f, std::size_t n,
                                                std::size_t channels, std::size_t trials,
                                                Rng& rng, double tolerance) {
    if (trials == 0) throw ContractError("equivariance check needs at least one trial");
    EquivarianceReport report;
    report.trials = trials;
    report.members = n;
    report.tolerance = tolerance;
    for (std::size_t t = 0; t < trials; ++t) {
        const Tensor x = Tensor::normal({n, channels}, rng);
        const Permutation p = Permutation::random(n, rng);
        const Tensor y = f(x);
        const Tensor yp = f(apply_permutation(x, p, 0));
        if (t == 0) report.per_member_output = y.rank() >= 1 && y.dim(0) == n;
        report.max_invariance_deviation =
            std::max(report.max_invariance_deviation, max_abs_diff(yp, y));
        if (report.per_member_output) {
            report.max_equivariance_deviation = std::max(
                report.max_equivariance_deviation, max_abs_diff(yp, apply_permutation(y, p, 0)));
            report.max_multiset_deviation =
                std::max(report.max_multiset_deviation, max_abs_diff(sorted_rows(yp), sorted_rows(y)));
        }
    }
    return report;
}

std::string to_key_values(const EquivarianceReport& r) {
    std::ostringstream os;
    os << "trials=" << r.trials << '\n'
       << "members=" << r.members << '\n'
       << "per_member_output=" << (r.per_member_output ? "true" : "false") << '\n';
    if (r.per_member_output) {
        os << "max_equivariance_deviation=" << format_double(r.max_equivariance_deviation) << '\n'
           << "max_multiset_deviation=" << format_double(r.max_multiset_deviation) << '\n';
    }
    os << "max_invariance_deviation=" << format_double(r.max_invariance_deviation) << '\n'
       << "tolerance=" << format_double(r.tolerance) << '\n'
       << "equivariant=" << (r.equivariant() ? "true" : "false") << '\n'
       << "invariant=" << (r.invariant() ? "true" : "false") << '\n'
       << "invariant_output_ordering=" << (r.invariant_output_ordering() ? "true" : "false") << '\n';
    return os.str();
}

}  // namespace setnet::theorem

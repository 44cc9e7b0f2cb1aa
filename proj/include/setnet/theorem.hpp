#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "setnet/random.hpp"
#include "setnet/tensor.hpp"

namespace setnet::theorem {

/// Square weight matrix acting on a length-n vector of set members.
class WeightMatrix {
public:
    explicit WeightMatrix(Tensor entries);
    /// lambda I + gamma 11^T
    static WeightMatrix tied(std::size_t n, double lambda, double gamma);

    std::size_t n() const { return entries_.dim(0); }
    const Tensor& entries() const { return entries_; }

private:
    Tensor entries_;
};

enum class CommuteMode { exhaustive, transpositions };

inline constexpr std::size_t exhaustive_limit = 7;
inline constexpr std::size_t transposition_limit = 64;

/// True iff theta P == P theta for every tested permutation matrix P, to an
/// absolute tolerance of 1e-12 scaled by max(1, max |theta|). Exhaustive mode
/// walks all n! permutations; transposition mode the n(n-1)/2 swaps, which
/// generate the symmetric group.
bool commutes_with_all(const WeightMatrix& theta, CommuteMode mode);

/// Right singular vectors and singular values from one-sided Jacobi.
struct Svd {
    std::vector<double> singular_values;  // one per column, unsorted
    Tensor v;                             // [cols, cols], column i pairs with value i
};
Svd jacobi_svd(const Tensor& a);

/// Orthonormal basis (Frobenius) of {theta : theta P = P theta for all
/// transpositions P}, found as the numerical null space of the stacked linear
/// system with singular values below 1e-8 * sigma_max treated as zero.
std::vector<WeightMatrix> commutant_basis(std::size_t n);

/// Maps [n, K] member features to a per-member [n, K'] output or any other
/// (e.g. pooled) tensor.
using SetFunction = std::function<Tensor(const Tensor&)>;

struct EquivarianceReport {
    std::size_t trials = 0;
    std::size_t members = 0;
    /// Output has one row per input member, so equivariance is testable.
    bool per_member_output = false;
    double max_equivariance_deviation = 0.0;  // max |f(px) - p f(x)|, per-member only
    double max_invariance_deviation = 0.0;    // max |f(px) - f(x)|
    double max_multiset_deviation = 0.0;      // rows compared after sorting, per-member only
    double tolerance = 1e-9;

    bool equivariant() const { return per_member_output && max_equivariance_deviation <= tolerance; }
    bool invariant() const { return max_invariance_deviation <= tolerance; }
    /// Output rows ignore input order entirely (e.g. sorting): the rows match as
    /// a multiset but do not follow the permutation.
    bool invariant_output_ordering() const {
        return per_member_output && !equivariant() && invariant();
    }
};

EquivarianceReport check_equivariance_empirical(const SetFunction& f, std::size_t n,
                                                std::size_t channels, std::size_t trials,
                                                Rng& rng, double tolerance = 1e-9);

/// One `key=value` per line.
std::string to_key_values(const EquivarianceReport& report);

}  // namespace setnet::theorem

#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace scovreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Number of upper-triangular entries (diagonal included) of a p x p matrix.
constexpr std::size_t vech_size(std::size_t p) noexcept { return p * (p + 1) / 2; }

/// Position of entry (j, k) in the row-major upper-triangular packing
/// (B11, B12, ..., B1p, B22, ..., Bpp). Order of j and k does not matter.
constexpr std::size_t vech_index(std::size_t p, std::size_t j, std::size_t k) noexcept {
    if (j > k) {
        const std::size_t t = j;
        j = k;
        k = t;
    }
    return j * p - j * (j + 1) / 2 + k;
}

/// Inverse of vech_index: the (j, k) pair with j <= k.
struct VechPair {
    std::size_t j;
    std::size_t k;
};

/// Table of (j, k) pairs for every packed position of a p x p matrix.
std::vector<VechPair> vech_pairs(std::size_t p);

/// Packs the upper triangle of a square matrix.
Vector vech(const Matrix& m);

/// Expands a packed upper triangle to a symmetric p x p matrix.
Matrix unvech(const Eigen::Ref<const Vector>& packed, std::size_t p);

/// The q + 1 symmetric p x p coefficient matrices B0..Bq of the covariance
/// regression Sigma(x) = B0 + sum_l x_l Bl.
///
/// Each layer is stored as its packed upper triangle, one row of a
/// (q + 1) x p(p+1)/2 matrix, so symmetry holds by construction.
class CoefficientStack {
public:
    CoefficientStack() = default;

    /// Zero stack with p responses and q covariates.
    CoefficientStack(std::size_t p, std::size_t q);

    /// Wraps an existing packed matrix with q + 1 rows and p(p+1)/2 columns.
    CoefficientStack(std::size_t p, Matrix packed);

    /// Builds from full matrices; each is symmetrized as (B + B')/2.
    static CoefficientStack from_matrices(const std::vector<Matrix>& mats);

    std::size_t p() const noexcept { return p_; }
    std::size_t q() const noexcept { return layers() == 0 ? 0 : layers() - 1; }
    std::size_t layers() const noexcept { return static_cast<std::size_t>(packed_.rows()); }

    double operator()(std::size_t l, std::size_t j, std::size_t k) const {
        return packed_(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(vech_index(p_, j, k)));
    }
    void set(std::size_t l, std::size_t j, std::size_t k, double value) {
        packed_(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(vech_index(p_, j, k))) = value;
    }

    /// Dense symmetric p x p copy of layer l.
    Matrix matrix(std::size_t l) const;

    const Matrix& packed() const noexcept { return packed_; }
    Matrix& packed() noexcept { return packed_; }

    auto layer(std::size_t l) { return packed_.row(static_cast<Eigen::Index>(l)); }
    auto layer(std::size_t l) const { return packed_.row(static_cast<Eigen::Index>(l)); }

    bool layer_is_zero(std::size_t l) const;

    /// Count of nonzero packed entries in layer l.
    std::size_t nonzeros(std::size_t l) const;

private:
    std::size_t p_ = 0;
    Matrix packed_;
};

/// Covariate box [lower_l, upper_l] used by the positive-definiteness condition.
struct CovariateBounds {
    Vector lower;
    Vector upper;

    /// The box [-1, 1]^q that centered, max-abs scaled covariates live in.
    static CovariateBounds unit(std::size_t q);

    std::size_t size() const noexcept { return static_cast<std::size_t>(lower.size()); }

    /// Throws InputError unless lower <= upper entrywise and all entries are finite.
    void validate() const;
};

} // namespace scovreg

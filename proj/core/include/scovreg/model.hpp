#pragma once

#include <cstddef>
#include <utility>

#include "scovreg/stack.hpp"

namespace scovreg {

/// How the conditional mean E(y | x) is removed before modelling covariances.
enum class MeanMode {
    ColumnMean,       ///< subtract per-response sample means
    LinearRegression, ///< subtract per-response OLS fits on [1, Xraw]
};

/// Everything needed to map raw (Y, Xraw) onto the centered, scaled coordinates
/// of a fit. Applied unchanged to held-out rows so no test information leaks.
struct Centering {
    MeanMode mode = MeanMode::ColumnMean;
    /// (q + 1) x p mean coefficients on [1, Xraw]; only row 0 is nonzero for ColumnMean.
    Matrix mean_coef;
    /// Per-covariate centers and max-abs scales, length q.
    Vector x_center;
    Vector x_scale;

    /// Residuals Y - [1, Xraw] * mean_coef.
    Matrix residuals(const Matrix& y, const Matrix& xraw) const;
    /// [1, (Xraw - center) / scale].
    Matrix design(const Matrix& xraw) const;
};

/// Residuals Z (n x p), design X (n x (q+1)) with a leading ones column and
/// covariate columns centered and scaled to [-1, 1], plus the box they live in.
struct CenteredDesign {
    Matrix z;
    Matrix x;
    CovariateBounds bounds;
    Centering centering;

    std::size_t n() const noexcept { return static_cast<std::size_t>(z.rows()); }
    std::size_t p() const noexcept { return static_cast<std::size_t>(z.cols()); }
    std::size_t q() const noexcept { return static_cast<std::size_t>(x.cols()) - 1; }
};

/// Element-wise (lambda) and group (lambda_g) penalty levels.
struct PenaltyConfig {
    double lambda = 0.0;
    double lambda_g = 0.0;

    void validate() const;
};

/// Centers responses and covariates. Covariates are centered then divided by
/// their max-abs so every entry lies in [-1, 1]; the centers and scales are kept
/// for mapping coefficients back to the original covariate scale.
/// Throws InputError for n < 2, mismatched rows, non-finite entries, or a
/// constant covariate column.
CenteredDesign center_data(const Matrix& y, const Matrix& xraw, MeanMode mode = MeanMode::ColumnMean);

/// Applies an existing centering (fit on other rows) to new data.
CenteredDesign apply_centering(const Matrix& y, const Matrix& xraw, const Centering& centering);

/// Sigma(x) = B0 + sum_l x_l Bl.
Matrix evaluate_sigma(const CoefficientStack& stack, const Eigen::Ref<const Vector>& x);

/// Eigen-split of a symmetric matrix into PSD and NSD parts with B = plus + minus.
std::pair<Matrix, Matrix> split_pos_neg(const Matrix& b);

/// Smallest eigenvalue of B0 + sum_l (upper_l Bl^- + lower_l Bl^+). A positive
/// value certifies Sigma(x) is positive definite over the whole covariate box.
double pd_margin(const CoefficientStack& stack, const CovariateBounds& bounds);

/// Sparse group lasso penalty. The diagonal of B0 is never penalized; B0 has no
/// group term; diagonals of B1..Bq take part in both the l1 and the group term.
double penalty_value(const CoefficientStack& stack, const PenaltyConfig& cfg);

/// Data summaries that fully determine the least-squares loss
///   (1/2n) sum_{j<=k} sum_i (z_ij z_ik - sum_l x_il B_l,jk)^2
/// = 0.5 * ww - <B, xw> + 0.5 * <B, gram * B>
/// with B the packed (q+1) x p(p+1)/2 stack.
struct CrossMoments {
    std::size_t n = 0;
    std::size_t p = 0;
    Matrix gram; ///< X'X / n
    Matrix xw;   ///< X'W / n, W the n x p(p+1)/2 matrix of products z_ij z_ik
    double ww = 0.0; ///< sum of squared products divided by n

    std::size_t layers() const noexcept { return static_cast<std::size_t>(gram.rows()); }
};

/// n x p(p+1)/2 matrix of pairwise products z_ij z_ik in vech order.
Matrix pairwise_products(const Matrix& z);

CrossMoments cross_moments(const CenteredDesign& design);
CrossMoments cross_moments(const Matrix& z, const Matrix& x);

/// Unpenalized least-squares loss from summaries.
double loss(const CrossMoments& moments, const CoefficientStack& stack);

/// Unconstrained objective: loss plus penalty.
double objective(const CrossMoments& moments, const CoefficientStack& stack, const PenaltyConfig& cfg);
double objective(const CenteredDesign& design, const CoefficientStack& stack, const PenaltyConfig& cfg);

/// Maps a stack fit on centered, scaled covariates back to the raw covariate
/// scale: Bl / scale_l for l >= 1 and B0 - sum_l center_l * Bl / scale_l.
CoefficientStack to_original_scale(const CoefficientStack& scaled, const Centering& centering);

/// Inverse of to_original_scale.
CoefficientStack to_scaled(const CoefficientStack& original, const Centering& centering);

} // namespace scovreg

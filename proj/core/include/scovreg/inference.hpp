#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "scovreg/model.hpp"

namespace scovreg {

/// Outcome of one direction-vector program
///   minimize m' Theta m  s.t. |Theta m - e_l|_inf <= mu, |X m|_inf <= n^beta.
struct DirectionRow {
    Vector m;
    double mu = 0.0;              ///< constraint level actually used
    std::size_t relaxations = 0;  ///< times mu was doubled to reach feasibility
    double objective = 0.0;       ///< m' Theta m
    double gram_violation = 0.0;  ///< max(0, |Theta m - e_l|_inf - mu)
    double design_violation = 0.0; ///< max(0, |X m|_inf - n^beta)
};

/// Rows m_0..m_q stacked as a (q+1) x (q+1) matrix: an approximate inverse of Theta.
struct DirectionMatrix {
    Matrix m;
    double mu = 0.0;
    double beta = 0.0;
    std::vector<DirectionRow> rows;
};

struct DebiasResult {
    CoefficientStack estimate; ///< penalized estimate being corrected
    CoefficientStack debiased;
    /// (q+1) x p(p+1)/2 packed standard errors and interval bounds.
    Matrix se;
    Matrix lower;
    Matrix upper;
    /// Packed flags: interval excludes zero / interval has zero width.
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> significant;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> degenerate;
    double alpha = 0.05;
    std::size_t n = 0;
    /// Row l is the direction whose design projection drives the variance of layer l.
    Matrix directions;
    /// The direction program solution in centered coordinates, when infer() built it.
    std::optional<DirectionMatrix> program;
};

enum class Correction {
    None,
    BonferroniEdges, ///< per-test level alpha / (p(p-1)/2)
};

struct Edge {
    std::size_t l = 0;
    std::size_t j = 0;
    std::size_t k = 0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// X'X / n.
Matrix theta_hat(const Matrix& x);

/// sqrt(log(p (p+1) (q+1)) / n).
double default_mu(std::size_t n, std::size_t p, std::size_t q);

/// Solves the direction program for row l by exact coordinate ascent on its
/// dual. Constraints on X m are added lazily, only for rows that the current
/// solution violates. On infeasibility mu is doubled, up to five times, before
/// throwing NumericalError naming the row.
DirectionRow solve_direction_row(const Matrix& theta, const Matrix& x, std::size_t l, double mu, double beta);

DirectionMatrix direction_matrix(const Matrix& x, double mu, double beta = 0.45);

/// One-step correction B + M (X'W/n - Theta B) applied to every packed column.
CoefficientStack debias(const CrossMoments& moments, const CoefficientStack& stack, const Matrix& m);
CoefficientStack debias(const CenteredDesign& design, const CoefficientStack& stack, const Matrix& m);

/// Empirical variance of (X d)_i * eps_ijk across observations for every packed
/// (j, k), with eps = W - X Bu.
Vector empirical_variance(const CenteredDesign& design, const CoefficientStack& debiased, const Vector& direction);

/// Same for every row of `directions` at once; returns (rows) x p(p+1)/2.
Matrix empirical_variances(const CenteredDesign& design, const CoefficientStack& debiased, const Matrix& directions);

/// Intervals debiased +- z_{1-alpha/2} * sqrt(variance / n). alpha must be in (0, 1].
DebiasResult confidence_intervals(const CoefficientStack& debiased, const Matrix& variances, std::size_t n,
                                  double alpha);

/// Covariate effects (l >= 1, j < k) whose interval at the corrected level
/// excludes zero. Zero-width intervals are never reported.
std::vector<Edge> detect_edges(const DebiasResult& result, double alpha, Correction correction);

struct InferenceOptions {
    double alpha = 0.05;
    std::optional<double> mu; ///< defaults to default_mu
    double beta = 0.45;
    /// Report on the raw covariate scale (directions and coefficients mapped back).
    bool original_scale = true;
};

/// Full pipeline on a stack fit in the design's centered coordinates.
DebiasResult infer(const CenteredDesign& design, const CoefficientStack& scaled_fit,
                   const InferenceOptions& options = {});

/// Linear map taking centered-coordinate layers to raw-scale layers, as a
/// (q+1) x (q+1) matrix acting on the layer index.
Matrix original_scale_map(const Centering& centering);

} // namespace scovreg

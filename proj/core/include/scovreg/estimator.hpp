#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "scovreg/model.hpp"

namespace scovreg {

struct FitConfig {
    PenaltyConfig penalty;
    /// Absolute tolerance on the per-sweep objective decrease. When unset the
    /// fit uses 1e-6 * (1 + initial objective).
    std::optional<double> tol;
    std::size_t max_iter = 500;
    std::optional<CoefficientStack> warm_start;
    /// Covariate box for the positive-definiteness adjustment; defaults to the design's.
    std::optional<CovariateBounds> bounds;

    void validate() const;
};

struct FitResult {
    CoefficientStack stack;     ///< after the positive-definiteness adjustment
    CoefficientStack raw_stack; ///< coordinate-descent solution before adjustment
    double delta = 0.0;
    /// Objective before the first sweep followed by its value after every sweep.
    std::vector<double> objective_trace;
    std::size_t iters = 0;
    bool converged = false;
};

inline double soft_threshold(double a, double lam) noexcept {
    if (a > lam) {
        return a - lam;
    }
    if (a < -lam) {
        return a + lam;
    }
    return 0.0;
}

/// Exact minimization over B0 with the other layers fixed. Diagonal entries are
/// least squares; off-diagonals are soft-thresholded at lambda.
Vector update_b0(const CrossMoments& moments, const CoefficientStack& stack, const PenaltyConfig& cfg);

/// Exact minimization over Bl (l >= 1) with the other layers fixed: the layer is
/// zero when the soft-thresholded partial correlation has norm at most
/// lambda_g, otherwise it is that vector rescaled by (|S| - lambda_g) / (c |S|)
/// where c = (1/n) sum_i x_il^2.
Vector update_bl(const CrossMoments& moments, const CoefficientStack& stack, std::size_t l,
                 const PenaltyConfig& cfg);

/// Blockwise coordinate descent (B0 then B1..Bq, cyclically) on the penalized
/// least-squares objective, followed by pd_adjust.
FitResult fit(const CrossMoments& moments, const CovariateBounds& bounds, const FitConfig& cfg);
FitResult fit(const CenteredDesign& design, const FitConfig& cfg);

struct PdAdjustment {
    CoefficientStack stack;
    double delta = 0.0;
};

/// Shrinks toward the identity just enough that pd_margin becomes nonnegative:
/// B0 <- (B0 + delta I) / (1 + delta), Bl <- Bl / (1 + delta).
PdAdjustment pd_adjust(const CoefficientStack& raw, const CovariateBounds& bounds);

/// Largest violation of the optimality conditions of the unconstrained objective.
double kkt_residual(const CrossMoments& moments, const CoefficientStack& stack, const PenaltyConfig& cfg);

} // namespace scovreg

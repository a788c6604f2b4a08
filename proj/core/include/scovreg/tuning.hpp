#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scovreg/estimator.hpp"
#include "scovreg/model.hpp"

namespace scovreg {

/// Penalty grid lambda = alpha * lambda_star, lambda_g = (1 - alpha) * lambda_star.
struct CvGrid {
    std::vector<double> alphas;
    std::vector<double> lambda_stars;
    std::size_t folds = 5;

    /// alpha in {0.25, 0.5, 0.75} and lambda_star in {0.01, 0.02, ..., 1.00}, 5 folds.
    static CvGrid standard();
    /// alpha = 0.5 and `count` log-spaced lambda_star values in [0.01, 1].
    static CvGrid reduced(std::size_t count = 20);

    void validate() const;
};

struct CvPoint {
    double alpha = 0.0;
    double lambda_star = 0.0;
    PenaltyConfig penalty;
};

struct CvResult {
    std::vector<double> alphas;
    std::vector<double> lambda_stars;
    /// Mean held-out loss, indexed [alpha][lambda_star].
    std::vector<std::vector<double>> loss_surface;
    /// Standard error of the fold losses, same indexing.
    std::vector<std::vector<double>> se_surface;
    /// Per-fold losses, indexed [alpha][lambda_star][fold].
    std::vector<std::vector<std::vector<double>>> per_fold_losses;
    CvPoint best;
    std::vector<std::string> diagnostics;
};

enum class SelectionRule {
    Minimum,
    OneStandardError, ///< largest penalty whose loss is within one SE of the minimum
};

struct CvOptions {
    MeanMode mean_mode = MeanMode::ColumnMean;
    SelectionRule rule = SelectionRule::Minimum;
    /// Per-fit settings; the penalty field is overwritten per grid point.
    FitConfig fit;
    std::size_t threads = 1;
};

/// Deterministic fold labels: a seeded permutation cut into `folds` contiguous
/// chunks whose sizes differ by at most one.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

/// Unpenalized least-squares loss of a stack on held-out rows.
double cv_loss(const CenteredDesign& heldout, const CoefficientStack& stack);
double cv_loss(const CrossMoments& heldout, const CoefficientStack& stack);

/// K-fold cross validation over the grid. Each training fold is centered on its
/// own rows; the held-out rows reuse the training centering. Fits warm start
/// along decreasing lambda_star within each (alpha, fold) chain.
CvResult cv_select(const Matrix& y, const Matrix& xraw, const CvGrid& grid, std::uint64_t seed,
                   const CvOptions& options = {});

} // namespace scovreg

#pragma once

#include <cstdint>
#include <vector>

#include "scovreg/model.hpp"
#include "scovreg/tuning.hpp"

namespace scovreg {

/// Z'Z / n.
Matrix dense_sample(const Matrix& z);

/// Sample covariance with off-diagonals soft-thresholded at lambda.
Matrix sparse_sample(const Matrix& z, double lambda);

/// Per-(j, k) ordinary least squares of z_j * z_k on X. Throws NumericalError
/// when X'X is singular and InputError when n <= q + 1.
CoefficientStack dense_covreg(const CenteredDesign& design);

struct SparseSampleCv {
    double lambda = 0.0;
    std::vector<double> lambdas;
    std::vector<double> mean_loss;
};

/// Chooses the threshold for sparse_sample by K-fold cross validation on the
/// same held-out loss used for the covariate model (with no covariates).
SparseSampleCv tune_sparse_sample(const Matrix& y, const std::vector<double>& lambdas, std::size_t folds,
                                  std::uint64_t seed);

} // namespace scovreg

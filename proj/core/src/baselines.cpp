#include "scovreg/baselines.hpp"

#include <limits>
#include <string>

#include <Eigen/QR>

#include "scovreg/error.hpp"
#include "scovreg/estimator.hpp"

namespace scovreg {
namespace {

Matrix ones_design(Eigen::Index n) { return Matrix::Ones(n, 1); }

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    }
    return out;
}

} // namespace

// Computed through the same summaries the covariate fit uses, so that a fit with
// no covariates reproduces these entries bit for bit.
Matrix dense_sample(const Matrix& z) {
    if (z.rows() < 1) {
        throw InputError("dense_sample: no observations");
    }
    const CrossMoments mom = cross_moments(z, ones_design(z.rows()));
    return unvech(mom.xw.row(0).transpose(), static_cast<std::size_t>(z.cols()));
}

Matrix sparse_sample(const Matrix& z, double lambda) {
    if (!(lambda >= 0.0)) {
        throw InputError("sparse_sample: lambda must be nonnegative");
    }
    Matrix s = dense_sample(z);
    for (Eigen::Index j = 0; j < s.rows(); ++j) {
        for (Eigen::Index k = 0; k < s.cols(); ++k) {
            if (j != k) {
                s(j, k) = soft_threshold(s(j, k), lambda);
            }
        }
    }
    return s;
}

CoefficientStack dense_covreg(const CenteredDesign& design) {
    const std::size_t n = design.n();
    const std::size_t q = design.q();
    if (n <= q + 1) {
        throw InputError("dense_covreg needs n > q + 1 (n = " + std::to_string(n) + ", q = " + std::to_string(q) + ")");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(design.x);
    if (qr.rank() < design.x.cols()) {
        throw NumericalError("dense_covreg: X'X is singular");
    }
    return CoefficientStack(design.p(), qr.solve(pairwise_products(design.z)));
}

SparseSampleCv tune_sparse_sample(const Matrix& y, const std::vector<double>& lambdas, std::size_t folds,
                                  std::uint64_t seed) {
    if (lambdas.empty()) {
        throw InputError("tune_sparse_sample: empty lambda list");
    }
    const auto n = static_cast<std::size_t>(y.rows());
    const auto labels = assign_folds(n, folds, seed);
    SparseSampleCv out;
    out.lambdas = lambdas;
    out.mean_loss.assign(lambdas.size(), 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train;
        std::vector<Eigen::Index> test;
        for (std::size_t i = 0; i < n; ++i) {
            (labels[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        }
        const Matrix ytr = take_rows(y, train);
        const CenteredDesign tr = center_data(ytr, Matrix(ytr.rows(), 0));
        const Matrix yte = take_rows(y, test);
        const CenteredDesign te = apply_centering(yte, Matrix(yte.rows(), 0), tr.centering);
        const CrossMoments test_mom = cross_moments(te);
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            const auto est = CoefficientStack::from_matrices({sparse_sample(tr.z, lambdas[i])});
            out.mean_loss[i] += cv_loss(test_mom, est) / static_cast<double>(folds);
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (out.mean_loss[i] < best || (out.mean_loss[i] == best && lambdas[i] > out.lambda)) {
            best = out.mean_loss[i];
            out.lambda = lambdas[i];
        }
    }
    return out;
}

} // namespace scovreg

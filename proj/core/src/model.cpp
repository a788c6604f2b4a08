#include "scovreg/model.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "scovreg/error.hpp"

namespace scovreg {
namespace {

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw InputError(std::string(what) + " contains non-finite values");
    }
}

Matrix with_intercept(const Matrix& xraw) {
    Matrix out(xraw.rows(), xraw.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(xraw.cols()) = xraw;
    return out;
}

// Indices of layers with at least one nonzero entry.
std::vector<Eigen::Index> active_layers(const Matrix& packed) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index l = 0; l < packed.rows(); ++l) {
        if ((packed.row(l).array() != 0.0).any()) {
            out.push_back(l);
        }
    }
    return out;
}

} // namespace

Matrix Centering::residuals(const Matrix& y, const Matrix& xraw) const {
    if (y.rows() != xraw.rows()) {
        throw InputError("responses and covariates have different row counts");
    }
    if (mean_coef.cols() != y.cols() || mean_coef.rows() != xraw.cols() + 1) {
        throw InputError("centering does not match data dimensions");
    }
    Matrix z = y;
    z.rowwise() -= mean_coef.row(0);
    if (mode == MeanMode::LinearRegression && xraw.cols() > 0) {
        z.noalias() -= xraw * mean_coef.bottomRows(xraw.cols());
    }
    return z;
}

Matrix Centering::design(const Matrix& xraw) const {
    if (xraw.cols() != x_center.size()) {
        throw InputError("centering does not match the covariate count");
    }
    Matrix x(xraw.rows(), xraw.cols() + 1);
    x.col(0).setOnes();
    for (Eigen::Index l = 0; l < xraw.cols(); ++l) {
        x.col(l + 1) = (xraw.col(l).array() - x_center(l)) / x_scale(l);
    }
    return x;
}

void PenaltyConfig::validate() const {
    if (!(lambda >= 0.0) || !(lambda_g >= 0.0) || !std::isfinite(lambda) || !std::isfinite(lambda_g)) {
        throw InputError("penalty levels must be finite and nonnegative");
    }
}

CenteredDesign center_data(const Matrix& y, const Matrix& xraw, MeanMode mode) {
    const Eigen::Index n = y.rows();
    if (n < 2) {
        throw InputError("at least 2 observations are required, got " + std::to_string(n));
    }
    if (xraw.rows() != n) {
        throw InputError("responses have " + std::to_string(n) + " rows but covariates have " +
                         std::to_string(xraw.rows()));
    }
    if (y.cols() < 1) {
        throw InputError("at least one response column is required");
    }
    require_finite(y, "responses");
    require_finite(xraw, "covariates");

    const Eigen::Index q = xraw.cols();
    Centering c;
    c.mode = mode;
    c.x_center = xraw.colwise().mean().transpose();
    c.x_scale.resize(q);
    for (Eigen::Index l = 0; l < q; ++l) {
        const double s = (xraw.col(l).array() - c.x_center(l)).abs().maxCoeff();
        if (!(s > 1e-12 * (1.0 + std::abs(c.x_center(l))))) {
            throw InputError("covariate column " + std::to_string(l + 1) + " has zero variance");
        }
        c.x_scale(l) = s;
    }

    c.mean_coef = Matrix::Zero(q + 1, y.cols());
    if (mode == MeanMode::ColumnMean) {
        c.mean_coef.row(0) = y.colwise().mean();
    } else {
        if (n <= q + 1) {
            throw InputError("linear-regression mean needs more observations than covariates plus one");
        }
        const Matrix design = with_intercept(xraw);
        Eigen::ColPivHouseholderQR<Matrix> qr(design);
        if (qr.rank() < design.cols()) {
            throw InputError("linear-regression mean: covariate matrix is rank deficient");
        }
        c.mean_coef = qr.solve(y);
    }

    CenteredDesign out;
    out.z = c.residuals(y, xraw);
    out.x = c.design(xraw);
    out.bounds = CovariateBounds::unit(static_cast<std::size_t>(q));
    out.centering = std::move(c);
    return out;
}

CenteredDesign apply_centering(const Matrix& y, const Matrix& xraw, const Centering& centering) {
    require_finite(y, "responses");
    require_finite(xraw, "covariates");
    CenteredDesign out;
    out.z = centering.residuals(y, xraw);
    out.x = centering.design(xraw);
    out.bounds = CovariateBounds::unit(static_cast<std::size_t>(xraw.cols()));
    out.centering = centering;
    return out;
}

Matrix evaluate_sigma(const CoefficientStack& stack, const Eigen::Ref<const Vector>& x) {
    if (static_cast<std::size_t>(x.size()) != stack.q()) {
        throw InputError("evaluate_sigma: covariate vector has length " + std::to_string(x.size()) +
                         ", expected " + std::to_string(stack.q()));
    }
    Vector packed = stack.layer(0).transpose();
    for (std::size_t l = 1; l < stack.layers(); ++l) {
        const double xl = x(static_cast<Eigen::Index>(l - 1));
        if (xl != 0.0) {
            packed += xl * stack.layer(l).transpose();
        }
    }
    return unvech(packed, stack.p());
}

std::pair<Matrix, Matrix> split_pos_neg(const Matrix& b) {
    if (b.rows() != b.cols()) {
        throw InputError("split_pos_neg: matrix must be square");
    }
    if (!b.allFinite()) {
        throw NumericalError("split_pos_neg: matrix has non-finite entries");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (b + b.transpose()));
    if (es.info() != Eigen::Success) {
        throw NumericalError("split_pos_neg: eigendecomposition failed");
    }
    const Vector& ev = es.eigenvalues();
    const Matrix& vecs = es.eigenvectors();
    Matrix plus = vecs * ev.cwiseMax(0.0).asDiagonal() * vecs.transpose();
    Matrix minus = vecs * ev.cwiseMin(0.0).asDiagonal() * vecs.transpose();
    plus = 0.5 * (plus + plus.transpose()).eval();
    minus = 0.5 * (minus + minus.transpose()).eval();
    return {std::move(plus), std::move(minus)};
}

double pd_margin(const CoefficientStack& stack, const CovariateBounds& bounds) {
    if (bounds.size() != stack.q()) {
        throw InputError("pd_margin: bounds have " + std::to_string(bounds.size()) + " covariates, stack has " +
                         std::to_string(stack.q()));
    }
    Matrix combined = stack.matrix(0);
    for (std::size_t l = 1; l < stack.layers(); ++l) {
        if (stack.layer_is_zero(l)) {
            continue;
        }
        auto [plus, minus] = split_pos_neg(stack.matrix(l));
        const auto i = static_cast<Eigen::Index>(l - 1);
        combined += bounds.upper(i) * minus + bounds.lower(i) * plus;
    }
    if (!combined.allFinite()) {
        throw NumericalError("pd_margin: non-finite combined matrix");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(combined, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double penalty_value(const CoefficientStack& stack, const PenaltyConfig& cfg) {
    const std::size_t p = stack.p();
    double l1_b0 = stack.layer(0).cwiseAbs().sum();
    for (std::size_t j = 0; j < p; ++j) {
        l1_b0 -= std::abs(stack(0, j, j));
    }
    double l1 = l1_b0;
    double group = 0.0;
    for (std::size_t l = 1; l < stack.layers(); ++l) {
        l1 += stack.layer(l).cwiseAbs().sum();
        group += stack.layer(l).norm();
    }
    return cfg.lambda * l1 + cfg.lambda_g * group;
}

Matrix pairwise_products(const Matrix& z) {
    const Eigen::Index p = z.cols();
    Matrix w(z.rows(), static_cast<Eigen::Index>(vech_size(static_cast<std::size_t>(p))));
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index k = j; k < p; ++k) {
            w.col(idx++) = z.col(j).cwiseProduct(z.col(k));
        }
    }
    return w;
}

CrossMoments cross_moments(const Matrix& z, const Matrix& x) {
    if (z.rows() != x.rows()) {
        throw InputError("cross_moments: residual and design row counts differ");
    }
    if (z.rows() < 1) {
        throw InputError("cross_moments: no observations");
    }
    const double n = static_cast<double>(z.rows());
    const Matrix w = pairwise_products(z);
    CrossMoments m;
    m.n = static_cast<std::size_t>(z.rows());
    m.p = static_cast<std::size_t>(z.cols());
    m.gram.noalias() = x.transpose() * x / n;
    m.xw.noalias() = x.transpose() * w / n;
    m.ww = w.squaredNorm() / n;
    return m;
}

CrossMoments cross_moments(const CenteredDesign& design) { return cross_moments(design.z, design.x); }

double loss(const CrossMoments& moments, const CoefficientStack& stack) {
    const Matrix& b = stack.packed();
    if (b.rows() != moments.gram.rows() || b.cols() != moments.xw.cols()) {
        throw InputError("loss: stack dimensions do not match the data");
    }
    const auto active = active_layers(b);
    double linear = 0.0;
    double quad = 0.0;
    for (const Eigen::Index l : active) {
        linear += b.row(l).dot(moments.xw.row(l));
        for (const Eigen::Index m : active) {
            quad += moments.gram(l, m) * b.row(l).dot(b.row(m));
        }
    }
    return 0.5 * moments.ww - linear + 0.5 * quad;
}

double objective(const CrossMoments& moments, const CoefficientStack& stack, const PenaltyConfig& cfg) {
    return loss(moments, stack) + penalty_value(stack, cfg);
}

double objective(const CenteredDesign& design, const CoefficientStack& stack, const PenaltyConfig& cfg) {
    return objective(cross_moments(design), stack, cfg);
}

CoefficientStack to_original_scale(const CoefficientStack& scaled, const Centering& centering) {
    if (static_cast<std::size_t>(centering.x_scale.size()) != scaled.q()) {
        throw InputError("to_original_scale: centering does not match the stack");
    }
    CoefficientStack out = scaled;
    for (std::size_t l = 1; l < scaled.layers(); ++l) {
        const auto i = static_cast<Eigen::Index>(l - 1);
        out.layer(l) = scaled.layer(l) / centering.x_scale(i);
        out.layer(0) -= centering.x_center(i) * out.layer(l);
    }
    return out;
}

CoefficientStack to_scaled(const CoefficientStack& original, const Centering& centering) {
    if (static_cast<std::size_t>(centering.x_scale.size()) != original.q()) {
        throw InputError("to_scaled: centering does not match the stack");
    }
    CoefficientStack out = original;
    for (std::size_t l = 1; l < original.layers(); ++l) {
        const auto i = static_cast<Eigen::Index>(l - 1);
        out.layer(0) += centering.x_center(i) * original.layer(l);
        out.layer(l) = original.layer(l) * centering.x_scale(i);
    }
    return out;
}

} // namespace scovreg

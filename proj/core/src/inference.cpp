#include "scovreg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "scovreg/error.hpp"
#include "scovreg/normal.hpp"

namespace scovreg {
namespace {

constexpr std::size_t kMaxRelaxations = 5;
constexpr std::size_t kMaxSweeps = 200000;

// Dual of  min m' Theta m  s.t.  lo <= A m <= hi,  A = [Theta; X_S].
// With Q = 2 Theta the dual is  min_y 0.5 y' H y + sum_i psi_i(y_i),
// H = A Q^{-1} A', psi_i(t) = hi_i t (t >= 0) or lo_i t (t < 0),
// and the primal point is m = -Q^{-1} A' y.
struct DualProgram {
    Matrix h;
    Vector lo;
    Vector hi;
};

struct DualSolution {
    Vector y;
    bool settled = false;
};

DualSolution coordinate_ascent(const DualProgram& prog, Vector y) {
    const Eigen::Index dim = prog.h.rows();
    Vector hy = prog.h * y;
    DualSolution out;
    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double biggest_step = 0.0;
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double hii = prog.h(i, i);
            const double rest = hy(i) - hii * y(i);
            double t = 0.0;
            if (rest + prog.hi(i) < 0.0) {
                t = -(rest + prog.hi(i)) / hii;
            } else if (rest + prog.lo(i) > 0.0) {
                t = -(rest + prog.lo(i)) / hii;
            }
            const double step = t - y(i);
            if (step != 0.0) {
                hy.noalias() += step * prog.h.col(i);
                y(i) = t;
                biggest_step = std::max(biggest_step, std::abs(step));
            }
        }
        if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e14) {
            break;
        }
        if (biggest_step <= 1e-15 * (1.0 + y.cwiseAbs().maxCoeff())) {
            out.settled = true;
            break;
        }
    }
    out.y = std::move(y);
    return out;
}

struct RowAttempt {
    Vector m;
    double gram_violation = 0.0;
    double design_violation = 0.0;
};

RowAttempt solve_at_level(const Matrix& theta, const Eigen::LLT<Matrix>& chol, const Matrix& x, std::size_t l,
                          double mu, double bound) {
    const Eigen::Index d = theta.rows();
    const Matrix theta_inv = chol.solve(Matrix::Identity(d, d));
    Vector e = Vector::Zero(d);
    e(static_cast<Eigen::Index>(l)) = 1.0;

    std::vector<Eigen::Index> working;
    Vector y_theta = Vector::Zero(d);
    Vector y_x;
    RowAttempt out;
    for (;;) {
        const auto s = static_cast<Eigen::Index>(working.size());
        Matrix xs(s, d);
        for (Eigen::Index r = 0; r < s; ++r) {
            xs.row(r) = x.row(working[static_cast<std::size_t>(r)]);
        }
        DualProgram prog;
        prog.h.resize(d + s, d + s);
        prog.h.topLeftCorner(d, d) = 0.5 * theta;
        if (s > 0) {
            prog.h.topRightCorner(d, s) = 0.5 * xs.transpose();
            prog.h.bottomLeftCorner(s, d) = 0.5 * xs;
            prog.h.bottomRightCorner(s, s) = 0.5 * xs * theta_inv * xs.transpose();
        }
        prog.lo.resize(d + s);
        prog.hi.resize(d + s);
        prog.lo.head(d) = e.array() - mu;
        prog.hi.head(d) = e.array() + mu;
        prog.lo.tail(s).setConstant(-bound);
        prog.hi.tail(s).setConstant(bound);

        Vector y0(d + s);
        y0.head(d) = y_theta;
        y0.tail(s).setZero();
        y0.segment(d, y_x.size()) = y_x;
        const DualSolution sol = coordinate_ascent(prog, y0);
        y_theta = sol.y.head(d);
        y_x = sol.y.tail(s);

        Vector m = -0.5 * y_theta;
        if (s > 0) {
            m.noalias() -= 0.5 * theta_inv * (xs.transpose() * y_x);
        }
        const Vector xm = x * m;
        out.m = m;
        out.gram_violation = std::max(0.0, (theta * m - e).cwiseAbs().maxCoeff() - mu);
        out.design_violation = std::max(0.0, xm.cwiseAbs().maxCoeff() - bound);
        if (!sol.settled) {
            out.gram_violation = std::max(out.gram_violation, 1.0);
            return out;
        }

        bool added = false;
        for (Eigen::Index i = 0; i < xm.size(); ++i) {
            if (std::abs(xm(i)) > bound * (1.0 + 1e-12) &&
                std::find(working.begin(), working.end(), i) == working.end()) {
                working.push_back(i);
                added = true;
            }
        }
        if (!added) {
            return out;
        }
    }
}

} // namespace

Matrix theta_hat(const Matrix& x) {
    if (x.rows() < 1) {
        throw InputError("theta_hat: design has no rows");
    }
    return x.transpose() * x / static_cast<double>(x.rows());
}

double default_mu(std::size_t n, std::size_t p, std::size_t q) {
    const double count = static_cast<double>(p) * static_cast<double>(p + 1) * static_cast<double>(q + 1);
    return std::sqrt(std::log(count) / static_cast<double>(n));
}

DirectionRow solve_direction_row(const Matrix& theta, const Matrix& x, std::size_t l, double mu, double beta) {
    const Eigen::Index d = theta.rows();
    if (theta.cols() != d || x.cols() != d) {
        throw InputError("solve_direction_row: Theta and X dimensions disagree");
    }
    if (l >= static_cast<std::size_t>(d)) {
        throw InputError("solve_direction_row: row " + std::to_string(l) + " out of range");
    }
    if (!(mu > 0.0)) {
        throw InputError("solve_direction_row: mu must be positive");
    }
    if (!(beta > 0.25 && beta < 0.5)) {
        throw InputError("solve_direction_row: beta must lie in (1/4, 1/2)");
    }
    Eigen::LLT<Matrix> chol(theta);
    if (chol.info() != Eigen::Success) {
        throw NumericalError("solve_direction_row: Theta is not positive definite (row " + std::to_string(l) + ")");
    }
    const double bound = std::pow(static_cast<double>(x.rows()), beta);

    double level = mu;
    for (std::size_t relax = 0; relax <= kMaxRelaxations; ++relax) {
        RowAttempt att = solve_at_level(theta, chol, x, l, level, bound);
        if (att.gram_violation <= 1e-8 && att.design_violation <= 1e-8) {
            DirectionRow row;
            row.objective = att.m.dot(theta * att.m);
            row.m = std::move(att.m);
            row.mu = level;
            row.relaxations = relax;
            row.gram_violation = att.gram_violation;
            row.design_violation = att.design_violation;
            return row;
        }
        level *= 2.0;
    }
    throw NumericalError("direction program for row " + std::to_string(l) + " is infeasible even at mu = " +
                         std::to_string(mu * std::pow(2.0, kMaxRelaxations)));
}

DirectionMatrix direction_matrix(const Matrix& x, double mu, double beta) {
    const Matrix theta = theta_hat(x);
    DirectionMatrix out;
    out.mu = mu;
    out.beta = beta;
    out.m.resize(theta.rows(), theta.cols());
    for (Eigen::Index l = 0; l < theta.rows(); ++l) {
        DirectionRow row = solve_direction_row(theta, x, static_cast<std::size_t>(l), mu, beta);
        out.m.row(l) = row.m.transpose();
        out.rows.push_back(std::move(row));
    }
    return out;
}

CoefficientStack debias(const CrossMoments& moments, const CoefficientStack& stack, const Matrix& m) {
    const Matrix& b = stack.packed();
    if (b.rows() != moments.gram.rows() || b.cols() != moments.xw.cols()) {
        throw InputError("debias: stack dimensions do not match the data");
    }
    if (m.rows() != b.rows() || m.cols() != b.rows()) {
        throw InputError("debias: direction matrix must be (q+1) x (q+1)");
    }
    Matrix residual_corr = moments.xw;
    residual_corr.noalias() -= moments.gram * b;
    Matrix out = b;
    out.noalias() += m * residual_corr;
    return CoefficientStack(stack.p(), std::move(out));
}

CoefficientStack debias(const CenteredDesign& design, const CoefficientStack& stack, const Matrix& m) {
    return debias(cross_moments(design), stack, m);
}

Matrix empirical_variances(const CenteredDesign& design, const CoefficientStack& debiased, const Matrix& directions) {
    if (directions.cols() != design.x.cols() ||
        static_cast<std::size_t>(debiased.packed().rows()) != static_cast<std::size_t>(design.x.cols())) {
        throw InputError("empirical_variance: dimension mismatch");
    }
    const double n = static_cast<double>(design.n());
    Matrix eps = pairwise_products(design.z);
    eps.noalias() -= design.x * debiased.packed();
    const Matrix a = design.x * directions.transpose(); // n x rows
    const Matrix mean = a.transpose() * eps / n;
    eps = eps.cwiseAbs2();
    Matrix var = a.cwiseAbs2().transpose() * eps / n;
    var -= mean.cwiseAbs2();
    return var.cwiseMax(0.0);
}

Vector empirical_variance(const CenteredDesign& design, const CoefficientStack& debiased, const Vector& direction) {
    return empirical_variances(design, debiased, direction.transpose()).row(0).transpose();
}

DebiasResult confidence_intervals(const CoefficientStack& debiased, const Matrix& variances, std::size_t n,
                                  double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw InputError("confidence level alpha must lie in (0, 1]");
    }
    if (variances.rows() != debiased.packed().rows() || variances.cols() != debiased.packed().cols()) {
        throw InputError("confidence_intervals: variance matrix shape mismatch");
    }
    if (n < 1) {
        throw InputError("confidence_intervals: n must be positive");
    }
    const double z = normal_quantile(1.0 - alpha / 2.0);
    DebiasResult out;
    out.debiased = debiased;
    out.alpha = alpha;
    out.n = n;
    out.se = (variances.cwiseMax(0.0) / static_cast<double>(n)).cwiseSqrt();
    const Matrix half = z * out.se;
    out.lower = debiased.packed() - half;
    out.upper = debiased.packed() + half;
    out.degenerate = half.array() == 0.0;
    out.significant = (!out.degenerate) && ((out.lower.array() > 0.0) || (out.upper.array() < 0.0));
    return out;
}

std::vector<Edge> detect_edges(const DebiasResult& result, double alpha, Correction correction) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw InputError("detect_edges: alpha must lie in (0, 1]");
    }
    const std::size_t p = result.debiased.p();
    const double tests = static_cast<double>(p * (p - 1) / 2);
    std::vector<Edge> edges;
    if (tests == 0.0) {
        return edges;
    }
    const double level = correction == Correction::BonferroniEdges ? alpha / tests : alpha;
    const double z = normal_quantile(1.0 - level / 2.0);
    for (std::size_t l = 1; l < result.debiased.layers(); ++l) {
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j + 1; k < p; ++k) {
                const auto idx = static_cast<Eigen::Index>(vech_index(p, j, k));
                const auto li = static_cast<Eigen::Index>(l);
                const double est = result.debiased.packed()(li, idx);
                const double half = z * result.se(li, idx);
                if (!(half > 0.0)) {
                    continue;
                }
                if (est - half > 0.0 || est + half < 0.0) {
                    edges.push_back({l, j, k, est, est - half, est + half});
                }
            }
        }
    }
    return edges;
}

Matrix original_scale_map(const Centering& centering) {
    const Eigen::Index q = centering.x_scale.size();
    Matrix a = Matrix::Zero(q + 1, q + 1);
    a(0, 0) = 1.0;
    for (Eigen::Index l = 1; l <= q; ++l) {
        a(l, l) = 1.0 / centering.x_scale(l - 1);
        a(0, l) = -centering.x_center(l - 1) / centering.x_scale(l - 1);
    }
    return a;
}

DebiasResult infer(const CenteredDesign& design, const CoefficientStack& scaled_fit, const InferenceOptions& options) {
    const CrossMoments mom = cross_moments(design);
    const double mu = options.mu.value_or(default_mu(design.n(), design.p(), design.q()));
    DirectionMatrix dm = direction_matrix(design.x, mu, options.beta);
    const CoefficientStack bu = debias(mom, scaled_fit, dm.m);

    Matrix directions = dm.m;
    CoefficientStack reported = bu;
    CoefficientStack estimate = scaled_fit;
    if (options.original_scale) {
        directions = original_scale_map(design.centering) * dm.m;
        reported = to_original_scale(bu, design.centering);
        estimate = to_original_scale(scaled_fit, design.centering);
    }
    const Matrix var = empirical_variances(design, bu, directions);
    DebiasResult out = confidence_intervals(reported, var, design.n(), options.alpha);
    out.estimate = std::move(estimate);
    out.directions = std::move(directions);
    out.program = std::move(dm);
    return out;
}

} // namespace scovreg

#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Everything here works from raw data with plain loops so it shares no code
// path with the library beyond the CoefficientStack container.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "scovreg/stack.hpp"

namespace oracle {

using scovreg::CoefficientStack;
using scovreg::Matrix;
using scovreg::Vector;

inline double soft(double a, double t) { return a > t ? a - t : (a < -t ? a + t : 0.0); }

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> g;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = g(rng);
        }
    }
    return m;
}

/// Design with a leading column of ones and the given covariates.
inline Matrix with_intercept(const Matrix& x) {
    Matrix out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

/// (1/2n) sum_{j<=k} sum_i (z_ij z_ik - sum_l x_il B_l,jk)^2, by triple loop.
inline double loss(const Matrix& z, const Matrix& x, const CoefficientStack& b) {
    const Eigen::Index n = z.rows();
    const Eigen::Index p = z.cols();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index k = j; k < p; ++k) {
                double fitted = 0.0;
                for (Eigen::Index l = 0; l < x.cols(); ++l) {
                    fitted += x(i, l) * b(static_cast<std::size_t>(l), static_cast<std::size_t>(j),
                                          static_cast<std::size_t>(k));
                }
                const double r = z(i, j) * z(i, k) - fitted;
                total += r * r;
            }
        }
    }
    return total / (2.0 * static_cast<double>(n));
}

inline double penalty(const CoefficientStack& b, double lambda, double lambda_g) {
    const std::size_t p = b.p();
    double l1 = 0.0;
    double group = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j + 1; k < p; ++k) {
            l1 += std::abs(b(0, j, k));
        }
    }
    for (std::size_t l = 1; l < b.layers(); ++l) {
        double ss = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j; k < p; ++k) {
                l1 += std::abs(b(l, j, k));
                ss += b(l, j, k) * b(l, j, k);
            }
        }
        group += std::sqrt(ss);
    }
    return lambda * l1 + lambda_g * group;
}

inline double objective(const Matrix& z, const Matrix& x, const CoefficientStack& b, double lambda, double lambda_g) {
    return loss(z, x, b) + penalty(b, lambda, lambda_g);
}

/// Accelerated proximal gradient (FISTA with adaptive restart) on the
/// unconstrained objective. The smooth gradient is formed from the raw
/// products, and the prox of the sparse group penalty is exact.
inline CoefficientStack proximal_gradient(const Matrix& z, const Matrix& x, double lambda, double lambda_g,
                                          int iterations) {
    const Eigen::Index n = z.rows();
    const std::size_t p = static_cast<std::size_t>(z.cols());
    const std::size_t pp = scovreg::vech_size(p);
    Matrix w(n, static_cast<Eigen::Index>(pp));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j; k < p; ++k) {
                w(i, static_cast<Eigen::Index>(scovreg::vech_index(p, j, k))) =
                    z(i, static_cast<Eigen::Index>(j)) * z(i, static_cast<Eigen::Index>(k));
            }
        }
    }
    const Matrix gram = x.transpose() * x / static_cast<double>(n);
    const Matrix xw = x.transpose() * w / static_cast<double>(n);
    const double lip = Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues().maxCoeff();
    const double step = 1.0 / lip;
    std::vector<char> diag(pp, 0);
    for (std::size_t j = 0; j < p; ++j) {
        diag[scovreg::vech_index(p, j, j)] = 1;
    }
    auto prox = [&](Matrix v) {
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            if (!diag[static_cast<std::size_t>(c)]) {
                v(0, c) = soft(v(0, c), step * lambda);
            }
        }
        for (Eigen::Index l = 1; l < v.rows(); ++l) {
            for (Eigen::Index c = 0; c < v.cols(); ++c) {
                v(l, c) = soft(v(l, c), step * lambda);
            }
            const double nrm = v.row(l).norm();
            v.row(l) *= nrm > step * lambda_g ? (1.0 - step * lambda_g / nrm) : 0.0;
        }
        return v;
    };
    auto smooth = [&](const Matrix& b) { return 0.5 * (b.transpose() * gram * b).trace() - (b.cwiseProduct(xw)).sum(); };
    auto pen = [&](const Matrix& b) { return penalty(CoefficientStack(p, b), lambda, lambda_g); };

    Matrix b = Matrix::Zero(x.cols(), static_cast<Eigen::Index>(pp));
    Matrix y = b;
    double t = 1.0;
    double f_prev = smooth(b) + pen(b);
    for (int it = 0; it < iterations; ++it) {
        const Matrix next = prox(y - step * (gram * y - xw));
        const double f_next = smooth(next) + pen(next);
        if (f_next > f_prev) {
            // Restart momentum and take a plain proximal step instead.
            t = 1.0;
            y = b;
            b = prox(b - step * (gram * b - xw));
            f_prev = smooth(b) + pen(b);
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = next + ((t - 1.0) / t_next) * (next - b);
        b = next;
        t = t_next;
        f_prev = f_next;
    }
    return CoefficientStack(p, b);
}

/// Largest violation of the subgradient optimality conditions, with the
/// gradient formed from raw residuals.
inline double kkt_violation(const Matrix& z, const Matrix& x, const CoefficientStack& b, double lambda,
                            double lambda_g) {
    const Eigen::Index n = z.rows();
    const std::size_t p = static_cast<std::size_t>(z.cols());
    const std::size_t layers = static_cast<std::size_t>(x.cols());
    Matrix grad = Matrix::Zero(x.cols(), static_cast<Eigen::Index>(scovreg::vech_size(p)));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j; k < p; ++k) {
                double r = z(i, static_cast<Eigen::Index>(j)) * z(i, static_cast<Eigen::Index>(k));
                for (std::size_t l = 0; l < layers; ++l) {
                    r -= x(i, static_cast<Eigen::Index>(l)) * b(l, j, k);
                }
                for (std::size_t l = 0; l < layers; ++l) {
                    grad(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(scovreg::vech_index(p, j, k))) -=
                        x(i, static_cast<Eigen::Index>(l)) * r / static_cast<double>(n);
                }
            }
        }
    }
    double worst = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
        double norm = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j; k < p; ++k) {
                norm += l == 0 ? 0.0 : b(l, j, k) * b(l, j, k);
            }
        }
        norm = std::sqrt(norm);
        double zero_group = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j; k < p; ++k) {
                const double g = grad(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(scovreg::vech_index(p, j, k)));
                const double v = b(l, j, k);
                if (l == 0 && j == k) {
                    worst = std::max(worst, std::abs(g));
                } else if (l > 0 && norm == 0.0) {
                    zero_group += std::pow(soft(-g, lambda), 2);
                } else if (v != 0.0) {
                    const double sign = v > 0 ? 1.0 : -1.0;
                    const double group = l == 0 ? 0.0 : lambda_g * v / norm;
                    worst = std::max(worst, std::abs(g + lambda * sign + group));
                } else {
                    worst = std::max(worst, std::abs(g) - lambda);
                }
            }
        }
        if (l > 0 && norm == 0.0) {
            worst = std::max(worst, std::sqrt(zero_group) - lambda_g);
        }
    }
    return worst;
}

struct QpSolution {
    Vector m;
    double objective = 0.0;
    bool found = false;
};

/// Exact solution of min m'Θm s.t. |Θm - e_l|_inf <= mu, |Xm|_inf <= bound by
/// enumerating every active set of at most dim(m) constraints and keeping the
/// best KKT point. Only usable for tiny problems (dim(m) <= 3).
inline QpSolution direction_qp(const Matrix& theta, const Matrix& x, std::size_t l, double mu, double bound) {
    const Eigen::Index d = theta.rows();
    std::vector<Vector> a;
    std::vector<double> b;
    for (Eigen::Index r = 0; r < d; ++r) {
        const double e = r == static_cast<Eigen::Index>(l) ? 1.0 : 0.0;
        a.push_back(theta.row(r).transpose());
        b.push_back(mu + e);
        a.push_back(-theta.row(r).transpose());
        b.push_back(mu - e);
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        a.push_back(x.row(i).transpose());
        b.push_back(bound);
        a.push_back(-x.row(i).transpose());
        b.push_back(bound);
    }
    const std::size_t nc = a.size();
    QpSolution best;
    auto feasible = [&](const Vector& m) {
        for (std::size_t c = 0; c < nc; ++c) {
            if (a[c].dot(m) > b[c] + 1e-9) {
                return false;
            }
        }
        return true;
    };
    auto consider = [&](const std::vector<std::size_t>& act) {
        const Eigen::Index k = static_cast<Eigen::Index>(act.size());
        Matrix kkt = Matrix::Zero(d + k, d + k);
        Vector rhs = Vector::Zero(d + k);
        kkt.topLeftCorner(d, d) = 2.0 * theta;
        for (Eigen::Index c = 0; c < k; ++c) {
            kkt.block(0, d + c, d, 1) = a[act[static_cast<std::size_t>(c)]];
            kkt.block(d + c, 0, 1, d) = a[act[static_cast<std::size_t>(c)]].transpose();
            rhs(d + c) = b[act[static_cast<std::size_t>(c)]];
        }
        Eigen::FullPivLU<Matrix> lu(kkt);
        if (!lu.isInvertible()) {
            return;
        }
        const Vector sol = lu.solve(rhs);
        const Vector m = sol.head(d);
        // Stationarity 2Θm + A'nu = 0 with multipliers nu >= 0.
        if (k > 0 && (sol.tail(k).array() < -1e-9).any()) {
            return;
        }
        if (!feasible(m)) {
            return;
        }
        const double obj = m.dot(theta * m);
        if (!best.found || obj < best.objective) {
            best = {m, obj, true};
        }
    };
    consider({});
    for (std::size_t c1 = 0; c1 < nc; ++c1) {
        consider({c1});
        if (d < 2) continue;
        for (std::size_t c2 = c1 + 1; c2 < nc; ++c2) {
            consider({c1, c2});
            if (d < 3) continue;
            for (std::size_t c3 = c2 + 1; c3 < nc; ++c3) {
                consider({c1, c2, c3});
            }
        }
    }
    return best;
}

/// Iterates the implicit group update B = (c + lambda_g/|B|)^{-1} S from a
/// starting point until it stops moving.
inline Vector group_fixed_point(const Vector& s, double c, double lambda_g, Vector start, int iterations = 100000) {
    for (int it = 0; it < iterations; ++it) {
        const double nrm = start.norm();
        if (nrm == 0.0) {
            return start;
        }
        const Vector next = s / (c + lambda_g / nrm);
        if ((next - start).norm() < 1e-15) {
            return next;
        }
        start = next;
    }
    return start;
}

} // namespace oracle

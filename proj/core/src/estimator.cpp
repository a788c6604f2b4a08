#include "scovreg/estimator.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "scovreg/error.hpp"

namespace scovreg {
namespace {

using Row = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// rho_l = (1/n) sum_i x_il * (z_ij z_ik - sum_{m != l} x_im B_m,jk), from summaries.
Row partial_correlation(const CrossMoments& mom, const Matrix& b, const std::vector<char>& active,
                        Eigen::Index l) {
    Row rho = mom.xw.row(l);
    for (Eigen::Index m = 0; m < b.rows(); ++m) {
        if (m != l && active[static_cast<std::size_t>(m)]) {
            rho.noalias() -= mom.gram(l, m) * b.row(m);
        }
    }
    return rho;
}

std::vector<char> active_flags(const Matrix& b) {
    std::vector<char> out(static_cast<std::size_t>(b.rows()));
    for (Eigen::Index l = 0; l < b.rows(); ++l) {
        out[static_cast<std::size_t>(l)] = (b.row(l).array() != 0.0).any() ? 1 : 0;
    }
    return out;
}

std::vector<Eigen::Index> diagonal_positions(std::size_t p) {
    std::vector<Eigen::Index> out(p);
    for (std::size_t j = 0; j < p; ++j) {
        out[j] = static_cast<Eigen::Index>(vech_index(p, j, j));
    }
    return out;
}

Row b0_step(const Row& rho, double c, double lambda, const std::vector<Eigen::Index>& diag) {
    Row out(rho.size());
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
        out(i) = soft_threshold(rho(i), lambda) / c;
    }
    for (const Eigen::Index i : diag) {
        out(i) = rho(i) / c;
    }
    return out;
}

Row bl_step(const Row& rho, double c, const PenaltyConfig& cfg) {
    Row s(rho.size());
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
        s(i) = soft_threshold(rho(i), cfg.lambda);
    }
    const double norm = s.norm();
    if (norm <= cfg.lambda_g || norm == 0.0) {
        return Row::Zero(rho.size());
    }
    return s * ((norm - cfg.lambda_g) / (c * norm));
}

// Objective decrease from replacing one block, formed from the change itself so
// it stays accurate when the change is far below the objective's rounding level.
double block_decrease(const Row& old_row, const Row& new_row, const Row& rho, double c, double lambda,
                      double lambda_g, const std::vector<Eigen::Index>* unpenalized) {
    const Row diff = old_row - new_row;
    double dec = (0.5 * c * (old_row + new_row) - rho).dot(diff);
    double l1 = 0.0;
    for (Eigen::Index i = 0; i < diff.size(); ++i) {
        l1 += std::abs(old_row(i)) - std::abs(new_row(i));
    }
    if (unpenalized) {
        for (const Eigen::Index i : *unpenalized) {
            l1 -= std::abs(old_row(i)) - std::abs(new_row(i));
        }
    }
    dec += lambda * l1;
    if (lambda_g > 0.0) {
        const double denom = old_row.norm() + new_row.norm();
        if (denom > 0.0) {
            dec += lambda_g * (old_row + new_row).dot(diff) / denom;
        }
    }
    return dec;
}

void check_dims(const CrossMoments& mom, const CoefficientStack& stack) {
    if (stack.packed().rows() != mom.gram.rows() || stack.packed().cols() != mom.xw.cols()) {
        throw InputError("stack dimensions do not match the data (" + std::to_string(stack.layers()) + " layers x " +
                         std::to_string(stack.packed().cols()) + " entries vs " + std::to_string(mom.gram.rows()) +
                         " x " + std::to_string(mom.xw.cols()) + ")");
    }
}

double layer_curvature(const CrossMoments& mom, Eigen::Index l) {
    const double c = mom.gram(l, l);
    if (!(c > 0.0)) {
        throw InputError("covariate column " + std::to_string(l) + " is identically zero");
    }
    return c;
}

} // namespace

void FitConfig::validate() const {
    penalty.validate();
    if (tol && !(*tol > 0.0)) {
        throw InputError("convergence tolerance must be positive");
    }
    if (max_iter < 1) {
        throw InputError("max_iter must be at least 1");
    }
}

Vector update_b0(const CrossMoments& moments, const CoefficientStack& stack, const PenaltyConfig& cfg) {
    check_dims(moments, stack);
    const auto active = active_flags(stack.packed());
    const Row rho = partial_correlation(moments, stack.packed(), active, 0);
    return b0_step(rho, layer_curvature(moments, 0), cfg.lambda, diagonal_positions(stack.p())).transpose();
}

Vector update_bl(const CrossMoments& moments, const CoefficientStack& stack, std::size_t l,
                 const PenaltyConfig& cfg) {
    check_dims(moments, stack);
    if (l < 1 || l > stack.q()) {
        throw InputError("update_bl: covariate index " + std::to_string(l) + " outside 1.." +
                         std::to_string(stack.q()));
    }
    const auto li = static_cast<Eigen::Index>(l);
    const auto active = active_flags(stack.packed());
    const Row rho = partial_correlation(moments, stack.packed(), active, li);
    return bl_step(rho, layer_curvature(moments, li), cfg).transpose();
}

FitResult fit(const CrossMoments& moments, const CovariateBounds& bounds, const FitConfig& cfg) {
    cfg.validate();
    const std::size_t p = moments.p;
    const std::size_t q = moments.layers() - 1;
    if (moments.n < 2) {
        throw InputError("fit needs at least 2 observations");
    }

    CoefficientStack stack(p, q);
    const auto diag = diagonal_positions(p);
    if (cfg.warm_start) {
        check_dims(moments, *cfg.warm_start);
        stack = *cfg.warm_start;
    } else {
        for (const Eigen::Index i : diag) {
            stack.packed()(0, i) = moments.xw(0, i);
        }
    }

    Matrix& b = stack.packed();
    std::vector<char> active = active_flags(b);
    std::vector<double> curvature(q + 1);
    for (std::size_t l = 0; l <= q; ++l) {
        curvature[l] = layer_curvature(moments, static_cast<Eigen::Index>(l));
    }

    FitResult result;
    const double j_start = objective(moments, stack, cfg.penalty);
    if (!std::isfinite(j_start)) {
        throw NumericalError("fit: initial objective is not finite");
    }
    const double tol = cfg.tol.value_or(1e-6 * (1.0 + std::abs(j_start)));
    result.objective_trace.push_back(j_start);

    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        double decrease = 0.0;
        {
            const Row rho = partial_correlation(moments, b, active, 0);
            const Row next = b0_step(rho, curvature[0], cfg.penalty.lambda, diag);
            decrease += block_decrease(b.row(0), next, rho, curvature[0], cfg.penalty.lambda, 0.0, &diag);
            b.row(0) = next;
            active[0] = (b.row(0).array() != 0.0).any() ? 1 : 0;
        }
        for (std::size_t l = 1; l <= q; ++l) {
            const auto li = static_cast<Eigen::Index>(l);
            const Row rho = partial_correlation(moments, b, active, li);
            const Row next = bl_step(rho, curvature[l], cfg.penalty);
            decrease += block_decrease(b.row(li), next, rho, curvature[l], cfg.penalty.lambda, cfg.penalty.lambda_g,
                                       nullptr);
            b.row(li) = next;
            active[l] = (b.row(li).array() != 0.0).any() ? 1 : 0;
        }

        const double j_new = objective(moments, stack, cfg.penalty);
        if (!std::isfinite(j_new)) {
            throw NumericalError("fit: objective became non-finite at sweep " + std::to_string(it + 1));
        }
        result.objective_trace.push_back(j_new);
        result.iters = it + 1;
        if (decrease < tol) {
            result.converged = true;
            break;
        }
    }

    const CovariateBounds& box = cfg.bounds ? *cfg.bounds : bounds;
    auto adjusted = pd_adjust(stack, box);
    result.raw_stack = std::move(stack);
    result.stack = std::move(adjusted.stack);
    result.delta = adjusted.delta;
    return result;
}

FitResult fit(const CenteredDesign& design, const FitConfig& cfg) {
    return fit(cross_moments(design), design.bounds, cfg);
}

PdAdjustment pd_adjust(const CoefficientStack& raw, const CovariateBounds& bounds) {
    const double margin = pd_margin(raw, bounds);
    const double delta = std::max(0.0, -margin);
    if (delta == 0.0) {
        return {raw, 0.0};
    }
    CoefficientStack out = raw;
    out.packed() /= (1.0 + delta);
    const double shift = delta / (1.0 + delta);
    for (std::size_t j = 0; j < raw.p(); ++j) {
        out.set(0, j, j, out(0, j, j) + shift);
    }
    return {std::move(out), delta};
}

double kkt_residual(const CrossMoments& moments, const CoefficientStack& stack, const PenaltyConfig& cfg) {
    check_dims(moments, stack);
    const Matrix& b = stack.packed();
    const std::size_t p = stack.p();
    // Smooth-part gradient: Theta B - X'W/n.
    const Matrix grad = moments.gram * b - moments.xw;
    std::vector<char> is_diag(static_cast<std::size_t>(b.cols()), 0);
    for (std::size_t j = 0; j < p; ++j) {
        is_diag[vech_index(p, j, j)] = 1;
    }

    double worst = 0.0;
    for (Eigen::Index i = 0; i < b.cols(); ++i) {
        const double g = grad(0, i);
        if (is_diag[static_cast<std::size_t>(i)]) {
            worst = std::max(worst, std::abs(g));
        } else if (b(0, i) != 0.0) {
            worst = std::max(worst, std::abs(g + cfg.lambda * (b(0, i) > 0 ? 1.0 : -1.0)));
        } else {
            worst = std::max(worst, std::abs(g) - cfg.lambda);
        }
    }
    for (Eigen::Index l = 1; l < b.rows(); ++l) {
        const double norm = b.row(l).norm();
        if (norm == 0.0) {
            double s2 = 0.0;
            for (Eigen::Index i = 0; i < b.cols(); ++i) {
                const double s = soft_threshold(-grad(l, i), cfg.lambda);
                s2 += s * s;
            }
            worst = std::max(worst, std::sqrt(s2) - cfg.lambda_g);
            continue;
        }
        for (Eigen::Index i = 0; i < b.cols(); ++i) {
            const double g = grad(l, i);
            const double v = b(l, i);
            if (v != 0.0) {
                worst = std::max(worst, std::abs(g + cfg.lambda * (v > 0 ? 1.0 : -1.0) + cfg.lambda_g * v / norm));
            } else {
                worst = std::max(worst, std::abs(g) - cfg.lambda);
            }
        }
    }
    return std::max(worst, 0.0);
}

} // namespace scovreg

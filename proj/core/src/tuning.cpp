#include "scovreg/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "scovreg/error.hpp"
#include "scovreg/parallel.hpp"

namespace scovreg {
namespace {

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    }
    return out;
}

struct FoldData {
    CrossMoments train;
    CovariateBounds bounds;
    CrossMoments test;
};

struct ChainOutput {
    std::vector<double> losses; // per unique lambda_star, ascending order of value
    std::vector<std::string> diagnostics;
};

} // namespace

CvGrid CvGrid::standard() {
    CvGrid g;
    g.alphas = {0.25, 0.5, 0.75};
    g.lambda_stars.reserve(100);
    for (int i = 1; i <= 100; ++i) {
        g.lambda_stars.push_back(i / 100.0);
    }
    g.folds = 5;
    return g;
}

CvGrid CvGrid::reduced(std::size_t count) {
    CvGrid g;
    g.alphas = {0.5};
    g.folds = 5;
    if (count == 1) {
        g.lambda_stars = {0.1};
        return g;
    }
    const double lo = std::log(0.01);
    const double hi = std::log(1.0);
    for (std::size_t i = 0; i < count; ++i) {
        g.lambda_stars.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1)));
    }
    return g;
}

void CvGrid::validate() const {
    if (alphas.empty() || lambda_stars.empty()) {
        throw InputError("cv grid needs at least one alpha and one lambda_star");
    }
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) {
            throw InputError("cv grid: alpha must lie in (0, 1), got " + std::to_string(a));
        }
    }
    for (double l : lambda_stars) {
        if (!(l > 0.0) || !std::isfinite(l)) {
            throw InputError("cv grid: lambda_star must be positive, got " + std::to_string(l));
        }
    }
    if (folds < 2) {
        throw InputError("cv grid: at least 2 folds are required");
    }
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
    if (folds < 1 || folds > n) {
        throw InputError("cannot split " + std::to_string(n) + " observations into " + std::to_string(folds) +
                         " folds");
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> label(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        label[perm[pos]] = pos * folds / n;
    }
    return label;
}

double cv_loss(const CrossMoments& heldout, const CoefficientStack& stack) { return loss(heldout, stack); }

double cv_loss(const CenteredDesign& heldout, const CoefficientStack& stack) {
    return loss(cross_moments(heldout), stack);
}

CvResult cv_select(const Matrix& y, const Matrix& xraw, const CvGrid& grid, std::uint64_t seed,
                   const CvOptions& options) {
    grid.validate();
    const auto n = static_cast<std::size_t>(y.rows());
    if (n < grid.folds) {
        throw InputError("cv: " + std::to_string(n) + " observations cannot fill " + std::to_string(grid.folds) +
                         " folds");
    }
    if (static_cast<std::size_t>(xraw.rows()) != n) {
        throw InputError("cv: responses and covariates have different row counts");
    }
    const std::size_t k_folds = grid.folds;
    const auto labels = assign_folds(n, k_folds, seed);

    std::vector<FoldData> folds = parallel_map(k_folds, options.threads, [&](std::size_t f) {
        std::vector<Eigen::Index> train;
        std::vector<Eigen::Index> test;
        for (std::size_t i = 0; i < n; ++i) {
            (labels[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        }
        const CenteredDesign tr = center_data(take_rows(y, train), take_rows(xraw, train), options.mean_mode);
        const CenteredDesign te = apply_centering(take_rows(y, test), take_rows(xraw, test), tr.centering);
        return FoldData{cross_moments(tr), tr.bounds, cross_moments(te)};
    });

    // Unique lambda_star values, visited from largest to smallest for warm starts.
    std::vector<double> unique = grid.lambda_stars;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    const std::size_t n_alpha = grid.alphas.size();
    auto chains = parallel_map(n_alpha * k_folds, options.threads, [&](std::size_t task) {
        const std::size_t a = task / k_folds;
        const std::size_t f = task % k_folds;
        const FoldData& fd = folds[f];
        ChainOutput out;
        out.losses.assign(unique.size(), std::numeric_limits<double>::infinity());
        FitConfig cfg = options.fit;
        std::optional<CoefficientStack> warm;
        for (std::size_t u = unique.size(); u-- > 0;) {
            cfg.penalty = {grid.alphas[a] * unique[u], (1.0 - grid.alphas[a]) * unique[u]};
            cfg.warm_start = warm;
            try {
                FitResult r = fit(fd.train, fd.bounds, cfg);
                const double l = cv_loss(fd.test, r.stack);
                if (std::isfinite(l)) {
                    out.losses[u] = l;
                } else {
                    out.diagnostics.push_back("alpha=" + std::to_string(grid.alphas[a]) +
                                              " lambda_star=" + std::to_string(unique[u]) + " fold=" +
                                              std::to_string(f) + ": non-finite held-out loss");
                }
                warm = std::move(r.raw_stack);
            } catch (const NumericalError& e) {
                out.diagnostics.push_back("alpha=" + std::to_string(grid.alphas[a]) +
                                          " lambda_star=" + std::to_string(unique[u]) + " fold=" +
                                          std::to_string(f) + ": " + e.what());
                warm.reset();
            }
        }
        return out;
    });

    CvResult res;
    res.alphas = grid.alphas;
    res.lambda_stars = grid.lambda_stars;
    const std::size_t n_lam = grid.lambda_stars.size();
    res.loss_surface.assign(n_alpha, std::vector<double>(n_lam));
    res.se_surface.assign(n_alpha, std::vector<double>(n_lam));
    res.per_fold_losses.assign(n_alpha, std::vector<std::vector<double>>(n_lam, std::vector<double>(k_folds)));
    for (const auto& c : chains) {
        res.diagnostics.insert(res.diagnostics.end(), c.diagnostics.begin(), c.diagnostics.end());
    }

    for (std::size_t a = 0; a < n_alpha; ++a) {
        for (std::size_t li = 0; li < n_lam; ++li) {
            const auto u = static_cast<std::size_t>(
                std::lower_bound(unique.begin(), unique.end(), grid.lambda_stars[li]) - unique.begin());
            double sum = 0.0;
            for (std::size_t f = 0; f < k_folds; ++f) {
                const double l = chains[a * k_folds + f].losses[u];
                res.per_fold_losses[a][li][f] = l;
                sum += l;
            }
            const double mean = sum / static_cast<double>(k_folds);
            double ss = 0.0;
            for (std::size_t f = 0; f < k_folds; ++f) {
                const double d = res.per_fold_losses[a][li][f] - mean;
                ss += d * d;
            }
            res.loss_surface[a][li] = mean;
            res.se_surface[a][li] = std::isfinite(mean)
                                        ? std::sqrt(ss / static_cast<double>(k_folds - 1)) /
                                              std::sqrt(static_cast<double>(k_folds))
                                        : std::numeric_limits<double>::infinity();
        }
    }

    // Plain minimum; ties go to the larger lambda_star, then the larger alpha.
    auto preferred = [&](std::size_t a, std::size_t li, std::size_t ba, std::size_t bl) {
        if (grid.lambda_stars[li] != grid.lambda_stars[bl]) {
            return grid.lambda_stars[li] > grid.lambda_stars[bl];
        }
        return grid.alphas[a] > grid.alphas[ba];
    };
    std::size_t best_a = 0;
    std::size_t best_l = 0;
    for (std::size_t a = 0; a < n_alpha; ++a) {
        for (std::size_t li = 0; li < n_lam; ++li) {
            const double v = res.loss_surface[a][li];
            const double bv = res.loss_surface[best_a][best_l];
            if (v < bv || (v == bv && preferred(a, li, best_a, best_l))) {
                best_a = a;
                best_l = li;
            }
        }
    }
    if (!std::isfinite(res.loss_surface[best_a][best_l])) {
        throw NumericalError("cv: every grid point failed to produce a finite held-out loss");
    }
    if (options.rule == SelectionRule::OneStandardError) {
        const double cutoff = res.loss_surface[best_a][best_l] + res.se_surface[best_a][best_l];
        for (std::size_t a = 0; a < n_alpha; ++a) {
            for (std::size_t li = 0; li < n_lam; ++li) {
                if (res.loss_surface[a][li] <= cutoff && preferred(a, li, best_a, best_l)) {
                    best_a = a;
                    best_l = li;
                }
            }
        }
    }
    const double a = grid.alphas[best_a];
    const double ls = grid.lambda_stars[best_l];
    res.best = CvPoint{a, ls, PenaltyConfig{a * ls, (1.0 - a) * ls}};
    return res;
}

} // namespace scovreg

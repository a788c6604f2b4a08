#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "scovreg/error.hpp"
#include "scovreg/tuning.hpp"

using namespace scovreg;

namespace {

// Covariance of the first two responses driven by the first covariate; the rest is noise.
void signal_data(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p, Eigen::Index q, Matrix& y, Matrix& x) {
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> g;
    x.resize(n, q);
    y.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index l = 0; l < q; ++l) {
            x(i, l) = u(rng);
        }
        const double shared = g(rng) * std::sqrt(2.0 * x(i, 0));
        for (Eigen::Index j = 0; j < p; ++j) {
            y(i, j) = g(rng) + (j < 2 ? shared : 0.0);
        }
    }
}

} // namespace

TEST_CASE("assign_folds partitions evenly and reproducibly") {
    for (std::size_t n : {10u, 11u, 178u, 500u}) {
        const auto a = assign_folds(n, 5, 42);
        REQUIRE(a.size() == n);
        std::vector<std::size_t> counts(5, 0);
        for (auto f : a) {
            REQUIRE(f < 5);
            ++counts[f];
        }
        const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        CHECK(*hi - *lo <= 1);
        CHECK(assign_folds(n, 5, 42) == a);
    }
    CHECK(assign_folds(100, 5, 1) != assign_folds(100, 5, 2));
    CHECK_THROWS_AS(assign_folds(3, 5, 1), InputError);
}

TEST_CASE("grids") {
    const CvGrid s = CvGrid::standard();
    CHECK(s.alphas.size() * s.lambda_stars.size() == 300);
    CHECK(s.folds == 5);
    CHECK(s.lambda_stars.front() == doctest::Approx(0.01));
    CHECK(s.lambda_stars.back() == doctest::Approx(1.0));
    const CvGrid r = CvGrid::reduced(20);
    CHECK(r.alphas == std::vector<double>{0.5});
    CHECK(r.lambda_stars.size() == 20);
    CHECK(r.lambda_stars.front() == doctest::Approx(0.01));
    CHECK(r.lambda_stars.back() == doctest::Approx(1.0));
    for (std::size_t i = 1; i < r.lambda_stars.size(); ++i) {
        CHECK(r.lambda_stars[i] / r.lambda_stars[i - 1] == doctest::Approx(r.lambda_stars[1] / r.lambda_stars[0]));
    }
    CvGrid bad = r;
    bad.alphas = {1.0};
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = r;
    bad.lambda_stars = {0.0};
    CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("cv_loss equals the naive held-out loss") {
    std::mt19937_64 rng(40);
    const CenteredDesign d = center_data(oracle::random_matrix(rng, 15, 3), oracle::random_matrix(rng, 15, 2));
    CoefficientStack s(3, 2);
    s.packed() = oracle::random_matrix(rng, 3, 6);
    CHECK(cv_loss(d, s) == doctest::Approx(oracle::loss(d.z, d.x, s)).epsilon(1e-12));
}

TEST_CASE("cv_select is reproducible and finds the covariate signal") {
    std::mt19937_64 rng(41);
    Matrix y;
    Matrix x;
    signal_data(rng, 300, 4, 3, y, x);
    const CvGrid grid = CvGrid::reduced(8);
    const CvResult a = cv_select(y, x, grid, 7);
    const CvResult b = cv_select(y, x, grid, 7);
    CHECK(a.loss_surface == b.loss_surface);
    CHECK(a.best.lambda_star == b.best.lambda_star);
    REQUIRE(a.per_fold_losses.size() == 1);
    REQUIRE(a.per_fold_losses[0].size() == 8);
    CHECK(a.per_fold_losses[0][0].size() == 5);

    // The selected point must be a grid minimum.
    const auto& row = a.loss_surface[0];
    CHECK(*std::min_element(row.begin(), row.end()) ==
          row[static_cast<std::size_t>(std::find(grid.lambda_stars.begin(), grid.lambda_stars.end(), a.best.lambda_star) -
                                       grid.lambda_stars.begin())]);
    CHECK(a.best.penalty.lambda == doctest::Approx(0.5 * a.best.lambda_star));

    const CenteredDesign d = center_data(y, x);
    FitConfig cfg;
    cfg.penalty = a.best.penalty;
    const FitResult r = fit(d, cfg);
    CHECK_FALSE(r.raw_stack.layer_is_zero(1));
    CHECK(r.raw_stack(1, 0, 1) > 0.0);
}

TEST_CASE("cv_select: flat surface picks the largest penalty") {
    // With one response and no covariates the penalty never acts, so every point ties.
    std::mt19937_64 rng(42);
    const Matrix y = oracle::random_matrix(rng, 50, 1);
    const Matrix x(50, 0);
    CvGrid grid;
    grid.alphas = {0.25, 0.5, 0.75};
    grid.lambda_stars = {0.05, 0.5, 0.2};
    const CvResult r = cv_select(y, x, grid, 3);
    CHECK(r.best.lambda_star == 0.5);
    CHECK(r.best.alpha == 0.75);
}

TEST_CASE("cv_select: duplicate lambda_star values share results") {
    std::mt19937_64 rng(43);
    Matrix y;
    Matrix x;
    signal_data(rng, 100, 3, 2, y, x);
    CvGrid grid;
    grid.alphas = {0.5};
    grid.lambda_stars = {0.1, 0.3, 0.1};
    const CvResult r = cv_select(y, x, grid, 5);
    CHECK(r.loss_surface[0][0] == r.loss_surface[0][2]);
    CHECK(r.per_fold_losses[0][0] == r.per_fold_losses[0][2]);
}

TEST_CASE("cv_select: one-standard-error rule never picks a smaller penalty") {
    std::mt19937_64 rng(44);
    Matrix y;
    Matrix x;
    signal_data(rng, 150, 3, 2, y, x);
    const CvGrid grid = CvGrid::reduced(6);
    CvOptions opt;
    const CvResult plain = cv_select(y, x, grid, 9, opt);
    opt.rule = SelectionRule::OneStandardError;
    const CvResult wide = cv_select(y, x, grid, 9, opt);
    CHECK(wide.best.lambda_star >= plain.best.lambda_star);
}

TEST_CASE("cv_select input errors") {
    std::mt19937_64 rng(45);
    const Matrix y = oracle::random_matrix(rng, 4, 2);
    const Matrix x = oracle::random_matrix(rng, 4, 1);
    CHECK_THROWS_AS(cv_select(y, x, CvGrid::reduced(3), 1), InputError);
    const Matrix y2 = oracle::random_matrix(rng, 20, 2);
    CHECK_THROWS_AS(cv_select(y2, x, CvGrid::reduced(3), 1), InputError);
}

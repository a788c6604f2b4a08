#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "scovreg/error.hpp"
#include "scovreg/model.hpp"
#include "scovreg/simulate.hpp"

using namespace scovreg;

namespace {

CoefficientStack random_stack(std::mt19937_64& rng, std::size_t p, std::size_t q) {
    std::vector<Matrix> mats;
    for (std::size_t l = 0; l <= q; ++l) {
        mats.push_back(oracle::random_matrix(rng, static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
    }
    return CoefficientStack::from_matrices(mats);
}

double min_eig(const Matrix& m) { return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff(); }

} // namespace

TEST_CASE("vech packing is row-major upper triangular") {
    CHECK(vech_size(4) == 10);
    CHECK(vech_index(4, 0, 0) == 0);
    CHECK(vech_index(4, 0, 3) == 3);
    CHECK(vech_index(4, 1, 1) == 4);
    CHECK(vech_index(4, 3, 3) == 9);
    CHECK(vech_index(4, 2, 1) == vech_index(4, 1, 2));
    std::mt19937_64 rng(1);
    Matrix a = oracle::random_matrix(rng, 5, 5);
    a = (a + a.transpose()).eval();
    CHECK(unvech(vech(a), 5) == a);
}

TEST_CASE("stack entries are symmetric bit for bit") {
    std::mt19937_64 rng(2);
    const CoefficientStack s = random_stack(rng, 4, 2);
    for (std::size_t l = 0; l < 3; ++l) {
        const Matrix m = s.matrix(l);
        CHECK(m == m.transpose());
        CHECK(s(l, 1, 3) == s(l, 3, 1));
    }
    CHECK_THROWS_AS(CoefficientStack(3, Matrix::Zero(2, 5)), InputError);
}

TEST_CASE("covariate bounds validation") {
    CovariateBounds b = CovariateBounds::unit(2);
    CHECK_NOTHROW(b.validate());
    b.lower(1) = 2.0;
    CHECK_THROWS_AS(b.validate(), InputError);
}

TEST_CASE("center_data: binary column centers to -0.5/0.5 then scales to -1/1") {
    Matrix y(4, 2);
    y << 1, 2, 3, 5, 2, 2, 0, 1;
    Matrix x(4, 1);
    x << 0, 1, 0, 1;
    const CenteredDesign d = center_data(y, x);
    CHECK(d.x(0, 1) == doctest::Approx(-1.0));
    CHECK(d.x(1, 1) == doctest::Approx(1.0));
    CHECK(d.x(2, 1) == doctest::Approx(-1.0));
    CHECK(d.x(3, 1) == doctest::Approx(1.0));
    CHECK(d.centering.x_center(0) == doctest::Approx(0.5));
    CHECK(d.centering.x_scale(0) == doctest::Approx(0.5));
    CHECK((d.x.col(0).array() == 1.0).all());
}

TEST_CASE("center_data: constant response column gives zero residuals") {
    Matrix y(5, 2);
    y << 3, 1, 3, 2, 3, 0, 3, 4, 3, 5;
    Matrix x(5, 1);
    x << 1, 2, 3, 4, 6;
    const CenteredDesign d = center_data(y, x);
    CHECK(d.z.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.x.col(1).mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.x.col(1).cwiseAbs().maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("center_data: linear-regression mean removes a covariate-dependent mean") {
    std::mt19937_64 rng(3);
    const Matrix x = oracle::random_matrix(rng, 200, 3);
    Matrix gamma(4, 2);
    gamma << 1.0, -2.0, 0.5, 3.0, -1.5, 0.0, 2.0, 1.0;
    const Matrix y = oracle::with_intercept(x) * gamma + 0.3 * oracle::random_matrix(rng, 200, 2);
    const CenteredDesign d = center_data(y, x, MeanMode::LinearRegression);
    CHECK(d.z.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
    // residuals are orthogonal to every covariate
    CHECK((x.transpose() * d.z).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("center_data rejects bad inputs") {
    Matrix y1(1, 2);
    y1 << 1, 2;
    Matrix x1(1, 1);
    x1 << 0;
    CHECK_THROWS_AS(center_data(y1, x1), InputError);

    Matrix y(3, 2);
    y << 1, 2, 3, 4, 5, 7;
    Matrix x(3, 1);
    x << 2, 2, 2;
    CHECK_THROWS_WITH_AS(center_data(y, x), doctest::Contains("zero variance"), InputError);

    Matrix xr(2, 1);
    xr << 0, 1;
    CHECK_THROWS_AS(center_data(y, xr), InputError);
}

TEST_CASE("evaluate_sigma examples") {
    std::mt19937_64 rng(4);
    const CoefficientStack s = random_stack(rng, 4, 3);
    CHECK(evaluate_sigma(s, Vector::Zero(3)) == s.matrix(0));
    for (std::size_t l = 1; l <= 3; ++l) {
        Vector e = Vector::Zero(3);
        e(static_cast<Eigen::Index>(l - 1)) = 1.0;
        CHECK((evaluate_sigma(s, e) - (s.matrix(0) + s.matrix(l))).cwiseAbs().maxCoeff() < 1e-14);
    }
    const CoefficientStack ma1 = true_stack(Structure::MA1, 5, 2);
    Vector x(2);
    x << 1.0, 0.3;
    const Matrix sig = evaluate_sigma(ma1, x);
    for (Eigen::Index j = 0; j < 5; ++j) {
        CHECK(sig(j, j) == doctest::Approx(1.0));
        for (Eigen::Index k = j + 1; k < 5; ++k) {
            CHECK(sig(j, k) == doctest::Approx(k == j + 1 ? 0.5 : 0.0));
        }
    }
    CHECK_THROWS_AS(evaluate_sigma(s, Vector::Zero(2)), InputError);
}

TEST_CASE("evaluate_sigma is affine in x") {
    std::mt19937_64 rng(5);
    const CoefficientStack s = random_stack(rng, 4, 3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int rep = 0; rep < 20; ++rep) {
        Vector x1(3), x2(3);
        for (int i = 0; i < 3; ++i) {
            x1(i) = u(rng);
            x2(i) = u(rng);
        }
        const double a = 0.5 * (u(rng) + 1.0);
        const Matrix lhs = evaluate_sigma(s, a * x1 + (1 - a) * x2);
        const Matrix rhs = a * evaluate_sigma(s, x1) + (1 - a) * evaluate_sigma(s, x2);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("split_pos_neg examples") {
    Matrix psd(2, 2);
    psd << 2, 1, 1, 2;
    auto [p1, m1] = split_pos_neg(psd);
    CHECK((p1 - psd).norm() < 1e-12);
    CHECK(m1.norm() < 1e-12);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1;
    d(1, 1) = -2;
    auto [p2, m2] = split_pos_neg(d);
    CHECK(p2(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(p2(1, 1)) < 1e-12);
    CHECK(m2(1, 1) == doctest::Approx(-2.0));
    CHECK(std::abs(m2(0, 0)) < 1e-12);

    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        Matrix b = oracle::random_matrix(rng, 5, 5);
        b = (b + b.transpose()).eval();
        auto [bp, bm] = split_pos_neg(b);
        CHECK((b - bp - bm).norm() <= 1e-8 * (1 + b.norm()));
        CHECK(min_eig(bp) >= -1e-10);
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(bm).eigenvalues().maxCoeff() <= 1e-10);
        CHECK(bp == bp.transpose());
    }
}

TEST_CASE("pd_margin examples") {
    CoefficientStack s(3, 1);
    for (std::size_t j = 0; j < 3; ++j) {
        s.set(0, j, j, 1.0);
    }
    CHECK(pd_margin(s, CovariateBounds::unit(1)) == doctest::Approx(1.0));
    for (std::size_t j = 0; j < 3; ++j) {
        s.set(1, j, j, 0.5);
    }
    CHECK(pd_margin(s, CovariateBounds::unit(1)) == doctest::Approx(0.5));
}

TEST_CASE("pd_margin against corner enumeration") {
    // The margin is a lower bound on min over the box of lambda_min(Sigma(x)),
    // and it is attained at a corner when each layer is semidefinite.
    std::mt19937_64 rng(7);
    for (std::size_t q = 1; q <= 3; ++q) {
        for (int rep = 0; rep < 20; ++rep) {
            CoefficientStack s = random_stack(rng, 4, q);
            const bool semidefinite = rep % 2 == 0;
            if (semidefinite) {
                for (std::size_t l = 1; l <= q; ++l) {
                    Matrix g = oracle::random_matrix(rng, 4, 2);
                    Matrix b = g * g.transpose();
                    if ((rep / 2 + l) % 2 == 0) {
                        b = -b;
                    }
                    s.layer(l) = vech(b).transpose();
                }
            }
            double corner_min = 1e300;
            for (std::size_t mask = 0; mask < (1u << q); ++mask) {
                Vector x(static_cast<Eigen::Index>(q));
                for (std::size_t l = 0; l < q; ++l) {
                    x(static_cast<Eigen::Index>(l)) = (mask >> l) & 1u ? 1.0 : -1.0;
                }
                corner_min = std::min(corner_min, min_eig(evaluate_sigma(s, x)));
            }
            const double margin = pd_margin(s, CovariateBounds::unit(q));
            CHECK(margin <= corner_min + 1e-8);
            if (semidefinite) {
                CHECK(margin == doctest::Approx(corner_min).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("positive margin certifies every point in the box") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    int certified = 0;
    for (int rep = 0; rep < 30; ++rep) {
        CoefficientStack s = random_stack(rng, 4, 2);
        s.packed().row(1) *= 0.1;
        s.packed().row(2) *= 0.1;
        Matrix b0 = s.matrix(0);
        b0 += (std::abs(min_eig(b0)) + 0.5) * Matrix::Identity(4, 4);
        s.layer(0) = vech(b0).transpose();
        if (pd_margin(s, CovariateBounds::unit(2)) <= 0) {
            continue;
        }
        ++certified;
        for (int t = 0; t < 100; ++t) {
            Vector x(2);
            x << u(rng), u(rng);
            CHECK(min_eig(evaluate_sigma(s, x)) > 0.0);
        }
    }
    CHECK(certified > 10);
}

TEST_CASE("penalty_value examples") {
    PenaltyConfig cfg{1.0, 1.0};
    CoefficientStack zero(2, 1);
    CHECK(penalty_value(zero, cfg) == 0.0);

    CoefficientStack diag(3, 2);
    diag.set(0, 0, 0, 2.0);
    diag.set(0, 2, 2, 5.0);
    CHECK(penalty_value(diag, cfg) == 0.0);

    CoefficientStack ex(2, 1);
    ex.set(1, 0, 0, 1);
    ex.set(1, 0, 1, 1);
    ex.set(1, 1, 1, 1);
    CHECK(penalty_value(ex, cfg) == doctest::Approx(3.0 + std::sqrt(3.0)));
}

TEST_CASE("penalty_value is positively homogeneous") {
    std::mt19937_64 rng(9);
    const CoefficientStack s = random_stack(rng, 4, 2);
    const PenaltyConfig cfg{0.3, 0.7};
    CoefficientStack scaled = s;
    scaled.packed() *= 2.5;
    for (std::size_t j = 0; j < 4; ++j) {
        scaled.set(0, j, j, s(0, j, j));
    }
    CHECK(penalty_value(scaled, cfg) == doctest::Approx(2.5 * penalty_value(s, cfg)).epsilon(1e-12));
    CHECK(penalty_value(s, cfg) == doctest::Approx(oracle::penalty(s, 0.3, 0.7)).epsilon(1e-12));
}

TEST_CASE("objective examples") {
    CenteredDesign d;
    d.z = Matrix::Zero(3, 2);
    d.x = Matrix::Ones(3, 1);
    CoefficientStack zero(2, 0);
    CHECK(objective(d, zero, {0.1, 0.1}) == 0.0);

    CenteredDesign one;
    one.z = Matrix::Constant(1, 1, 2.0);
    one.x = Matrix::Ones(1, 1);
    CoefficientStack b(1, 0);
    b.set(0, 0, 0, 4.0);
    CHECK(objective(one, b, {1.0, 1.0}) == 0.0);
}

TEST_CASE("objective matches the naive loop") {
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix y = oracle::random_matrix(rng, 40, 4);
        const Matrix x = oracle::random_matrix(rng, 40, 3);
        const CenteredDesign d = center_data(y, x);
        const CoefficientStack s = random_stack(rng, 4, 3);
        const PenaltyConfig cfg{0.2, 0.4};
        const double naive = oracle::objective(d.z, d.x, s, 0.2, 0.4);
        CHECK(objective(d, s, cfg) == doctest::Approx(naive).epsilon(1e-10));
        CHECK(loss(cross_moments(d), s) == doctest::Approx(oracle::loss(d.z, d.x, s)).epsilon(1e-10));
    }
}

TEST_CASE("objective is convex along segments") {
    std::mt19937_64 rng(11);
    const Matrix y = oracle::random_matrix(rng, 30, 3);
    const Matrix x = oracle::random_matrix(rng, 30, 2);
    const CenteredDesign d = center_data(y, x);
    const PenaltyConfig cfg{0.2, 0.3};
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
        const CoefficientStack a = random_stack(rng, 3, 2);
        const CoefficientStack b = random_stack(rng, 3, 2);
        const double t = u(rng);
        const CoefficientStack mid(3, Matrix(t * a.packed() + (1 - t) * b.packed()));
        CHECK(objective(d, mid, cfg) <= t * objective(d, a, cfg) + (1 - t) * objective(d, b, cfg) + 1e-9);
    }
}

TEST_CASE("original scale round trip") {
    std::mt19937_64 rng(12);
    const Matrix y = oracle::random_matrix(rng, 50, 3);
    Matrix x = oracle::random_matrix(rng, 50, 2);
    x.col(0).array() = x.col(0).array() * 3.0 + 7.0;
    const CenteredDesign d = center_data(y, x);
    const CoefficientStack s = random_stack(rng, 3, 2);
    const CoefficientStack orig = to_original_scale(s, d.centering);
    CHECK((to_scaled(orig, d.centering).packed() - s.packed()).cwiseAbs().maxCoeff() < 1e-12);
    // Sigma at each subject is the same whichever scale it is evaluated on.
    for (Eigen::Index i = 0; i < 50; i += 7) {
        const Matrix a = evaluate_sigma(orig, x.row(i).transpose());
        const Matrix b = evaluate_sigma(s, d.x.row(i).tail(2).transpose());
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
    }
}

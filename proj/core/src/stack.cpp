#include "scovreg/stack.hpp"

#include <cmath>
#include <string>

#include "scovreg/error.hpp"

namespace scovreg {

std::vector<VechPair> vech_pairs(std::size_t p) {
    std::vector<VechPair> out;
    out.reserve(vech_size(p));
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j; k < p; ++k) {
            out.push_back({j, k});
        }
    }
    return out;
}

Vector vech(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw InputError("vech: matrix must be square");
    }
    const auto p = static_cast<std::size_t>(m.rows());
    Vector out(static_cast<Eigen::Index>(vech_size(p)));
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
        for (Eigen::Index k = j; k < m.cols(); ++k) {
            out(idx++) = m(j, k);
        }
    }
    return out;
}

Matrix unvech(const Eigen::Ref<const Vector>& packed, std::size_t p) {
    if (static_cast<std::size_t>(packed.size()) != vech_size(p)) {
        throw InputError("unvech: packed length does not match p");
    }
    Matrix out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < out.rows(); ++j) {
        for (Eigen::Index k = j; k < out.cols(); ++k) {
            out(j, k) = packed(idx);
            out(k, j) = packed(idx);
            ++idx;
        }
    }
    return out;
}

CoefficientStack::CoefficientStack(std::size_t p, std::size_t q)
    : p_(p), packed_(Matrix::Zero(static_cast<Eigen::Index>(q + 1), static_cast<Eigen::Index>(vech_size(p)))) {}

CoefficientStack::CoefficientStack(std::size_t p, Matrix packed) : p_(p), packed_(std::move(packed)) {
    if (static_cast<std::size_t>(packed_.cols()) != vech_size(p)) {
        throw InputError("CoefficientStack: packed matrix has " + std::to_string(packed_.cols()) +
                         " columns, expected " + std::to_string(vech_size(p)));
    }
    if (packed_.rows() < 1) {
        throw InputError("CoefficientStack: at least one layer (B0) is required");
    }
}

CoefficientStack CoefficientStack::from_matrices(const std::vector<Matrix>& mats) {
    if (mats.empty()) {
        throw InputError("CoefficientStack: at least one layer (B0) is required");
    }
    const auto p = static_cast<std::size_t>(mats.front().rows());
    CoefficientStack out(p, mats.size() - 1);
    for (std::size_t l = 0; l < mats.size(); ++l) {
        const Matrix& m = mats[l];
        if (static_cast<std::size_t>(m.rows()) != p || static_cast<std::size_t>(m.cols()) != p) {
            throw InputError("CoefficientStack: layer " + std::to_string(l) + " is not " + std::to_string(p) +
                             " x " + std::to_string(p));
        }
        const Matrix sym = 0.5 * (m + m.transpose());
        out.layer(l) = vech(sym).transpose();
    }
    return out;
}

Matrix CoefficientStack::matrix(std::size_t l) const {
    return unvech(packed_.row(static_cast<Eigen::Index>(l)).transpose(), p_);
}

bool CoefficientStack::layer_is_zero(std::size_t l) const {
    return (packed_.row(static_cast<Eigen::Index>(l)).array() == 0.0).all();
}

std::size_t CoefficientStack::nonzeros(std::size_t l) const {
    return static_cast<std::size_t>((packed_.row(static_cast<Eigen::Index>(l)).array() != 0.0).count());
}

CovariateBounds CovariateBounds::unit(std::size_t q) {
    const auto n = static_cast<Eigen::Index>(q);
    return {Vector::Constant(n, -1.0), Vector::Constant(n, 1.0)};
}

void CovariateBounds::validate() const {
    if (lower.size() != upper.size()) {
        throw InputError("CovariateBounds: lower and upper have different lengths");
    }
    for (Eigen::Index l = 0; l < lower.size(); ++l) {
        if (!std::isfinite(lower(l)) || !std::isfinite(upper(l))) {
            throw InputError("CovariateBounds: non-finite bound for covariate " + std::to_string(l + 1));
        }
        if (lower(l) > upper(l)) {
            throw InputError("CovariateBounds: lower > upper for covariate " + std::to_string(l + 1));
        }
    }
}

} // namespace scovreg

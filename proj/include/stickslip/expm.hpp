#pragma once

// Matrix exponential of a real 3x3 matrix, two independent routes:
//  - scaling and squaring with the degree-13 Pade approximant (Higham 2005);
//  - eigendecomposition A = W diag(lambda) W^-1 when W is well conditioned.

#include <array>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "stickslip/errors.hpp"

namespace stickslip {

using Mat3c = Eigen::Matrix3cd;
using Vec3c = Eigen::Vector3cd;

inline Eigen::Matrix3d expm_pade(const Eigen::Matrix3d& a)
{
    static constexpr std::array<double, 14> b = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const Eigen::Matrix3d as = a / std::ldexp(1.0, squarings);

    const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d a2 = as * as;
    const Eigen::Matrix3d a4 = a2 * a2;
    const Eigen::Matrix3d a6 = a4 * a2;
    const Eigen::Matrix3d u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2)
                                  + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    const Eigen::Matrix3d u = as * u_inner;
    const Eigen::Matrix3d v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2)
                            + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    Eigen::Matrix3d r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

/// Eigendecomposition of a real 3x3 matrix, cached for repeated exp(A t).
class ModalDecomposition {
public:
    explicit ModalDecomposition(const Eigen::Matrix3d& a)
    {
        Eigen::EigenSolver<Eigen::Matrix3d> es(a, true);
        lambda_ = es.eigenvalues();
        w_ = es.eigenvectors();
        Eigen::JacobiSVD<Mat3c> svd(w_);
        const auto sv = svd.singularValues();
        cond_ = sv(2) > 0.0 ? sv(0) / sv(2) : INFINITY;
        if (std::isfinite(cond_)) w_inv_ = w_.inverse();
    }

    /// Condition number of the eigenvector matrix (infinite if defective).
    double condition() const noexcept { return cond_; }
    const Vec3c& eigenvalues() const noexcept { return lambda_; }
    const Mat3c& eigenvectors() const noexcept { return w_; }
    const Mat3c& eigenvectors_inv() const noexcept { return w_inv_; }

    Eigen::Matrix3d exp(double t) const
    {
        Vec3c e;
        for (int i = 0; i < 3; ++i) e(i) = std::exp(lambda_(i) * t);
        return (w_ * e.asDiagonal() * w_inv_).real();
    }

private:
    Vec3c lambda_;
    Mat3c w_;
    Mat3c w_inv_ = Mat3c::Zero();
    double cond_ = INFINITY;
};

/// Eigenvector conditioning above which the modal route is not trusted.
inline constexpr double kModalConditionLimit = 1e8;

/// exp(A t) using the modal route when well conditioned, Pade otherwise.
class MatrixExponential {
public:
    explicit MatrixExponential(const Eigen::Matrix3d& a) : a_(a), modal_(a)
    {
        use_modal_ = modal_.condition() < kModalConditionLimit;
    }

    Eigen::Matrix3d at(double t) const { return use_modal_ ? modal_.exp(t) : expm_pade(a_ * t); }

    bool uses_modal() const noexcept { return use_modal_; }
    const ModalDecomposition& modal() const noexcept { return modal_; }
    const Eigen::Matrix3d& matrix() const noexcept { return a_; }

private:
    Eigen::Matrix3d a_;
    ModalDecomposition modal_;
    bool use_modal_ = false;
};

} // namespace stickslip

#pragma once

// Core domain types for a unit mass under Coulomb friction driven by a PID
// loop. All quantities are per unit mass (SI): gains in 1/s, 1/s^2, 1/s^3 and
// the Coulomb level f_c in m/s^2.
//
// Physical coordinates z = (e_i, s, v): integral of position error,
// position, velocity. Transformed coordinates x = (sigma, phi, v) with
//   sigma = -k_i s,   phi = -k_i e_i - k_p s.
// In x coordinates the closed loop reads  x' in A x - b SGN(v).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "stickslip/errors.hpp"

namespace stickslip {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct StateZ {
    double e_i = 0.0;
    double s = 0.0;
    double v = 0.0;

    Vec3 vec() const { return {e_i, s, v}; }
    static StateZ from(const Vec3& w) { return {w(0), w(1), w(2)}; }
    bool finite() const { return std::isfinite(e_i) && std::isfinite(s) && std::isfinite(v); }
    double norm() const { return std::sqrt(e_i * e_i + s * s + v * v); }
};

struct StateX {
    double sigma = 0.0;
    double phi = 0.0;
    double v = 0.0;

    Vec3 vec() const { return {sigma, phi, v}; }
    static StateX from(const Vec3& w) { return {w(0), w(1), w(2)}; }
    bool finite() const { return std::isfinite(sigma) && std::isfinite(phi) && std::isfinite(v); }
};

/// Closed interval [lo, hi]. Singletons have lo == hi.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    static Interval point(double a) { return {a, a}; }

    bool contains(double a, double tol = 0.0) const { return a >= lo - tol && a <= hi + tol; }
    bool contains(const Interval& o, double tol = 0.0) const { return o.lo >= lo - tol && o.hi <= hi + tol; }
    Interval scaled(double k) const { return k >= 0 ? Interval{k * lo, k * hi} : Interval{k * hi, k * lo}; }
    bool operator==(const Interval&) const = default;
};

/// Validated closed-loop constants. Only obtainable through validate_params,
/// so holding one means k_i > 0, k_p > 0, k_v k_p > k_i and f_c > 0.
class Params {
public:
    double k_p() const noexcept { return k_p_; }
    double k_v() const noexcept { return k_v_; }
    double k_i() const noexcept { return k_i_; }
    double f_c() const noexcept { return f_c_; }

    /// Roots of s^3 + k_v s^2 + k_p s + k_i, sorted by ascending real part
    /// then ascending imaginary part.
    const std::array<std::complex<double>, 3>& roots() const noexcept { return roots_; }

    /// A of the x-dynamics.
    Mat3 a_matrix() const
    {
        Mat3 a;
        a << 0.0, 0.0, -k_i_,
             1.0, 0.0, -k_p_,
             0.0, 1.0, -k_v_;
        return a;
    }

    /// Companion-form matrix of the z-dynamics with f_c = 0.
    Mat3 a_delta() const
    {
        Mat3 a;
        a << 0.0, 1.0, 0.0,
             0.0, 0.0, 1.0,
             -k_i_, -k_p_, -k_v_;
        return a;
    }

    Vec3 b_vector() const { return {0.0, 0.0, f_c_}; }

    /// Half-width of the equilibrium segment in e_i.
    double ei_band() const noexcept { return f_c_ / k_i_; }

private:
    friend Params validate_params(double, double, double, double);
    Params() = default;

    double k_p_ = 0.0;
    double k_v_ = 0.0;
    double k_i_ = 0.0;
    double f_c_ = 0.0;
    std::array<std::complex<double>, 3> roots_{};
};

namespace detail {

inline std::array<std::complex<double>, 3> cubic_roots(double a2, double a1, double a0)
{
    Mat3 companion;
    companion << 0.0, 0.0, -a0,
                 1.0, 0.0, -a1,
                 0.0, 1.0, -a2;
    Eigen::EigenSolver<Mat3> es(companion, false);
    std::array<std::complex<double>, 3> r{};
    for (int i = 0; i < 3; ++i) r[i] = es.eigenvalues()(i);
    // a real cubic has at most one complex pair; make it exactly conjugate so the order is stable
    for (int i = 0; i < 3; ++i) {
        if (r[i].imag() <= 0.0) continue;
        for (int j = 0; j < 3; ++j) {
            if (j == i || r[j].imag() >= 0.0) continue;
            const std::complex<double> m(0.5 * (r[i].real() + r[j].real()), 0.5 * (r[i].imag() - r[j].imag()));
            r[i] = m;
            r[j] = std::conj(m);
        }
    }
    std::sort(r.begin(), r.end(), [](auto a, auto b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return r;
}

} // namespace detail

/// Tolerance on Re(root) < 0 in the Hurwitz cross-check.
inline constexpr double kHurwitzTol = 1e-9;

inline Params validate_params(double k_p, double k_v, double k_i, double f_c)
{
    if (!std::isfinite(k_p) || !std::isfinite(k_v) || !std::isfinite(k_i) || !std::isfinite(f_c))
        throw AssumptionViolated("parameters must be finite");
    if (!(k_i > 0.0)) throw AssumptionViolated("k_i > 0 violated (k_i = " + std::to_string(k_i) + ")");
    if (!(k_p > 0.0)) throw AssumptionViolated("k_p > 0 violated (k_p = " + std::to_string(k_p) + ")");
    if (!(k_v * k_p > k_i)) {
        std::ostringstream os;
        os << "k_v k_p > k_i violated (k_v k_p = " << k_v * k_p << ", k_i = " << k_i << ")";
        throw AssumptionViolated(os.str());
    }
    if (!(f_c > 0.0)) throw AssumptionViolated("f_c > 0 violated (f_c = " + std::to_string(f_c) + ")");

    Params p;
    p.k_p_ = k_p;
    p.k_v_ = k_v;
    p.k_i_ = k_i;
    p.f_c_ = f_c;
    p.roots_ = detail::cubic_roots(k_v, k_p, k_i);
    for (const auto& r : p.roots_) {
        if (!(r.real() < -kHurwitzTol)) {
            std::ostringstream os;
            os << "characteristic root " << r << " not in the open left half plane";
            throw NonHurwitz(os.str());
        }
    }
    return p;
}

/// Table I presets with f_c = 1.
inline Params preset_case_a() { return validate_params(3.0, 6.4, 4.0, 1.0); }
inline Params preset_case_b() { return validate_params(0.66, 1.5, 0.08, 1.0); }

inline double sign(double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); }

inline double sat(double a) { return std::clamp(a, -1.0, 1.0); }

/// The set-valued sign: {sign(v)} off zero, [-1, 1] at zero.
inline Interval sgn_set(double v)
{
    if (v > 0.0) return Interval::point(1.0);
    if (v < 0.0) return Interval::point(-1.0);
    return {-1.0, 1.0};
}

/// SGN inflated by |rho_v| in both argument and value.
inline Interval sgn_inflated(double v, double rho_v)
{
    const double r = std::abs(rho_v);
    if (std::abs(v) > r) return {sign(v) - r, sign(v) + r};
    return {-1.0 - r, 1.0 + r};
}

/// PID acceleration per unit mass, including viscous friction in k_v.
inline double pid_accel(const StateZ& z, const Params& p)
{
    return -p.k_p() * z.s - p.k_v() * z.v - p.k_i() * z.e_i;
}

/// Classical three-branch (discontinuous) acceleration.
inline double classical_accel(const StateZ& z, const Params& p)
{
    const double u = pid_accel(z, p);
    const double fc = p.f_c();
    if (z.v > 0.0 || (z.v == 0.0 && u >= fc)) return u - fc;
    if (z.v < 0.0 || (z.v == 0.0 && u <= -fc)) return u + fc;
    return 0.0;
}

inline StateX to_x(const StateZ& z, const Params& p)
{
    return {-p.k_i() * z.s, -p.k_i() * z.e_i - p.k_p() * z.s, z.v};
}

inline StateZ to_z(const StateX& x, const Params& p)
{
    const double s = -x.sigma / p.k_i();
    return {(-x.phi - p.k_p() * s) / p.k_i(), s, x.v};
}

/// dz_c(a) = a - c sat(a/c). Negative widths are treated as |c|.
inline double deadzone(double a, double c)
{
    if (c == 0.0) throw ZeroWidth("deadzone width must be nonzero");
    const double w = std::abs(c);
    if (a > w) return a - w;
    if (a < -w) return a + w;
    return 0.0;
}

/// Distance from x to the equilibrium segment {sigma = v = 0, |phi| <= f_c}.
inline double dist_to_attractor_x(const StateX& x, const Params& p)
{
    const double d = deadzone(x.phi, p.f_c());
    return std::sqrt(x.sigma * x.sigma + x.v * x.v + d * d);
}

/// Distance from z to {s = v = 0, |e_i| <= f_c / k_i}.
inline double dist_to_attractor_z(const StateZ& z, const Params& p)
{
    const double d = deadzone(z.e_i, p.ei_band());
    return std::sqrt(z.s * z.s + z.v * z.v + d * d);
}

} // namespace stickslip

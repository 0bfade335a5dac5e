#pragma once

// The three affine subsystems the set-valued dynamics reduce to on each arc:
//   k = +1 : x' = A x - b            (slip, v > 0)
//   k =  0 : sigma' = 0, phi' = sigma, v' = 0   (stick ramp)
//   k = -1 : x' = A x + b            (slip, v < 0)
// plus the initial-condition table selecting k, and event times.

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "stickslip/expm.hpp"
#include "stickslip/model.hpp"

namespace stickslip {

enum class Mode : int { negative = -1, stick = 0, positive = 1 };

inline int to_int(Mode m) { return static_cast<int>(m); }

inline Mode mode_from_int(int k)
{
    return k > 0 ? Mode::positive : (k < 0 ? Mode::negative : Mode::stick);
}

/// Default absolute tolerance for the equality tests of the mode table.
inline constexpr double kClassifyTol = 1e-10;

/// Which of the eleven initial-condition rows a state falls into. Rows are
/// numbered 1..11 in the order: v>0; phi>f_c; phi=f_c,sigma>0; phi=f_c,
/// sigma=0; phi=f_c,sigma<0; |phi|<f_c; phi=-f_c,sigma>0; phi=-f_c,sigma=0;
/// phi=-f_c,sigma<0; phi<-f_c; v<0 (all but the first and last at v = 0).
inline int classify_row(const StateX& x, const Params& p, double tol = kClassifyTol)
{
    const double fc = p.f_c();
    if (x.v > tol) return 1;
    if (x.v < -tol) return 11;
    if (std::abs(x.phi - fc) <= tol) {
        if (x.sigma > tol) return 3;
        if (x.sigma < -tol) return 5;
        return 4;
    }
    if (std::abs(x.phi + fc) <= tol) {
        if (x.sigma > tol) return 7;
        if (x.sigma < -tol) return 9;
        return 8;
    }
    if (x.phi > fc) return 2;
    if (x.phi < -fc) return 10;
    return 6;
}

inline Mode mode_of_row(int row)
{
    switch (row) {
    case 1: case 2: case 3: return Mode::positive;
    case 9: case 10: case 11: return Mode::negative;
    default: return Mode::stick;
    }
}

inline Mode classify_mode(const StateX& x, const Params& p, double tol = kClassifyTol)
{
    return mode_of_row(classify_row(x, p, tol));
}

/// A state in the given table row built from three numbers in [0, 1).
/// Free components span [-5, 5]; strict inequalities keep a 0.01 gap.
inline StateX row_representative(int row, const Params& p, double a, double b, double c)
{
    const double fc = p.f_c();
    const double free_sigma = 10.0 * (a - 0.5);
    const double free_phi = 10.0 * (b - 0.5);
    const double pos = 0.01 + 5.0 * c;
    const double pos_sigma = 0.01 + 5.0 * a;
    switch (row) {
    case 1: return {free_sigma, free_phi, pos};
    case 2: return {free_sigma, fc + pos, 0.0};
    case 3: return {pos_sigma, fc, 0.0};
    case 4: return {0.0, fc, 0.0};
    case 5: return {-pos_sigma, fc, 0.0};
    case 6: return {free_sigma, 0.999 * fc * (2.0 * b - 1.0), 0.0};
    case 7: return {pos_sigma, -fc, 0.0};
    case 8: return {0.0, -fc, 0.0};
    case 9: return {-pos_sigma, -fc, 0.0};
    case 10: return {free_sigma, -fc - pos, 0.0};
    case 11: return {free_sigma, free_phi, -pos};
    default: throw Error("table rows are numbered 1..11");
    }
}

/// Affine vector field of mode k together with its exponential.
class AffineFlow {
public:
    AffineFlow(Mode mode, const Params& p)
        : mode_(mode), a_(p.a_matrix()), b_(p.b_vector()), expm_(a_)
    {
        const double det = a_.determinant();
        if (!(std::abs(det) > 0.0) || !std::isfinite(det)) throw SingularA("A is singular");
        const double k = to_int(mode_);
        // Equilibrium of x' = A x - k b.
        if (mode_ != Mode::stick) eq_ = a_.partialPivLu().solve(k * b_);
    }

    Mode mode() const noexcept { return mode_; }
    const Mat3& a_mat() const noexcept { return a_; }
    const Vec3& b_vec() const noexcept { return b_; }
    const MatrixExponential& exponential() const noexcept { return expm_; }

    /// Fixed point of the slip field (zero for the stick ramp).
    const Vec3& equilibrium() const noexcept { return eq_; }

    Vec3 field(const Vec3& xi) const
    {
        if (mode_ == Mode::stick) return {0.0, xi(0), 0.0};
        return a_ * xi - to_int(mode_) * b_;
    }

    StateX at(const StateX& xi0, double t) const
    {
        if (mode_ == Mode::stick) return {xi0.sigma, xi0.phi + xi0.sigma * t, 0.0};
        if (t == 0.0) return xi0; // the modal product is only identity up to rounding
        return StateX::from(eq_ + expm_.at(t) * (xi0.vec() - eq_));
    }

private:
    Mode mode_;
    Mat3 a_;
    Vec3 b_;
    MatrixExponential expm_;
    Vec3 eq_ = Vec3::Zero();
};

inline StateX affine_flow(Mode mode, const StateX& xi0, double t, const Params& p)
{
    return AffineFlow(mode, p).at(xi0, t);
}

/// Time for the stick ramp phi(t) = phi + sigma t to reach the boundary
/// f_c sign(sigma). Infinite when sigma = 0.
inline double stick_exit_time(const StateX& x0, const Params& p, double tol = kClassifyTol)
{
    if (classify_mode(x0, p, tol) != Mode::stick || std::abs(x0.phi) > p.f_c() + tol)
        throw NotInStick("state is not in the stick strip");
    if (x0.sigma == 0.0) return std::numeric_limits<double>::infinity();
    const double target = p.f_c() * sign(x0.sigma);
    return std::max(0.0, (target - x0.phi) / x0.sigma);
}

/// A slip arc of mode +-1 started from a fixed point, with a cheap
/// evaluation of its velocity component for event scanning.
class SlipArc {
public:
    SlipArc(const AffineFlow& flow, const StateX& xi0) : flow_(&flow), xi0_(xi0)
    {
        const Vec3 d = xi0.vec() - flow.equilibrium();
        const auto& ex = flow.exponential();
        modal_ = ex.uses_modal();
        if (modal_) {
            const auto& md = ex.modal();
            const Vec3c c = md.eigenvectors_inv() * d.cast<std::complex<double>>();
            for (int j = 0; j < 3; ++j) {
                gain_(j) = md.eigenvectors()(2, j) * c(j);
                lambda_(j) = md.eigenvalues()(j);
            }
        }
        v_eq_ = flow.equilibrium()(2);
        scale_ = d.norm();
    }

    StateX at(double t) const { return flow_->at(xi0_, t); }

    double velocity(double t) const
    {
        if (!modal_) return at(t).v;
        std::complex<double> acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += gain_(j) * std::exp(lambda_(j) * t);
        return v_eq_ + acc.real();
    }

    /// Rounding floor of velocity(t): below it the sign is not meaningful.
    double noise_floor(double t) const
    {
        constexpr double eps = std::numeric_limits<double>::epsilon();
        if (!modal_) return 64.0 * eps * (scale_ + std::abs(v_eq_));
        double m = 0.0;
        for (int j = 0; j < 3; ++j) m += std::abs(gain_(j)) * std::exp(lambda_(j).real() * t);
        return 64.0 * eps * (m + std::abs(v_eq_));
    }

    const StateX& start() const noexcept { return xi0_; }
    Mode mode() const noexcept { return flow_->mode(); }

private:
    const AffineFlow* flow_;
    StateX xi0_;
    bool modal_ = false;
    Vec3c gain_ = Vec3c::Zero();
    Vec3c lambda_ = Vec3c::Zero();
    double v_eq_ = 0.0;
    double scale_ = 0.0;
};

/// Characteristic time of A: the shortest of 2 pi/|Im| over oscillatory
/// eigenvalues and 1/|Re| over real ones.
inline double characteristic_time(const Params& p)
{
    double t = std::numeric_limits<double>::infinity();
    for (const auto& r : p.roots()) {
        if (std::abs(r.imag()) > 1e-12) t = std::min(t, 2.0 * M_PI / std::abs(r.imag()));
        else t = std::min(t, 1.0 / std::abs(r.real()));
    }
    return t;
}

inline constexpr int kBracketSamplesPerPeriod = 1024;
inline constexpr int kBracketRefineFactor = 4;
inline constexpr int kBracketMaxRefinements = 3;

namespace detail {

// Illinois false position on [a, b] with k*f(a) > 0 >= k*f(b). Stops once
// the bracket is 1e-12 relative wide and the better end has |f| <= tol.
template <class F>
double refine_crossing(F&& f, double a, double b, double k, double tol)
{
    double fa = k * f(a);
    double fb = k * f(b);
    int side = 0;
    for (int it = 0; it < 300; ++it) {
        const double width = b - a;
        const bool narrow = width <= 1e-12 * std::max(1.0, std::abs(b));
        if (narrow && std::min(std::abs(fa), std::abs(fb)) <= tol) break;
        if (width <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(b))) break;
        double c = b - fb * (b - a) / (fb - fa);
        if (!(c > a && c < b) || it % 4 == 3) c = 0.5 * (a + b);
        const double fc = k * f(c);
        if (fc == 0.0) return c;
        if (fc > 0.0) {
            a = c;
            fa = fc;
            if (side == -1) fb *= 0.5;
            side = -1;
        } else {
            b = c;
            fb = fc;
            if (side == 1) fa *= 0.5;
            side = 1;
        }
    }
    return std::abs(f(b)) <= std::abs(f(a)) ? b : a;
}

// Vertex value of the parabola through (-h, y0), (0, y1), (h, y2).
inline double parabola_min(double y0, double y1, double y2)
{
    const double curv = y0 - 2.0 * y1 + y2;
    if (curv <= 0.0) return y1;
    return y1 - (y2 - y0) * (y2 - y0) / (8.0 * curv);
}

} // namespace detail

/// First t in (0, horizon] where the arc's velocity returns to zero, or
/// nothing. Sign changes are bracketed on a uniform grid and refined by
/// false position. Local minima of |v| whose parabolic fit dips below zero
/// are re-sampled on finer grids to rule out a hidden pair of crossings.
inline std::optional<double> first_velocity_zero(const SlipArc& arc, double horizon, double tol,
                                                 double grid_dt)
{
    const double k = to_int(arc.mode());
    auto f = [&arc](double t) { return arc.velocity(t); };
    const long n = std::max(1L, static_cast<long>(std::ceil(horizon / grid_dt)));
    const double h = horizon / static_cast<double>(n);

    auto sample_t = [&](long j) { return j == n ? horizon : static_cast<double>(j) * h; };

    // Search (lo, hi) on a grid refined by factor^level for a sign change.
    auto search_sub = [&](double lo, double hi) -> std::optional<std::pair<double, double>> {
        int m = 2;
        for (int level = 1; level <= kBracketMaxRefinements; ++level) {
            m *= kBracketRefineFactor;
            const double hh = (hi - lo) / m;
            double prev_t = lo;
            for (int i = 1; i <= m; ++i) {
                const double t = lo + i * hh;
                if (k * f(t) <= 0.0) return std::make_pair(prev_t, t);
                prev_t = t;
            }
        }
        return std::nullopt;
    };

    double t_prev = 0.0;
    double y_prev = k * f(0.0);
    double y_prev2 = std::numeric_limits<double>::quiet_NaN();
    for (long j = 1; j <= n; ++j) {
        const double t = sample_t(j);
        const double y = k * f(t);
        if (y <= 0.0) {
            const double floor = arc.noise_floor(t);
            if (std::abs(y) <= floor && std::abs(y_prev) <= arc.noise_floor(t_prev)) {
                // Indistinguishable from the equilibrium: no further crossing.
                return std::nullopt;
            }
            double a = t_prev;
            if (j == 1 && !(y_prev > 0.0)) {
                // Started on v = 0 and the first sample already has the wrong
                // sign; look for a positive sample inside (0, h).
                double probe = t;
                bool found = false;
                for (int i = 0; i < 60; ++i) {
                    probe *= 0.5;
                    if (k * f(probe) > 0.0) {
                        found = true;
                        break;
                    }
                }
                if (!found) return probe;
                a = probe;
            }
            return detail::refine_crossing(f, a, t, k, tol);
        }
        if (j >= 2 && y_prev <= y_prev2 && y_prev <= y) {
            const double vertex = detail::parabola_min(y_prev2, y_prev, y);
            if (vertex < 0.0) {
                const double lo = t_prev - h;
                if (auto br = search_sub(lo, t)) return detail::refine_crossing(f, br->first, br->second, k, tol);
                // re-fit on the finest grid around the minimum
                const double hh = h / std::pow(static_cast<double>(kBracketRefineFactor), kBracketMaxRefinements);
                const double fine = detail::parabola_min(k * f(t_prev - hh), y_prev, k * f(t_prev + hh));
                if (fine < -(arc.noise_floor(t_prev) + tol))
                    throw BracketFailure("possible unresolved velocity crossing near t = " + std::to_string(t_prev));
            }
        }
        y_prev2 = y_prev;
        y_prev = y;
        t_prev = t;
    }
    return std::nullopt;
}

/// Bracketing grid spacing for a parameter set.
inline double bracket_grid_dt(const Params& p)
{
    return characteristic_time(p) / kBracketSamplesPerPeriod;
}

inline std::optional<double> slip_exit_time(Mode mode, const StateX& xi0, const Params& p, double horizon,
                                            double tol = 1e-10)
{
    if (mode == Mode::stick) throw Error("slip_exit_time needs a slip mode");
    if (!(horizon > 0.0)) throw Error("horizon must be positive");
    const AffineFlow flow(mode, p);
    const SlipArc arc(flow, xi0);
    return first_velocity_zero(arc, horizon, tol, bracket_grid_dt(p));
}

} // namespace stickslip

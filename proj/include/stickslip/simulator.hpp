#pragma once

// Simulation of the set-valued closed loop.
//
// simulate() is event driven: every arc is one of the three affine flows in
// closed form, and arcs are chained at the instants where v returns to zero
// (slip) or the integral ramp reaches the stick-strip boundary (stick).
//
// simulate_regularized() and simulate_perturbed() integrate single-valued
// friction laws with fixed-step RK4; they serve as an independent oracle and
// as one selection of the inflated friction map.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stickslip/model.hpp"
#include "stickslip/modes.hpp"

namespace stickslip {

enum class EventKind { stick_entry, stick_exit, v_crossing, horizon };
enum class PhaseKind { stick, slip_pos, slip_neg };

inline const char* to_string(EventKind k)
{
    switch (k) {
    case EventKind::stick_entry: return "stick-entry";
    case EventKind::stick_exit: return "stick-exit";
    case EventKind::v_crossing: return "v-crossing";
    case EventKind::horizon: return "horizon";
    }
    return "?";
}

inline const char* to_string(PhaseKind k)
{
    switch (k) {
    case PhaseKind::stick: return "stick";
    case PhaseKind::slip_pos: return "slip+";
    case PhaseKind::slip_neg: return "slip-";
    }
    return "?";
}

inline PhaseKind phase_of(Mode m)
{
    return m == Mode::positive ? PhaseKind::slip_pos : (m == Mode::negative ? PhaseKind::slip_neg : PhaseKind::stick);
}

struct Sample {
    double t = 0.0;
    StateZ z;
    StateX x;
    Mode mode = Mode::stick;
};

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::horizon;
    Mode before = Mode::stick;
    Mode after = Mode::stick;
    StateX x;
};

struct Phase {
    double t_start = 0.0;
    double t_end = 0.0;
    PhaseKind kind = PhaseKind::stick;

    double duration() const { return t_end - t_start; }
    bool operator==(const Phase&) const = default;
};

struct SimOptions {
    double horizon = 10.0;
    double event_tol = 1e-10;
    std::size_t max_events = 100000;
    double dense_output_dt = 1e-2;
    double classify_tol = kClassifyTol;
};

struct Trajectory {
    std::vector<Sample> samples;
    std::vector<Event> events;
    std::vector<Phase> phases;
    double horizon = 0.0;
    double dense_output_dt = 0.0;

    const Sample& front() const { return samples.front(); }
    const Sample& back() const { return samples.back(); }
};

namespace detail {

inline void validate(const SimOptions& o)
{
    if (!(o.horizon > 0.0)) throw Error("horizon must be positive");
    if (!(o.event_tol > 0.0)) throw Error("event_tol must be positive");
    if (!(o.dense_output_dt > 0.0)) throw Error("dense_output_dt must be positive");
}

// Grid instants j*dt strictly inside (t0, t1).
template <class Fn>
void for_grid(double t0, double t1, double dt, Fn&& fn)
{
    const double guard = 1e-9 * dt;
    auto j = static_cast<long long>(std::floor(t0 / dt)) + 1;
    for (;; ++j) {
        const double t = static_cast<double>(j) * dt;
        if (t <= t0 + guard) continue;
        if (t >= t1 - guard) break;
        fn(t);
    }
}

class PhaseBuilder {
public:
    void open(double t, PhaseKind k)
    {
        if (!phases_.empty() && phases_.back().kind == k && phases_.back().t_end == t) {
            open_ = true;
            start_ = phases_.back().t_start;
            phases_.pop_back();
        } else {
            open_ = true;
            start_ = t;
        }
        kind_ = k;
    }
    void close(double t)
    {
        if (!open_) return;
        phases_.push_back({start_, t, kind_});
        open_ = false;
    }
    std::vector<Phase> take() { return std::move(phases_); }

private:
    std::vector<Phase> phases_;
    bool open_ = false;
    double start_ = 0.0;
    PhaseKind kind_ = PhaseKind::stick;
};

} // namespace detail

/// Exact-mode simulation. Each arc uses the closed-form flow of the mode the
/// initial-condition table assigns to its starting point.
inline Trajectory simulate(const StateZ& z0, const Params& p, const SimOptions& opts)
{
    detail::validate(opts);
    if (!z0.finite()) throw Error("initial state must be finite");

    const double fc = p.f_c();
    const double tol = opts.classify_tol;
    const double horizon = opts.horizon;
    const double dt = opts.dense_output_dt;
    const double grid_dt = bracket_grid_dt(p);
    const AffineFlow flow_pos(Mode::positive, p);
    const AffineFlow flow_neg(Mode::negative, p);

    Trajectory tr;
    tr.horizon = horizon;
    tr.dense_output_dt = dt;
    tr.samples.reserve(static_cast<std::size_t>(horizon / dt) + 16);
    detail::PhaseBuilder phases;

    // Place a state exactly on the surfaces its table row names.
    auto snap = [&](StateX x, int row) {
        if (row != 1 && row != 11) x.v = 0.0;
        if (row >= 3 && row <= 5) x.phi = fc;
        if (row >= 7 && row <= 9) x.phi = -fc;
        return x;
    };

    StateX x = to_x(z0, p);
    int row = classify_row(x, p, tol);
    Mode mode = mode_of_row(row);
    x = snap(x, row);
    double t = 0.0;
    tr.samples.push_back({0.0, row == 1 || row == 11 ? z0 : to_z(x, p), x, mode});
    phases.open(0.0, phase_of(mode));

    for (std::size_t n_events = 0;; ++n_events) {
        if (n_events > opts.max_events)
            throw EventOverflow("more than " + std::to_string(opts.max_events) + " events before the horizon");

        if (mode == Mode::stick) {
            const StateZ ze = to_z(x, p);
            auto ramp = [&](double tau) { return StateZ{ze.e_i + ze.s * (tau - t), ze.s, 0.0}; };
            double exit_dt = std::numeric_limits<double>::infinity();
            if (std::abs(x.sigma) > tol) exit_dt = stick_exit_time(x, p, tol);
            const double t_end = t + exit_dt;
            if (!(t_end < horizon)) {
                detail::for_grid(t, horizon, dt, [&](double tau) {
                    const StateZ z = ramp(tau);
                    tr.samples.push_back({tau, z, to_x(z, p), Mode::stick});
                });
                const StateZ z = ramp(horizon);
                tr.samples.push_back({horizon, z, to_x(z, p), Mode::stick});
                tr.events.push_back({horizon, EventKind::horizon, Mode::stick, Mode::stick, tr.samples.back().x});
                phases.close(horizon);
                break;
            }
            detail::for_grid(t, t_end, dt, [&](double tau) {
                const StateZ z = ramp(tau);
                tr.samples.push_back({tau, z, to_x(z, p), Mode::stick});
            });
            const StateZ z_exit = ramp(t_end);
            StateX x_exit = to_x(z_exit, p);
            x_exit.phi = fc * sign(x.sigma);
            x_exit.v = 0.0;
            row = classify_row(x_exit, p, tol);
            Mode next = mode_of_row(row);
            if (next == Mode::stick) next = x.sigma > 0.0 ? Mode::positive : Mode::negative;
            tr.samples.push_back({t_end, z_exit, x_exit, next});
            tr.events.push_back({t_end, EventKind::stick_exit, Mode::stick, next, x_exit});
            phases.close(t_end);
            phases.open(t_end, phase_of(next));
            x = x_exit;
            mode = next;
            t = t_end;
            continue;
        }

        const AffineFlow& flow = mode == Mode::positive ? flow_pos : flow_neg;
        const SlipArc arc(flow, x);
        const auto hit = first_velocity_zero(arc, horizon - t, opts.event_tol, grid_dt);
        const double t_end = hit ? t + *hit : horizon;
        const double t_start = t;
        detail::for_grid(t_start, t_end, dt, [&](double tau) {
            const StateX xs = arc.at(tau - t_start);
            tr.samples.push_back({tau, to_z(xs, p), xs, mode});
        });
        if (!hit) {
            const StateX xs = arc.at(horizon - t_start);
            tr.samples.push_back({horizon, to_z(xs, p), xs, mode});
            tr.events.push_back({horizon, EventKind::horizon, mode, mode, xs});
            phases.close(horizon);
            break;
        }
        StateX x_end = arc.at(*hit);
        x_end.v = 0.0;
        row = classify_row(x_end, p, tol);
        Mode next = mode_of_row(row);
        if (next == mode) {
            // The arc's own field pushed v through zero, so mode k cannot
            // continue; decide between sticking and reversing by phi.
            next = std::abs(x_end.phi) <= fc + 1e3 * tol ? Mode::stick : mode_from_int(-to_int(mode));
            row = 0;
        }
        if (next == Mode::stick) {
            x_end.phi = std::clamp(x_end.phi, -fc, fc);
        } else if (row != 0) {
            x_end = snap(x_end, row);
        }
        const EventKind kind = next == Mode::stick ? EventKind::stick_entry : EventKind::v_crossing;
        tr.samples.push_back({t_end, to_z(x_end, p), x_end, next});
        tr.events.push_back({t_end, kind, mode, next, x_end});
        phases.close(t_end);
        phases.open(t_end, phase_of(next));
        x = x_end;
        mode = next;
        t = t_end;
    }
    tr.phases = phases.take();
    return tr;
}

/// Single-valued friction selection with a Gaussian Stribeck dip:
///   v -> sign(v) (f_c + (f_s - f_c) exp(-(v/v_s)^2)),  with f_s >= f_c.
struct StribeckSelection {
    double f_s = 1.0;
    double v_s = 0.1;

    double magnitude(double v, double f_c) const
    {
        const double r = v / v_s;
        return f_c + (f_s - f_c) * std::exp(-r * r);
    }

    /// Set value of the selection's graph at v (an interval at v = 0).
    Interval value_set(double v, double f_c) const
    {
        if (v == 0.0) return {-f_s, f_s};
        return Interval::point(sign(v) * magnitude(v, f_c));
    }

    /// Whether the graph lies inside f_c SGN_rho, tested on a uniform v-grid
    /// through zero covering the Stribeck dip and the inflation band.
    bool graph_inside(double f_c, double rho_v, int n_grid = 20001) const
    {
        if (!(v_s > 0.0) || f_s < f_c) return false;
        const double vmax = std::max(12.0 * v_s, 2.0 * std::abs(rho_v) + 1.0);
        const int half = n_grid / 2;
        constexpr double slack = 1e-12;
        for (int i = -half; i <= half; ++i) {
            const double v = vmax * static_cast<double>(i) / half;
            if (!sgn_inflated(v, rho_v).scaled(f_c).contains(value_set(v, f_c), slack)) return false;
        }
        // the inflation band edge itself
        for (double v : {std::abs(rho_v), -std::abs(rho_v)}) {
            if (v != 0.0 && !sgn_inflated(v, rho_v).scaled(f_c).contains(value_set(v, f_c), slack)) return false;
        }
        return true;
    }
};

struct RegularizedOptions {
    double horizon = 10.0;
    double eps = 1e-4;   // width of the sat(v/eps) band
    double step = 1e-5;  // RK4 step
    double dense_output_dt = 1e-2;
};

/// Phases from sampled velocity: runs with |v| <= tol lasting at least
/// min_stick are stick; the rest is split at sign changes of v.
inline std::vector<Phase> detect_phases(const Trajectory& tr, double tol, double min_stick)
{
    std::vector<Phase> out;
    const auto& s = tr.samples;
    if (s.empty()) return out;

    auto push = [&](double a, double b, PhaseKind k) {
        if (!out.empty() && out.back().kind == k) {
            out.back().t_end = b;
            return;
        }
        out.push_back({a, b, k});
    };

    double seg_start = s.front().t;
    int cur_sign = 0; // sign of the current slip segment, 0 if not yet known
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n) {
        if (std::abs(s[i].x.v) <= tol) {
            std::size_t j = i;
            while (j + 1 < n && std::abs(s[j + 1].x.v) <= tol) ++j;
            const double a = s[i].t;
            const double b = s[j].t;
            if (b - a >= min_stick) {
                if (a > seg_start && cur_sign != 0) push(seg_start, a, cur_sign > 0 ? PhaseKind::slip_pos : PhaseKind::slip_neg);
                push(a, b, PhaseKind::stick);
                seg_start = b;
                cur_sign = 0;
            } else {
                int next_sign = 0;
                if (j + 1 < n) next_sign = s[j + 1].x.v > 0.0 ? 1 : -1;
                if (cur_sign != 0 && next_sign != 0 && next_sign != cur_sign) {
                    const double mid = 0.5 * (a + b);
                    push(seg_start, mid, cur_sign > 0 ? PhaseKind::slip_pos : PhaseKind::slip_neg);
                    seg_start = mid;
                }
                if (next_sign != 0) cur_sign = next_sign;
            }
            i = j + 1;
            continue;
        }
        const int sg = s[i].x.v > 0.0 ? 1 : -1;
        if (cur_sign != 0 && sg != cur_sign) {
            // direct sign change between samples i-1 and i
            const double t0 = s[i - 1].t, t1 = s[i].t;
            const double v0 = s[i - 1].x.v, v1 = s[i].x.v;
            const double tc = t0 + (t1 - t0) * v0 / (v0 - v1);
            push(seg_start, tc, cur_sign > 0 ? PhaseKind::slip_pos : PhaseKind::slip_neg);
            seg_start = tc;
        }
        cur_sign = sg;
        ++i;
    }
    const double t_last = s.back().t;
    if (t_last > seg_start || out.empty()) {
        if (cur_sign != 0) push(seg_start, t_last, cur_sign > 0 ? PhaseKind::slip_pos : PhaseKind::slip_neg);
        else if (!out.empty()) out.back().t_end = t_last;
        else push(seg_start, t_last, PhaseKind::stick);
    }
    return out;
}

inline std::vector<Phase> detect_phases(const Trajectory& tr, double tol)
{
    return detect_phases(tr, tol, 2.0 * tr.dense_output_dt);
}

namespace detail {

// Fixed-step RK4 for z' = (s, v, u(z) - friction(v)).
template <class Friction>
Trajectory integrate_rk4(const StateZ& z0, const Params& p, Friction&& friction, const RegularizedOptions& o)
{
    if (!(o.eps > 0.0) || !(o.step > 0.0) || !(o.horizon > 0.0) || !(o.dense_output_dt > 0.0))
        throw Error("regularized options must be positive");
    if (!z0.finite()) throw Error("initial state must be finite");

    const double kp = p.k_p(), kv = p.k_v(), ki = p.k_i();
    auto rhs = [&](const std::array<double, 3>& z) {
        return std::array<double, 3>{z[1], z[2], -ki * z[0] - kp * z[1] - kv * z[2] - friction(z[2])};
    };

    const auto n_steps = static_cast<long long>(std::llround(o.horizon / o.step));
    const double h = o.horizon / static_cast<double>(std::max(1LL, n_steps));
    const auto every = std::max(1LL, static_cast<long long>(std::llround(o.dense_output_dt / h)));

    Trajectory tr;
    tr.horizon = o.horizon;
    tr.dense_output_dt = static_cast<double>(every) * h;
    tr.samples.reserve(static_cast<std::size_t>(n_steps / every) + 2);

    auto push = [&](double t, const std::array<double, 3>& z) {
        const StateZ zs{z[0], z[1], z[2]};
        const Mode m = std::abs(z[2]) <= o.eps ? Mode::stick : (z[2] > 0.0 ? Mode::positive : Mode::negative);
        tr.samples.push_back({t, zs, to_x(zs, p), m});
    };

    std::array<double, 3> z{z0.e_i, z0.s, z0.v};
    push(0.0, z);
    for (long long j = 1; j <= n_steps; ++j) {
        const auto k1 = rhs(z);
        std::array<double, 3> y;
        for (int i = 0; i < 3; ++i) y[i] = z[i] + 0.5 * h * k1[i];
        const auto k2 = rhs(y);
        for (int i = 0; i < 3; ++i) y[i] = z[i] + 0.5 * h * k2[i];
        const auto k3 = rhs(y);
        for (int i = 0; i < 3; ++i) y[i] = z[i] + h * k3[i];
        const auto k4 = rhs(y);
        for (int i = 0; i < 3; ++i) z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!std::isfinite(z[0]) || !std::isfinite(z[1]) || !std::isfinite(z[2]))
            throw Error("numeric overflow in regularized integration at t = " + std::to_string(j * h));
        if (j % every == 0 || j == n_steps) push(static_cast<double>(j) * h, z);
    }
    tr.events.push_back({tr.samples.back().t, EventKind::horizon, tr.samples.back().mode, tr.samples.back().mode,
                         tr.samples.back().x});
    tr.phases = detect_phases(tr, o.eps);
    return tr;
}

} // namespace detail

/// One solution of the inflated inclusion: friction is the Stribeck
/// selection, smoothed near v = 0 by sat(v/eps).
inline Trajectory simulate_perturbed(const StateZ& z0, const Params& p, double rho_v, const StribeckSelection& sel,
                                     const RegularizedOptions& o)
{
    if (rho_v < 0.0) throw Error("rho_v must be nonnegative");
    if (!sel.graph_inside(p.f_c(), rho_v))
        throw SelectionOutOfGraph("Stribeck selection (f_s, v_s) leaves the graph of f_c SGN_rho");
    const double fc = p.f_c();
    auto friction = [&](double v) { return sat(v / o.eps) * sel.magnitude(v, fc); };
    return detail::integrate_rk4(z0, p, friction, o);
}

/// sat(v/eps) regularization of the Coulomb map; shares simulate_perturbed's
/// integrator with a flat (f_s = f_c) selection.
inline Trajectory simulate_regularized(const StateZ& z0, const Params& p, const RegularizedOptions& o)
{
    return simulate_perturbed(z0, p, 0.0, StribeckSelection{p.f_c(), 1.0}, o);
}

inline Trajectory simulate_regularized(const StateZ& z0, const Params& p, double eps, double step, double horizon)
{
    return simulate_regularized(z0, p, RegularizedOptions{horizon, eps, step, 1e-2});
}

/// Linear interpolation of z at time t. Requires t inside the sampled span.
inline StateZ interpolate(const Trajectory& tr, double t)
{
    const auto& s = tr.samples;
    if (s.empty() || t < s.front().t || t > s.back().t) throw DomainMismatch("time outside trajectory span");
    auto it = std::lower_bound(s.begin(), s.end(), t, [](const Sample& a, double tt) { return a.t < tt; });
    if (it == s.begin()) return it->z;
    const Sample& b = *it;
    const Sample& a = *(it - 1);
    if (b.t == t) return b.z;
    const double w = (t - a.t) / (b.t - a.t);
    return StateZ::from((1.0 - w) * a.z.vec() + w * b.z.vec());
}

/// sup over the grid of |z_a(t) - z_b(t)|.
inline double trajectory_diff(const Trajectory& a, const Trajectory& b, std::span<const double> t_grid)
{
    double sup = 0.0;
    for (double t : t_grid) sup = std::max(sup, (interpolate(a, t).vec() - interpolate(b, t).vec()).norm());
    return sup;
}

inline std::vector<double> uniform_grid(double t0, double t1, double dt)
{
    std::vector<double> g;
    const auto n = static_cast<long long>(std::floor((t1 - t0) / dt + 1e-9));
    g.reserve(static_cast<std::size_t>(n) + 1);
    for (long long j = 0; j <= n; ++j) g.push_back(t0 + static_cast<double>(j) * dt);
    return g;
}

} // namespace stickslip

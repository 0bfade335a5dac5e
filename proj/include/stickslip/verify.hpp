#pragma once

// The invariant battery behind `stickslip verify`: mode table, oracle
// agreement, certificate audits, pointwise Lyapunov sandwiches and the stick
// law, on both presets.

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stickslip/certificates.hpp"
#include "stickslip/config.hpp"

namespace stickslip {

struct CheckResult {
    std::string name;
    std::string preset;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Whether the t = 0+ derivative of the table flow from x0 lies in F(x0),
/// and whether V agrees with V_k on [0, min(T, 1e-3)).
struct RowCheck {
    bool field_in_F = false;
    bool fd_matches_field = false;
    double v_mismatch = 0.0;
};

inline RowCheck check_row(int row, const StateX& x0, const Params& p)
{
    RowCheck out;
    const Mode mode = mode_of_row(row);
    const AffineFlow flow(mode, p);
    const Vec3 f = flow.field(x0.vec());
    const double tol = 1e-12 * (1.0 + x0.vec().norm());
    const double rest = f(2) - (x0.phi - p.k_v() * x0.v); // must lie in -f_c SGN(v)
    out.field_in_F = std::abs(f(0) + p.k_i() * x0.v) <= tol && std::abs(f(1) - (x0.sigma - p.k_p() * x0.v)) <= tol
                  && sgn_set(x0.v).scaled(-p.f_c()).contains(rest, tol);

    const double h = 1e-7;
    const Vec3 fd = (flow.at(x0, h).vec() - x0.vec()) / h;
    out.fd_matches_field = (fd - f).norm() <= 1e-4 * (1.0 + f.norm() + x0.vec().norm());

    double t_end = 1e-3;
    if (mode == Mode::stick) {
        t_end = std::min(t_end, stick_exit_time(x0, p));
    } else if (auto t = slip_exit_time(mode, x0, p, 1e-3)) {
        t_end = std::min(t_end, *t);
    }
    for (int j = 0; j < 16; ++j) {
        const StateX xi = flow.at(x0, t_end * j / 16.0);
        const double vk = lyap_Vk(mode, xi, p);
        out.v_mismatch = std::max(out.v_mismatch, std::abs(lyap_V(xi, p) - vk) / (1.0 + vk));
    }
    return out;
}

/// Stick phases: e_i affine with slope s, v = 0, inside the strip, exit on its edge.
inline bool check_stick_law(const Trajectory& tr, const Params& p, std::string* why = nullptr)
{
    for (const auto& ph : tr.phases) {
        if (ph.kind != PhaseKind::stick) continue;
        const Sample* first = nullptr;
        for (const auto& s : tr.samples) {
            if (s.t < ph.t_start || s.t > ph.t_end) continue;
            if (!first) first = &s;
            const double ramp = first->z.e_i + first->z.s * (s.t - first->t);
            const double strip = std::abs(p.k_i() * s.z.e_i + p.k_p() * s.z.s);
            if (std::abs(s.z.e_i - ramp) > 1e-9 || s.z.v != 0.0 || strip > p.f_c() + 1e-8) {
                if (why) *why = "stick law broken at t = " + std::to_string(s.t);
                return false;
            }
            if (s.t == ph.t_end && ph.t_end < tr.horizon && std::abs(strip - p.f_c()) > 1e-8) {
                if (why) *why = "stick exit off the strip edge at t = " + std::to_string(s.t);
                return false;
            }
        }
    }
    return true;
}

namespace detail {

inline CheckResult timed(const std::string& name, const std::string& preset,
                         const std::function<bool(std::string&)>& body)
{
    CheckResult r{name, preset, false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    try {
        r.passed = body(r.detail);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline std::string num(double a)
{
    std::ostringstream os;
    os.precision(3);
    os << a;
    return os.str();
}

} // namespace detail

/// Runs the battery on both presets with the config's tolerances and seed.
inline std::vector<CheckResult> run_verify_battery(const ExperimentConfig& cfg)
{
    std::vector<CheckResult> out;
    for (const std::string preset : {"case_a", "case_b"}) {
        ExperimentConfig pc = cfg;
        apply_preset(pc, preset);
        const Params p = pc.params();
        const VhatGains g = pick_vhat_gains(p);
        const StabilityConstants k = stability_constants(p, g);
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_real_distribution<double> box(-5.0, 5.0);

        out.push_back(detail::timed("constants", preset, [&](std::string& d) {
            Eigen::SelfAdjointEigenSolver<Mat3> ep(p_matrix(p)), ek(g.k_matrix());
            d = "c=" + detail::num(k.c_decrease) + " stab_gain=" + detail::num(k.stab_gain) + " c_iss=" + detail::num(k.iss.c);
            return ep.eigenvalues()(0) > 0 && ek.eigenvalues()(0) > 0 && k.c1 > 0 && k.c1 <= k.c2
                && std::abs(k.c_decrease - 2.0 * (p.k_v() * p.k_p() - p.k_i())) == 0.0;
        }));

        out.push_back(detail::timed("mode-table", preset, [&](std::string& d) {
            double worst = 0.0;
            for (int row = 1; row <= 11; ++row) {
                for (int n = 0; n < 20; ++n) {
                    const StateX x0 = row_representative(row, p, unit(rng), unit(rng), unit(rng));
                    if (classify_row(x0, p) != row) {
                        d = "representative misclassified in row " + std::to_string(row);
                        return false;
                    }
                    const RowCheck rc = check_row(row, x0, p);
                    worst = std::max(worst, rc.v_mismatch);
                    if (!rc.field_in_F || !rc.fd_matches_field || rc.v_mismatch > 1e-12) {
                        d = "row " + std::to_string(row) + " failed";
                        return false;
                    }
                }
            }
            d = "max |V - V_k| rel " + detail::num(worst);
            return true;
        }));

        out.push_back(detail::timed("oracle-equivalence", preset, [&](std::string& d) {
            const StateZ z0{0.0, 1.0, 0.0};
            SimOptions so = pc.sim;
            so.horizon = 10.0;
            so.dense_output_dt = 1e-3;
            const auto exact = simulate(z0, p, so);
            const auto reg = simulate_regularized(z0, p, RegularizedOptions{10.0, 1e-4, 1e-5, 1e-3});
            const auto grid = uniform_grid(0.0, 10.0, 1e-3);
            const double diff = trajectory_diff(exact, reg, grid);
            d = "diff " + detail::num(diff);
            return diff <= 5e-3;
        }));

        out.push_back(detail::timed("certificate-audits", preset, [&](std::string& d) {
            SimOptions so = pc.sim;
            so.horizon = preset == "case_a" ? 40.0 : 150.0;
            double worst = -INFINITY;
            for (int n = 0; n < 8; ++n) {
                const StateZ z0{box(rng), box(rng), box(rng)};
                const auto tr = simulate(z0, p, so);
                for (const auto& r : {audit_decrease(tr, p), audit_stability(tr, p, k, g), audit_iss(tr, p, k.iss, 0.0)}) {
                    worst = std::max(worst, r.worst_margin);
                    if (!r.passed) {
                        d = r.name + " failed, margin " + detail::num(r.worst_margin);
                        return false;
                    }
                }
                std::string why;
                if (!check_stick_law(tr, p, &why)) {
                    d = why;
                    return false;
                }
            }
            d = "worst margin " + detail::num(worst);
            return true;
        }));

        out.push_back(detail::timed("lyapunov-pointwise", preset, [&](std::string& d) {
            double worst_dir = -INFINITY;
            for (int n = 0; n < 10000; ++n) {
                const StateX x{box(rng), box(rng), box(rng)};
                const double dist2 = std::pow(dist_to_attractor_x(x, p), 2);
                const double v = lyap_V(x, p);
                const double vh = lyap_Vhat(x, p, g);
                const double slack = 1e-12 * (1.0 + v + vh);
                if (v < k.c1 * dist2 - slack) {
                    d = "V below c1 |x|^2";
                    return false;
                }
                if (region_R(x, p)) {
                    if (v > k.c2 * dist2 + slack) {
                        d = "V above c2 |x|^2 on R";
                        return false;
                    }
                } else {
                    if (vh < k.chat1 * dist2 - slack || vh > k.chat2 * dist2 + slack) {
                        d = "Vhat sandwich broken on Rhat";
                        return false;
                    }
                    if (x.v != 0.0) worst_dir = std::max(worst_dir, vhat_directional_check(x, p, g));
                }
            }
            d = "max Vhat derivative on Rhat " + detail::num(worst_dir);
            return worst_dir <= 1e-12;
        }));
    }
    return out;
}

} // namespace stickslip

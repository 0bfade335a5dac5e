#pragma once

// Lyapunov objects for the closed loop and audits of simulated trajectories.
//
//   V(x)  = [sigma v] G [sigma v]^T + min_{f in f_c SGN(v)} (phi - f)^2,
//           G = [[k_v/k_i, -1], [-1, k_p]]             (discontinuous, lsc)
//   V_k   = |(sigma, phi - k f_c, v)|_P^2 on slip arcs, (k_v/k_i) sigma^2 on stick
//   Vhat  = k1 sigma^2/2 + k2 dz(phi)^2/2 + k3 |sigma||v| + k4 v^2/2
//
// Along solutions V(x(t2)) - V(x(t1)) <= -c int v^2 with c = 2(k_v k_p - k_i);
// Vhat is nonincreasing while the state stays outside R.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stickslip/expm.hpp"
#include "stickslip/model.hpp"
#include "stickslip/modes.hpp"
#include "stickslip/simulator.hpp"

namespace stickslip {

/// The 3x3 weight of V in (sigma, phi - f, v).
inline Mat3 p_matrix(const Params& p)
{
    Mat3 m;
    m << p.k_v() / p.k_i(), 0.0, -1.0,
         0.0, 1.0, 0.0,
         -1.0, 0.0, p.k_p();
    return m;
}

struct VhatGains {
    double k1 = 1.0;
    double k2 = 1.0;
    double k3 = 1.0;
    double k4 = 1.0;

    Mat3 k_matrix() const
    {
        Mat3 m;
        m << k1, 0.0, k3,
             0.0, k2, 0.0,
             k3, 0.0, k4;
        return m;
    }

    /// Strict inequalities that make Vhat nonincreasing outside R.
    bool admissible(const Params& p) const
    {
        const double r = p.k_i() / p.k_v();
        return k1 > 0 && k2 > 0 && k3 > 0 && k4 > 0
            && k3 > std::max(r * k1, k2)
            && k4 > std::max({r * k3, p.k_p() * k2, k3 * k3 / k1})
            && k1 * k4 > k3 * k3;
    }
};

inline double quad_part(const StateX& x, const Params& p)
{
    return p.k_v() / p.k_i() * x.sigma * x.sigma - 2.0 * x.sigma * x.v + p.k_p() * x.v * x.v;
}

inline double lyap_V(const StateX& x, const Params& p)
{
    const double fc = p.f_c();
    double d;
    if (x.v > 0.0) d = x.phi - fc;
    else if (x.v < 0.0) d = x.phi + fc;
    else d = deadzone(x.phi, fc);
    return quad_part(x, p) + d * d;
}

inline double lyap_Vk(Mode mode, const StateX& xi, const Params& p)
{
    if (mode == Mode::stick) return p.k_v() / p.k_i() * xi.sigma * xi.sigma;
    const double d = xi.phi - to_int(mode) * p.f_c();
    return quad_part(xi, p) + d * d;
}

inline double lyap_Vhat(const StateX& x, const Params& p, const VhatGains& g)
{
    const double d = deadzone(x.phi, p.f_c());
    return 0.5 * g.k1 * x.sigma * x.sigma + 0.5 * g.k2 * d * d + g.k3 * std::abs(x.sigma) * std::abs(x.v)
         + 0.5 * g.k4 * x.v * x.v;
}

/// k1 = k2 = 1, k3 and k4 the smallest admissible values inflated by margin.
inline VhatGains pick_vhat_gains(const Params& p, double margin = 1.01)
{
    if (!(margin > 1.0)) throw GainSynthesisFailed("margin must exceed 1");
    const double r = p.k_i() / p.k_v();
    VhatGains g;
    g.k1 = 1.0;
    g.k2 = 1.0;
    g.k3 = margin * std::max(r, 1.0);
    g.k4 = margin * std::max({r * g.k3, p.k_p(), g.k3 * g.k3});
    if (!g.admissible(p)) throw GainSynthesisFailed("synthesized gains violate the Vhat constraints");
    return g;
}

/// R = {v (phi - sign(v) f_c) >= 0}; its complement is where Vhat is used.
inline bool region_R(const StateX& x, const Params& p)
{
    return x.v * (x.phi - sign(x.v) * p.f_c()) >= 0.0;
}

/// Upper Dini-type derivative of Vhat along F at a point outside R with
/// v != 0: the max of <grad, f> over the generalized gradient of |sigma|.
inline double vhat_directional_check(const StateX& x, const Params& p, const VhatGains& g)
{
    const double fc = p.f_c();
    const double sv = sign(x.v);
    const Vec3 f{-p.k_i() * x.v, x.sigma - p.k_p() * x.v, x.phi - p.k_v() * x.v - fc * sv};
    const double d = deadzone(x.phi, fc);
    auto value = [&](double zeta) {
        const Vec3 grad{g.k1 * x.sigma + g.k3 * zeta * std::abs(x.v),
                        g.k2 * d,
                        g.k3 * std::abs(x.sigma) * sv + g.k4 * x.v};
        return grad.dot(f);
    };
    if (x.sigma != 0.0) return value(sign(x.sigma));
    return std::max(value(-1.0), value(1.0));
}

/// Constants of the exponential envelope |z(t)| <= c e^{-lambda t}|z0| + c(1+|rho|)
/// and the distance form |z(t)|_A <= k1 e^{-lambda t}|z0|_A + k2 + k3 |rho|.
struct IssEnvelope {
    double c = 0.0;
    double lambda = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double kappa3 = 0.0;
    double transient_gain = 0.0; // sup_t e^{lambda t} |exp(A_delta t)|
    double forced_gain = 0.0;    // int_0^inf |exp(A_delta t) e3| dt

    double norm_bound(double t, double z0_norm, double rho_v) const
    {
        return c * std::exp(-lambda * t) * z0_norm + c * (1.0 + std::abs(rho_v));
    }
    double dist_bound(double t, double z0_dist, double rho_v) const
    {
        return kappa1 * std::exp(-lambda * t) * z0_dist + kappa2 + kappa3 * std::abs(rho_v);
    }
};

namespace detail {

inline double spectral_norm(const Mat3& m)
{
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    es.computeDirect(m.transpose() * m, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues()(2)));
}

} // namespace detail

/// Envelope constants from the linear comparison system z' = A_delta z - f_c e3 m(t),
/// |m| <= 1 + |rho|. lambda = 0.99 min|Re eig|; the transient gain is the sup of
/// e^{lambda t}|exp(A_delta t)| on a fine grid (inflated for the gaps between
/// samples) with a modal tail bound; the forced gain is an upper Riemann sum.
inline IssEnvelope iss_envelope(const Params& p)
{
    const Mat3 a = p.a_delta();
    const ModalDecomposition md(a);
    double alpha = INFINITY;
    for (int i = 0; i < 3; ++i) alpha = std::min(alpha, -md.eigenvalues()(i).real());
    if (!(alpha > 0.0)) throw NonHurwitz("A_delta is not Hurwitz");
    if (!std::isfinite(md.condition())) throw NonHurwitz("A_delta is defective; modal tail bound unavailable");

    IssEnvelope env;
    env.lambda = 0.99 * alpha;
    const double tail_k = md.condition();
    const double a_norm = detail::spectral_norm(a);
    const double h = 0.02 / (a_norm + env.lambda);
    const Mat3 step = expm_pade(a * h);

    Mat3 e = Mat3::Identity();
    double c_tr = 0.0;
    double g_sum = 0.0;
    double tail_g = 0.0;
    for (long j = 0;; ++j) {
        const double t = static_cast<double>(j) * h;
        c_tr = std::max(c_tr, detail::spectral_norm(e) * std::exp(env.lambda * t));
        g_sum += h * e.col(2).norm();
        const double tail_tr = tail_k * std::exp(-(alpha - env.lambda) * t);
        tail_g = tail_k * std::exp(-alpha * (t + h)) / alpha;
        if (j > 0 && tail_tr <= c_tr && tail_g <= 1e-9 * g_sum) break;
        e = step * e;
    }
    env.transient_gain = c_tr * std::exp((a_norm + env.lambda) * h);
    env.forced_gain = g_sum * std::exp(a_norm * h) + tail_g;
    env.c = std::max(env.transient_gain, p.f_c() * env.forced_gain);
    // |z|_A <= |z| and |z| <= sqrt(2)(|z|_A + f_c/k_i).
    env.kappa1 = std::sqrt(2.0) * env.c;
    env.kappa2 = env.c * (1.0 + std::sqrt(2.0) * p.ei_band());
    env.kappa3 = env.c;
    return env;
}

struct StabilityConstants {
    double c1 = 0.0;
    double c2 = 0.0;
    double chat1 = 0.0;
    double chat2 = 0.0;
    double c_decrease = 0.0;
    double stab_gain = 0.0;
    IssEnvelope iss;
    std::optional<double> delta_l;

    /// Time after which the envelope alone brings |z|_A below 1/delta_l.
    std::optional<double> reaching_time(double s) const
    {
        if (!delta_l) return std::nullopt;
        return std::max(0.0, std::log(2.0 * *delta_l * iss.kappa1 * s) / iss.lambda);
    }
};

inline StabilityConstants stability_constants(const Params& p, const VhatGains& g)
{
    StabilityConstants k;
    Eigen::Matrix2d gm;
    gm << p.k_v() / p.k_i(), -1.0, -1.0, p.k_p();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> e2(gm);
    Eigen::SelfAdjointEigenSolver<Mat3> ep(p_matrix(p));
    Eigen::SelfAdjointEigenSolver<Mat3> ek(g.k_matrix());
    k.c1 = std::min(e2.eigenvalues()(0), 1.0);
    k.c2 = ep.eigenvalues()(2);
    k.chat1 = 0.5 * ek.eigenvalues()(0);
    k.chat2 = 0.5 * ek.eigenvalues()(2);
    k.c_decrease = 2.0 * (p.k_v() * p.k_p() - p.k_i());
    k.stab_gain = std::sqrt(k.c2 * k.chat2 / (k.c1 * k.chat1));
    k.iss = iss_envelope(p);
    return k;
}

struct VJump {
    double t = 0.0;
    double dv = 0.0; // V after minus left limit of V
};

struct CertificateReport {
    std::string name;
    bool passed = true;
    double worst_margin = -INFINITY; // max of (lhs - allowed); <= 0 means pass
    double t1 = 0.0;                  // location of the worst pair
    double t2 = 0.0;
    std::size_t checks = 0;
    std::vector<VJump> jumps;
    std::string detail;

    void record(double margin, double a, double b)
    {
        ++checks;
        if (margin > worst_margin) {
            worst_margin = margin;
            t1 = a;
            t2 = b;
        }
        if (margin > 0.0) passed = false;
    }
};

/// Throws AuditFailed carrying the worst pair when the report failed.
inline void enforce(const CertificateReport& r)
{
    if (r.passed) return;
    std::ostringstream os;
    os << r.name << " audit failed: margin " << r.worst_margin << " at (" << r.t1 << ", " << r.t2 << ")";
    if (!r.detail.empty()) os << "; " << r.detail;
    throw AuditFailed(os.str(), r.t1, r.t2);
}

namespace detail {

// Integral over [t[i1], t[i2]] of the quadratic through three nodes, by
// two-point Gauss-Legendre (exact for quadratics).
inline double quad_interval(const double* t, const double* f, int i0, int i1, int i2, double a, double b)
{
    auto lag = [&](double x) {
        const double x0 = t[i0], x1 = t[i1], x2 = t[i2];
        return f[i0] * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
             + f[i1] * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
             + f[i2] * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
    };
    const double m = 0.5 * (a + b);
    const double r = 0.5 * (b - a) / std::sqrt(3.0);
    return 0.5 * (b - a) * (lag(m - r) + lag(m + r));
}

// Cumulative integral of f over nodes t[0..n-1] at a subset of nodes:
// Simpson on pairs of equal intervals, a local quadratic rule elsewhere.
// Returns (node index, integral from t[0]) for each audit node.
inline std::vector<std::pair<std::size_t, double>> cumulative_simpson(const std::vector<double>& t,
                                                                      const std::vector<double>& f)
{
    std::vector<std::pair<std::size_t, double>> out;
    const std::size_t n = t.size();
    if (n == 0) return out;
    out.emplace_back(0, 0.0);
    double acc = 0.0;
    std::size_t i = 0;
    while (i + 1 < n) {
        const double h0 = t[i + 1] - t[i];
        if (i + 2 < n) {
            const double h1 = t[i + 2] - t[i + 1];
            if (std::abs(h1 - h0) <= 1e-9 * std::max(h0, h1)) {
                acc += (h0 + h1) / 6.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
                i += 2;
                out.emplace_back(i, acc);
                continue;
            }
        }
        if (n < 3) {
            acc += 0.5 * h0 * (f[i] + f[i + 1]);
        } else {
            const int a = static_cast<int>(i + 2 < n ? i : i - 1);
            acc += quad_interval(t.data(), f.data(), a, a + 1, a + 2, t[i], t[i + 1]);
        }
        ++i;
        out.emplace_back(i, acc);
    }
    return out;
}

// Index ranges [a, b] of samples between consecutive events.
inline std::vector<std::pair<std::size_t, std::size_t>> segments(const Trajectory& tr)
{
    std::set<double> cuts;
    for (const auto& e : tr.events) cuts.insert(e.t);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t start = 0;
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
        if (cuts.count(tr.samples[i].t) || i + 1 == tr.samples.size()) {
            out.emplace_back(start, i);
            start = i;
        }
    }
    if (tr.samples.size() == 1) out.emplace_back(0, 0);
    return out;
}

} // namespace detail

/// Checks V(x(t2)) - V(x(t1)) + c int_{t1}^{t2} v^2 <= 1e-6 (1 + V(x(t1)))
/// for every ordered pair of audit nodes (event points and Simpson nodes), and
/// records the V jumps at stick entries and velocity reversals.
inline CertificateReport audit_decrease(const Trajectory& tr, const Params& p, double rel_slack = 1e-6)
{
    CertificateReport rep;
    rep.name = "decrease";
    const double c = 2.0 * (p.k_v() * p.k_p() - p.k_i());

    struct Node {
        double t, w, slack;
    };
    std::vector<Node> nodes;
    double base = 0.0;
    for (const auto& [a, b] : detail::segments(tr)) {
        std::vector<double> ts, fs;
        for (std::size_t i = a; i <= b; ++i) {
            ts.push_back(tr.samples[i].t);
            fs.push_back(tr.samples[i].x.v * tr.samples[i].x.v);
        }
        const auto cum = detail::cumulative_simpson(ts, fs);
        for (const auto& [k, integral] : cum) {
            if (!nodes.empty() && k == 0) continue; // shared with previous segment
            const auto& s = tr.samples[a + k];
            const double v = lyap_V(s.x, p);
            nodes.push_back({s.t, v + c * (base + integral), rel_slack * (1.0 + v)});
        }
        base += cum.back().second;
    }

    // worst W(t2) - W(t1) - slack(t1) over t1 < t2 via a running minimum
    double best = INFINITY;
    double best_t = 0.0;
    for (const auto& n : nodes) {
        if (std::isfinite(best)) rep.record(n.w - best, best_t, n.t);
        if (n.w + n.slack < best) {
            best = n.w + n.slack;
            best_t = n.t;
        }
    }

    for (const auto& e : tr.events) {
        if (e.kind != EventKind::stick_entry && e.kind != EventKind::v_crossing) continue;
        const double left = lyap_Vk(e.before, e.x, p);
        const double at = lyap_V(e.x, p);
        rep.jumps.push_back({e.t, at - left});
        if (at - left > rel_slack * (1.0 + left)) {
            rep.passed = false;
            rep.detail = "upward V jump at t = " + std::to_string(e.t);
        }
    }
    return rep;
}

/// Checks sup_t |x(t)|_A <= stab_gain |x(0)|_A + 1e-9 and that Vhat does not
/// increase across consecutive samples that both lie outside R.
inline CertificateReport audit_stability(const Trajectory& tr, const Params& p, const StabilityConstants& k,
                                         const VhatGains& g)
{
    CertificateReport rep;
    rep.name = "stability";
    if (tr.samples.empty()) return rep;
    const double d0 = dist_to_attractor_x(tr.front().x, p);
    const double bound = k.stab_gain * d0 + 1e-9;
    double prev_vhat = 0.0;
    bool prev_out = false;
    double prev_t = 0.0;
    for (const auto& s : tr.samples) {
        rep.record(dist_to_attractor_x(s.x, p) - bound, 0.0, s.t);
        const bool out = !region_R(s.x, p);
        const double vh = lyap_Vhat(s.x, p, g);
        if (out && prev_out) {
            const double m = vh - prev_vhat - 1e-9 * (1.0 + prev_vhat);
            if (m > 0.0) rep.detail = "Vhat increased outside R";
            rep.record(m, prev_t, s.t);
        }
        prev_out = out;
        prev_vhat = vh;
        prev_t = s.t;
    }
    return rep;
}

/// Checks the exponential envelope and its distance form at every sample.
inline CertificateReport audit_iss(const Trajectory& tr, const Params& p, const IssEnvelope& env, double rho_v)
{
    CertificateReport rep;
    rep.name = "iss";
    if (tr.samples.empty()) return rep;
    const double n0 = tr.front().z.norm();
    const double d0 = dist_to_attractor_z(tr.front().z, p);
    for (const auto& s : tr.samples) {
        rep.record(s.z.norm() - env.norm_bound(s.t, n0, rho_v), 0.0, s.t);
        rep.record(dist_to_attractor_z(s.z, p) - env.dist_bound(s.t, d0, rho_v), 0.0, s.t);
    }
    return rep;
}

/// sup of |z|_A over the final `fraction` of the sampled span.
inline double tail_sup_dist(const Trajectory& tr, const Params& p, double fraction = 0.25)
{
    const double t0 = tr.back().t * (1.0 - fraction);
    double m = 0.0;
    for (const auto& s : tr.samples)
        if (s.t >= t0) m = std::max(m, dist_to_attractor_z(s.z, p));
    return m;
}

} // namespace stickslip

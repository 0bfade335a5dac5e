#include <random>

#include <gtest/gtest.h>

#include "stickslip/certificates.hpp"
#include "support/oracles.hpp"

using namespace stickslip;

namespace {

SimOptions opts(double horizon)
{
    SimOptions o;
    o.horizon = horizon;
    return o;
}

StateX random_x(std::mt19937_64& rng, double r = 5.0)
{
    std::uniform_real_distribution<double> u(-r, r);
    return {u(rng), u(rng), u(rng)};
}

} // namespace

TEST(Lyapunov, VMatchesGridMinOracle)
{
    const Params p = preset_case_b();
    std::mt19937_64 rng(53);
    for (int n = 0; n < 200; ++n) {
        StateX x = random_x(rng);
        if (n % 3 == 0) x.v = 0.0;
        const double ref = quad_part(x, p) + oracle::min_term_grid(x.phi, x.v, p.f_c());
        EXPECT_NEAR(lyap_V(x, p), ref, 1e-8 * (1.0 + ref));
    }
}

TEST(Lyapunov, ZeroOnAttractorAndLowerBound)
{
    for (const Params& p : {preset_case_a(), preset_case_b()}) {
        const auto k = stability_constants(p, pick_vhat_gains(p));
        for (double phi : {-1.0, -0.3, 0.0, 0.9, 1.0}) EXPECT_EQ(lyap_V({0.0, phi, 0.0}, p), 0.0);
        std::mt19937_64 rng(59);
        for (int n = 0; n < 100000; ++n) {
            const StateX x = random_x(rng);
            const double d = dist_to_attractor_x(x, p);
            EXPECT_GE(lyap_V(x, p) - k.c1 * d * d, -1e-12 * (1.0 + lyap_V(x, p)));
        }
    }
}

TEST(Lyapunov, UpperBoundOnRFailsOnRhat)
{
    const Params p = preset_case_a();
    const auto k = stability_constants(p, pick_vhat_gains(p));
    std::mt19937_64 rng(61);
    int in_r = 0;
    while (in_r < 10000) {
        const StateX x = random_x(rng);
        if (!region_R(x, p)) continue;
        ++in_r;
        const double d2 = std::pow(dist_to_attractor_x(x, p), 2);
        EXPECT_LE(lyap_V(x, p), k.c2 * d2 * (1.0 + 1e-12) + 1e-15);
    }
    const StateX w{0.0, 0.0, 1e-3};
    EXPECT_FALSE(region_R(w, p));
    EXPECT_GT(lyap_V(w, p), k.c2 * std::pow(dist_to_attractor_x(w, p), 2));
}

TEST(Lyapunov, DiscontinuityWitness)
{
    const Params p = preset_case_a();
    for (double eps : {1e-3, 1e-6, 1e-9}) {
        const double v = lyap_V({0.0, 0.0, eps}, p);
        // exact up to the rounding of f_c^2 + k_p eps^2
        EXPECT_LE(std::abs(v - p.f_c() * p.f_c() - p.k_p() * eps * eps), 4.0 * std::numeric_limits<double>::epsilon());
        EXPECT_GE(v, p.f_c() * p.f_c());
    }
    EXPECT_EQ(lyap_V({0.0, 0.0, 0.0}, p), 0.0);
}

TEST(Lyapunov, VkDerivativeOnSlipArcs)
{
    for (const Params& p : {preset_case_a(), preset_case_b()}) {
        const double c = 2.0 * (p.k_v() * p.k_p() - p.k_i());
        std::mt19937_64 rng(67);
        for (Mode m : {Mode::positive, Mode::negative}) {
            const AffineFlow flow(m, p);
            for (int n = 0; n < 50; ++n) {
                const StateX x0 = random_x(rng);
                const double t = 0.5;
                const auto vk = [&](double tt) { return lyap_Vk(m, flow.at(x0, tt), p); };
                const double fd = oracle::central_diff(vk, t, 1e-4);
                const double v = flow.at(x0, t).v;
                EXPECT_NEAR(fd, -c * v * v, 1e-6 * std::max(1.0, c * v * v));
            }
        }
    }
}

TEST(Gains, SynthesisAndPositiveDefinite)
{
    const Params a = preset_case_a();
    const VhatGains g = pick_vhat_gains(a);
    EXPECT_DOUBLE_EQ(g.k3, 1.01);
    EXPECT_DOUBLE_EQ(g.k4, 3.03);
    EXPECT_TRUE(g.admissible(a));
    for (const Params& p : {a, preset_case_b()}) {
        const VhatGains gg = pick_vhat_gains(p);
        Eigen::SelfAdjointEigenSolver<Mat3> ek(gg.k_matrix()), ep(p_matrix(p));
        EXPECT_GT(ek.eigenvalues()(0), 0.0);
        EXPECT_GT(ep.eigenvalues()(0), 0.0);
    }
    EXPECT_THROW(pick_vhat_gains(a, 1.0), GainSynthesisFailed);
}

TEST(Constants, Values)
{
    const auto ka = stability_constants(preset_case_a(), pick_vhat_gains(preset_case_a()));
    const auto kb = stability_constants(preset_case_b(), pick_vhat_gains(preset_case_b()));
    EXPECT_DOUBLE_EQ(ka.c_decrease, 30.4);
    EXPECT_NEAR(kb.c_decrease, 1.82, 1e-15);
    for (const auto& k : {ka, kb}) {
        EXPECT_GT(k.c1, 0.0);
        EXPECT_LE(k.c1, k.c2);
        EXPECT_GT(k.chat1, 0.0);
        EXPECT_DOUBLE_EQ(k.stab_gain, std::sqrt(k.c2 * k.chat2 / (k.c1 * k.chat1)));
    }
}

TEST(Region, Examples)
{
    const Params p = preset_case_a();
    EXPECT_TRUE(region_R({3.0, -2.0, 0.0}, p));
    EXPECT_TRUE(region_R({0.0, 2.0, 1.0}, p));
    EXPECT_FALSE(region_R({0.0, 0.0, 1.0}, p));
}

TEST(Vhat, SandwichAndDirectionalDerivative)
{
    for (const Params& p : {preset_case_a(), preset_case_b()}) {
        const VhatGains g = pick_vhat_gains(p);
        const auto k = stability_constants(p, g);
        EXPECT_LE(vhat_directional_check({0.0, 0.0, 1.0}, p, g), 0.0);
        std::mt19937_64 rng(71);
        int checked = 0;
        while (checked < 20000) {
            const StateX x = random_x(rng);
            if (region_R(x, p)) continue;
            ++checked;
            const double d2 = std::pow(dist_to_attractor_x(x, p), 2);
            const double vh = lyap_Vhat(x, p, g);
            EXPECT_GE(vh, k.chat1 * d2 * (1.0 - 1e-12));
            EXPECT_LE(vh, k.chat2 * d2 * (1.0 + 1e-12));
            EXPECT_LE(vhat_directional_check(x, p, g), 1e-12);
        }
    }
}

TEST(Vhat, DirectionalMatchesFiniteDifference)
{
    const Params p = preset_case_a();
    const VhatGains g = pick_vhat_gains(p);
    std::mt19937_64 rng(73);
    int checked = 0;
    while (checked < 200) {
        const StateX x = random_x(rng, 3.0);
        if (region_R(x, p) || std::abs(x.sigma) < 0.1 || std::abs(std::abs(x.phi) - p.f_c()) < 0.1) continue;
        ++checked;
        const Vec3 f = p.a_matrix() * x.vec() - sign(x.v) * p.b_vector();
        const double h = 1e-7;
        const double fd = (lyap_Vhat(StateX::from(x.vec() + h * f), p, g) - lyap_Vhat(x, p, g)) / h;
        const double an = vhat_directional_check(x, p, g);
        EXPECT_NEAR(fd, an, 1e-5 * (1.0 + std::abs(an)));
    }
}

TEST(Audit, EquilibriumPassesTrivially)
{
    const Params p = preset_case_a();
    const VhatGains g = pick_vhat_gains(p);
    const auto k = stability_constants(p, g);
    const auto tr = simulate({0.1, 0.0, 0.0}, p, opts(5.0));
    const auto d = audit_decrease(tr, p);
    EXPECT_TRUE(d.passed);
    EXPECT_LE(d.worst_margin, 0.0);
    EXPECT_TRUE(audit_stability(tr, p, k, g).passed);
    EXPECT_NO_THROW(enforce(d));
}

TEST(Audit, DecreaseStaircaseOnCaseA)
{
    const Params p = preset_case_a();
    const auto tr = simulate({0.0, 1.0, 0.0}, p, opts(40.0));
    const auto rep = audit_decrease(tr, p);
    EXPECT_TRUE(rep.passed) << rep.worst_margin;
    for (const auto& ph : tr.phases) {
        if (ph.kind != PhaseKind::stick) continue;
        const double v0 = lyap_V(to_x(interpolate(tr, ph.t_start), p), p);
        for (const auto& s : tr.samples)
            if (s.t >= ph.t_start && s.t <= ph.t_end) EXPECT_NEAR(lyap_V(s.x, p), v0, 1e-12 * (1.0 + v0));
    }
}

TEST(Audit, JumpsNeverUpward)
{
    std::mt19937_64 rng(79);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int n = 0; n < 50; ++n) {
        const Params p = n % 2 ? preset_case_a() : preset_case_b();
        const auto tr = simulate({u(rng), u(rng), u(rng)}, p, opts(40.0));
        const auto rep = audit_decrease(tr, p);
        EXPECT_TRUE(rep.passed) << n;
        for (const auto& j : rep.jumps) EXPECT_LE(j.dv, 1e-9) << n;
    }
}

TEST(Audit, DetectsViolation)
{
    // Reversed time order makes V grow; the audit must flag it.
    const Params p = preset_case_a();
    auto tr = simulate({0.0, 1.0, 0.0}, p, opts(5.0));
    tr.events.clear();
    const double t_end = tr.samples.back().t;
    std::reverse(tr.samples.begin(), tr.samples.end());
    for (auto& s : tr.samples) s.t = t_end - s.t;
    const auto rep = audit_decrease(tr, p);
    EXPECT_FALSE(rep.passed);
    EXPECT_LT(rep.t1, rep.t2);
    try {
        enforce(rep);
        FAIL();
    } catch (const AuditFailed& e) {
        EXPECT_EQ(e.t1(), rep.t1);
        EXPECT_EQ(e.t2(), rep.t2);
    }
}

TEST(Audit, StabilityAndIssOnRandomRuns)
{
    for (const Params& p : {preset_case_a(), preset_case_b()}) {
        const VhatGains g = pick_vhat_gains(p);
        const auto k = stability_constants(p, g);
        std::mt19937_64 rng(83);
        std::uniform_real_distribution<double> u(-5, 5);
        for (int n = 0; n < 20; ++n) {
            const auto tr = simulate({u(rng), u(rng), u(rng)}, p, opts(60.0));
            EXPECT_TRUE(audit_stability(tr, p, k, g).passed) << n;
            EXPECT_TRUE(audit_iss(tr, p, k.iss, 0.0).passed) << n;
        }
    }
}

TEST(Iss, EnvelopeConstants)
{
    const Params p = preset_case_a();
    const auto env = iss_envelope(p);
    double alpha = INFINITY;
    for (const auto& r : p.roots()) alpha = std::min(alpha, -r.real());
    EXPECT_NEAR(env.lambda, 0.99 * alpha, 1e-14);
    EXPECT_GE(env.c, 1.0);
    EXPECT_DOUBLE_EQ(env.kappa1, std::sqrt(2.0) * env.c);
    EXPECT_DOUBLE_EQ(env.kappa2, env.c * (1.0 + std::sqrt(2.0) * p.ei_band()));
    EXPECT_DOUBLE_EQ(env.kappa3, env.c);

    // the transient gain dominates e^{lambda t}|exp(A t)| on an independent grid
    for (double t = 0.0; t < 60.0; t += 0.0137) {
        const Mat3 e = oracle::expm_taylor(p.a_delta() * t);
        EXPECT_LE(e.norm() / std::sqrt(3.0) * std::exp(env.lambda * t), env.transient_gain);
        Eigen::JacobiSVD<Mat3> svd(e);
        EXPECT_LE(svd.singularValues()(0) * std::exp(env.lambda * t), env.transient_gain);
    }
}

TEST(Iss, PerturbedRunsStayInEnvelope)
{
    const Params p = preset_case_a();
    const auto env = iss_envelope(p);
    std::mt19937_64 rng(89);
    std::uniform_real_distribution<double> u(-5, 5);
    for (double rho : {0.0, 0.1, 0.3}) {
        const StribeckSelection sel{p.f_c() * (1.0 + rho), 0.1};
        for (int n = 0; n < 3; ++n) {
            const auto tr = simulate_perturbed({u(rng), u(rng), u(rng)}, p, rho, sel, RegularizedOptions{20.0, 1e-4, 2e-5, 0.05});
            EXPECT_TRUE(audit_iss(tr, p, env, rho).passed) << rho;
        }
    }
}

TEST(Iss, ReachingTimeOnlyWithDelta)
{
    auto k = stability_constants(preset_case_a(), pick_vhat_gains(preset_case_a()));
    EXPECT_FALSE(k.reaching_time(1.0).has_value());
    k.delta_l = 0.01;
    EXPECT_EQ(*k.reaching_time(1.0), 0.0);
    EXPECT_GT(*k.reaching_time(1000.0), 0.0);
}

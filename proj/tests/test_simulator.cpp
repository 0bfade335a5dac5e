#include <random>

#include <gtest/gtest.h>

#include "stickslip/simulator.hpp"
#include "support/oracles.hpp"

using namespace stickslip;

namespace {

SimOptions opts(double horizon, double dt = 1e-2)
{
    SimOptions o;
    o.horizon = horizon;
    o.dense_output_dt = dt;
    return o;
}

} // namespace

TEST(Simulate, EquilibriumIsConstant)
{
    const Params p = preset_case_a();
    const StateZ z0{0.5 * p.ei_band(), 0.0, 0.0};
    const Trajectory tr = simulate(z0, p, opts(10.0));
    ASSERT_EQ(tr.phases.size(), 1u);
    EXPECT_EQ(tr.phases[0].kind, PhaseKind::stick);
    EXPECT_EQ(tr.phases[0].t_start, 0.0);
    EXPECT_EQ(tr.phases[0].t_end, 10.0);
    for (const auto& s : tr.samples) EXPECT_EQ(s.z.vec(), z0.vec());
}

TEST(Simulate, CaseAAlternatesWithGrowingSticks)
{
    const Params p = preset_case_a();
    const Trajectory tr = simulate({0.0, 1.0, 0.0}, p, opts(40.0));
    ASSERT_GE(tr.phases.size(), 6u);
    std::vector<double> sticks;
    for (std::size_t i = 0; i + 1 < tr.phases.size(); ++i) {
        EXPECT_NE(tr.phases[i].kind, tr.phases[i + 1].kind);
        EXPECT_EQ(tr.phases[i].t_end, tr.phases[i + 1].t_start);
        if (tr.phases[i].kind == PhaseKind::stick && i > 0) sticks.push_back(tr.phases[i].duration());
    }
    for (std::size_t i = 1; i < sticks.size(); ++i) EXPECT_GE(sticks[i], sticks[i - 1]);
    EXPECT_LT(std::abs(tr.back().z.s), 0.05);
    EXPECT_LE(std::abs(tr.back().z.e_i), p.ei_band() + 1e-9);
}

TEST(Simulate, StickEntrySpeedShrinks)
{
    // |sigma| at consecutive stick entries decreases.
    const Params p = preset_case_a();
    const Trajectory tr = simulate({0.0, 1.0, 0.0}, p, opts(40.0));
    std::vector<double> s_abs;
    for (const auto& e : tr.events)
        if (e.kind == EventKind::stick_entry) s_abs.push_back(std::abs(e.x.sigma));
    ASSERT_GE(s_abs.size(), 3u);
    for (std::size_t i = 1; i < s_abs.size(); ++i) EXPECT_LT(s_abs[i], s_abs[i - 1]);
}

TEST(Simulate, CaseBNeverRecrossesAfterStick)
{
    const Params p = preset_case_b();
    const Trajectory tr = simulate({0.0, 1.0, 0.0}, p, opts(60.0));
    bool seen_stick = false;
    int slips_after = 0;
    for (const auto& ph : tr.phases) {
        if (ph.kind == PhaseKind::stick) seen_stick = true;
        else if (seen_stick) ++slips_after;
    }
    EXPECT_TRUE(seen_stick);
    EXPECT_LE(slips_after, 1);
    for (const auto& e : tr.events) {
        if (e.kind != EventKind::v_crossing) continue;
        bool later_stick = false;
        for (const auto& ph : tr.phases) later_stick = later_stick || (ph.kind == PhaseKind::stick && ph.t_end <= e.t);
        EXPECT_FALSE(later_stick) << "reversal after a stick at t = " << e.t;
    }
}

TEST(Simulate, StickLawAndStrip)
{
    const Params p = preset_case_a();
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int n = 0; n < 10; ++n) {
        const Trajectory tr = simulate({u(rng), u(rng), u(rng)}, p, opts(40.0));
        for (const auto& ph : tr.phases) {
            if (ph.kind != PhaseKind::stick) continue;
            const StateZ z0 = interpolate(tr, ph.t_start);
            for (const auto& s : tr.samples) {
                if (s.t < ph.t_start || s.t > ph.t_end) continue;
                EXPECT_EQ(s.z.v, 0.0);
                EXPECT_EQ(s.z.s, z0.s);
                EXPECT_NEAR(s.z.e_i, z0.e_i + z0.s * (s.t - ph.t_start), 1e-9);
                EXPECT_LE(std::abs(p.k_i() * s.z.e_i + p.k_p() * s.z.s), p.f_c() + 1e-8);
            }
            if (ph.t_end < tr.horizon) {
                const StateZ ze = interpolate(tr, ph.t_end);
                EXPECT_NEAR(std::abs(p.k_i() * ze.e_i + p.k_p() * ze.s), p.f_c(), 1e-8);
            }
        }
    }
}

TEST(Simulate, SlipSegmentsKeepSignAndSatisfyInclusion)
{
    const Params p = preset_case_b();
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int n = 0; n < 10; ++n) {
        const Trajectory tr = simulate({u(rng), u(rng), u(rng)}, p, opts(60.0));
        for (const auto& ph : tr.phases) {
            const double sgn = ph.kind == PhaseKind::slip_pos ? 1.0 : (ph.kind == PhaseKind::slip_neg ? -1.0 : 0.0);
            for (std::size_t i = 1; i + 1 < tr.samples.size(); ++i) {
                const auto& s = tr.samples[i];
                if (!(s.t > ph.t_start && s.t < ph.t_end)) continue;
                if (sgn != 0.0) EXPECT_GE(sgn * s.z.v, -1e-10);
                // derivative on the smooth interior against F(x)
                const auto& a = tr.samples[i - 1];
                const auto& b = tr.samples[i + 1];
                if (a.t <= ph.t_start || b.t >= ph.t_end || a.mode != s.mode || b.mode != s.mode) continue;
                const double vdot = (b.z.v - a.z.v) / (b.t - a.t);
                const double g = (pid_accel(s.z, p) - vdot) / p.f_c();
                EXPECT_TRUE(sgn_set(s.z.v).contains(g, 1e-3)) << s.t;
            }
        }
    }
}

TEST(Simulate, EventToleranceRobust)
{
    const Params p = preset_case_a();
    SimOptions loose = opts(40.0), tight = opts(40.0);
    tight.event_tol = 1e-12;
    const auto a = simulate({0.0, 1.0, 0.0}, p, loose);
    const auto b = simulate({0.0, 1.0, 0.0}, p, tight);
    const auto grid = uniform_grid(0.0, 40.0, 1e-2);
    EXPECT_LE(trajectory_diff(a, b, grid), 1e-8);
}

TEST(Simulate, DeterministicAndOverflow)
{
    const Params p = preset_case_a();
    const auto a = simulate({1.0, -2.0, 0.5}, p, opts(30.0));
    const auto b = simulate({1.0, -2.0, 0.5}, p, opts(30.0));
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].z.vec(), b.samples[i].z.vec());

    SimOptions o = opts(40.0);
    o.max_events = 2;
    EXPECT_THROW(simulate({0.0, 1.0, 0.0}, p, o), EventOverflow);
}

TEST(Simulate, LongHorizonConverges)
{
    // Convergence holds for horizons matched to the slow stick ramps.
    for (const auto& [p, horizon] : {std::pair{preset_case_a(), 2000.0}, std::pair{preset_case_b(), 12000.0}}) {
        std::mt19937_64 rng(1234);
        std::uniform_real_distribution<double> u(-5, 5);
        for (int n = 0; n < 20; ++n) {
            const StateZ z0{u(rng), u(rng), u(rng)};
            const auto tr = simulate(z0, p, opts(horizon, 1.0));
            EXPECT_LE(dist_to_attractor_z(tr.back().z, p), 1e-3) << n;
        }
    }
}

TEST(Regularized, StaysNearInteriorEquilibrium)
{
    const Params p = preset_case_a();
    const StateZ z0{0.1, 0.0, 0.0};
    const auto tr = simulate_regularized(z0, p, 1e-4, 1e-5, 5.0);
    for (const auto& s : tr.samples) EXPECT_LE((s.z.vec() - z0.vec()).norm(), 1e-3);
}

TEST(Regularized, SingleSlipArcMatchesClosedForm)
{
    const Params p = validate_params(3.0, 6.4, 4.0, 20.0);
    const auto tr = simulate_regularized({0.0, 0.0, 1.0}, p, 1e-4, 1e-5, 0.04);
    const AffineFlow flow(Mode::positive, p);
    const StateX x0 = to_x({0.0, 0.0, 1.0}, p);
    for (const auto& s : tr.samples) {
        if (s.z.v <= 1e-4) break;
        const StateZ exact = to_z(flow.at(x0, s.t), p);
        EXPECT_LE((s.z.vec() - exact.vec()).norm(), 1e-6) << s.t;
    }
}

TEST(Regularized, ConvergesToExactAndPhasesAgree)
{
    const Params p = preset_case_a();
    const auto exact = simulate({0.0, 1.0, 0.0}, p, opts(40.0, 1e-3));
    const auto grid = uniform_grid(0.0, 40.0, 1e-3);
    const auto r3 = simulate_regularized({0.0, 1.0, 0.0}, p, RegularizedOptions{40.0, 1e-3, 1e-4, 1e-3});
    const auto r4 = simulate_regularized({0.0, 1.0, 0.0}, p, RegularizedOptions{40.0, 1e-4, 1e-5, 1e-3});
    const double d3 = trajectory_diff(exact, r3, grid);
    const double d4 = trajectory_diff(exact, r4, grid);
    EXPECT_LT(d4, d3);
    EXPECT_LE(d4, 5e-3);
    ASSERT_EQ(r4.phases.size(), exact.phases.size());
}

TEST(Perturbed, ZeroRhoIsRegularized)
{
    const Params p = preset_case_a();
    const RegularizedOptions o{5.0, 1e-4, 1e-5, 1e-2};
    const auto a = simulate_perturbed({0.0, 1.0, 0.0}, p, 0.0, StribeckSelection{1.0, 0.1}, o);
    const auto b = simulate_regularized({0.0, 1.0, 0.0}, p, o);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].z.vec(), b.samples[i].z.vec());
}

TEST(Perturbed, SelectionGraphChecks)
{
    EXPECT_TRUE((StribeckSelection{1.25, 0.1}.graph_inside(1.0, 0.3)));
    EXPECT_TRUE((StribeckSelection{1.1, 0.1}.graph_inside(1.0, 0.1)));
    EXPECT_FALSE((StribeckSelection{1.5, 0.1}.graph_inside(1.0, 0.3)));
    EXPECT_FALSE((StribeckSelection{1.01, 0.1}.graph_inside(1.0, 0.0)));
    EXPECT_THROW(simulate_perturbed({0, 1, 0}, preset_case_a(), 0.1, StribeckSelection{1.3, 0.1}, {}), SelectionOutOfGraph);
}

TEST(Perturbed, HuntingPersists)
{
    const Params p = preset_case_a();
    const StribeckSelection sel{1.25, 0.1};
    auto count = [&](double h) {
        return simulate_perturbed({0.0, 1.0, 0.0}, p, 0.3, sel, RegularizedOptions{h, 1e-4, 2e-5, 1e-2}).phases.size();
    };
    EXPECT_GT(count(60.0), count(30.0));
}

TEST(Phases, DetectMatchesEventPhases)
{
    const Params p = preset_case_a();
    const auto tr = simulate({0.0, 1.0, 0.0}, p, opts(40.0));
    EXPECT_EQ(detect_phases(tr, 1e-12), tr.phases);
    const auto eq = simulate({0.0, 0.0, 0.0}, p, opts(5.0));
    ASSERT_EQ(detect_phases(eq, 1e-12).size(), 1u);
}

TEST(Interpolate, DomainAndIdentity)
{
    const Params p = preset_case_a();
    const auto tr = simulate({0.0, 1.0, 0.0}, p, opts(5.0));
    EXPECT_THROW(interpolate(tr, 6.0), DomainMismatch);
    EXPECT_THROW(interpolate(tr, -1.0), DomainMismatch);
    const auto grid = uniform_grid(0.0, 5.0, 0.01);
    EXPECT_EQ(trajectory_diff(tr, tr, grid), 0.0);
}

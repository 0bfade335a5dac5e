// Prints the stick/slip phase table and the V staircase for the case (a)
// scenario z0 = (0, 1, 0).

#include <cstdio>

#include "stickslip/stickslip.hpp"

int main()
{
    using namespace stickslip;
    const Params p = preset_case_a();
    SimOptions opts;
    opts.horizon = 40.0;
    const Trajectory tr = simulate({0.0, 1.0, 0.0}, p, opts);

    std::printf("%-6s %10s %10s %10s %12s\n", "phase", "t_start", "t_end", "s(start)", "V(start)");
    for (const auto& ph : tr.phases) {
        const StateZ z = interpolate(tr, ph.t_start);
        std::printf("%-6s %10.4f %10.4f %10.5f %12.6f\n", to_string(ph.kind), ph.t_start, ph.t_end, z.s,
                    lyap_V(to_x(z, p), p));
    }
    const auto rep = audit_decrease(tr, p);
    std::printf("decrease audit: %s (worst margin %.3g over %zu pairs)\n", rep.passed ? "pass" : "FAIL",
                rep.worst_margin, rep.checks);
    std::printf("final dist to attractor: %.3g\n", dist_to_attractor_z(tr.back().z, p));
    return rep.passed ? 0 : 3;
}

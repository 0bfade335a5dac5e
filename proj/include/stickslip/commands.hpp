#pragma once

// Subcommands of the stickslip tool. Each returns a process exit code:
// 0 ok, 1 runtime error, 2 config or assumption error, 3 audit failure.
// Independent cells run on a small thread pool capped by STICKSLIP_THREADS;
// every cell writes its own files and the summary is assembled afterwards.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "stickslip/certificates.hpp"
#include "stickslip/config.hpp"
#include "stickslip/io.hpp"
#include "stickslip/verify.hpp"

namespace stickslip {

enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_config = 2, exit_audit = 3 };

inline unsigned worker_count(std::size_t jobs)
{
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("STICKSLIP_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) n = static_cast<unsigned>(v);
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

/// Runs fn(i) for i in [0, n). The first exception, by index, is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn)
{
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned k = worker_count(n);
    if (k <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < k; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace detail {

inline std::string cell_name(const char* stem, std::size_t i, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03zu.%s", stem, i, ext);
    return buf;
}

inline json base_summary(const char* command, const ExperimentConfig& cfg, const StabilityConstants& k,
                         const VhatGains& g)
{
    return {{"command", command}, {"config", to_json(cfg)}, {"constants", to_json(k)}, {"vhat_gains", to_json(g)}};
}

} // namespace detail

inline int cmd_simulate(const ExperimentConfig& cfg)
{
    const Params p = cfg.params();
    const VhatGains g = pick_vhat_gains(p);
    const StabilityConstants k = stability_constants(p, g);
    const auto ics = cfg.all_initial_conditions();
    const std::filesystem::path dir = cfg.output_dir;

    std::vector<json> cells(ics.size());
    std::vector<char> ok(ics.size(), 1);
    parallel_for(ics.size(), [&](std::size_t i) {
        const Trajectory tr = simulate(ics[i], p, cfg.sim);
        write_trajectory_csv(dir / detail::cell_name("trajectory", i, "csv"), tr, p, g);
        write_phases_csv(dir / detail::cell_name("phases", i, "csv"), tr.phases);
        json audits = json::object();
        auto add = [&](const CertificateReport& r) {
            audits[r.name] = to_json(r);
            if (!r.passed) ok[i] = 0;
        };
        if (cfg.audits.decrease) add(audit_decrease(tr, p));
        if (cfg.audits.stability) add(audit_stability(tr, p, k, g));
        if (cfg.audits.iss) add(audit_iss(tr, p, k.iss, 0.0));
        const auto& last = tr.back();
        cells[i] = {{"index", i},
                    {"z0", to_json(ics[i])},
                    {"z_final", to_json(last.z)},
                    {"t_final", last.t},
                    {"dist_final", dist_to_attractor_z(last.z, p)},
                    {"abs_e_i_final", std::abs(last.z.e_i)},
                    {"e_i_band", p.ei_band()},
                    {"events", tr.events.size()},
                    {"phases", to_json(tr.phases)},
                    {"audits", audits}};
    });

    json summary = detail::base_summary("simulate", cfg, k, g);
    summary["trajectories"] = cells;
    const bool all_ok = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
    summary["audits_passed"] = all_ok;
    write_json(dir / "summary.json", summary);
    return all_ok ? exit_ok : exit_audit;
}

inline int cmd_lyapunov(const ExperimentConfig& cfg)
{
    const Params p = cfg.params();
    const VhatGains g = pick_vhat_gains(p);
    const StabilityConstants k = stability_constants(p, g);
    const auto ics = cfg.all_initial_conditions();
    const std::filesystem::path dir = cfg.output_dir;

    std::vector<json> cells(ics.size());
    std::vector<char> ok(ics.size(), 1);
    parallel_for(ics.size(), [&](std::size_t i) {
        const Trajectory tr = simulate(ics[i], p, cfg.sim);
        write_lyapunov_csv(dir / detail::cell_name("lyapunov", i, "csv"), tr, p, g);
        const auto dec = audit_decrease(tr, p);
        json audits = {{"decrease", to_json(dec)}};
        ok[i] = dec.passed;
        if (cfg.audits.stability) {
            const auto st = audit_stability(tr, p, k, g);
            audits["stability"] = to_json(st);
            ok[i] = ok[i] && st.passed;
        }
        cells[i] = {{"index", i},
                    {"z0", to_json(ics[i])},
                    {"V0", lyap_V(tr.front().x, p)},
                    {"V_final", lyap_V(tr.back().x, p)},
                    {"audits", audits}};
    });

    json summary = detail::base_summary("lyapunov", cfg, k, g);
    summary["trajectories"] = cells;
    const bool all_ok = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
    summary["audits_passed"] = all_ok;
    write_json(dir / "lyapunov.json", summary);
    return all_ok ? exit_ok : exit_audit;
}

/// One (rho, IC) cell of the sweep.
struct SweepCell {
    double rho_v = 0.0;
    std::size_t ic = 0;
    double tail_sup = 0.0;
    double envelope_tail = 0.0; // kappa2 + kappa3 rho
    bool envelope_ok = false;   // the |z| and |z|_A envelopes held at every sample
    double worst_margin = 0.0;
    std::size_t phase_count = 0;
};

inline std::vector<SweepCell> run_iss_sweep(const ExperimentConfig& cfg, const Params& p, const IssEnvelope& env,
                                            const std::filesystem::path* dir = nullptr)
{
    if (!cfg.perturbation) throw ConfigError("iss-sweep needs a perturbation block");
    const auto& pc = *cfg.perturbation;
    if (std::find(pc.rho_list.begin(), pc.rho_list.end(), 0.0) == pc.rho_list.end())
        throw ConfigError("perturbation.rho_list must include 0");
    const auto ics = cfg.all_initial_conditions();
    const VhatGains g = pick_vhat_gains(p);
    // fail early, before any work, if a selection leaves the graph
    for (double rho : pc.rho_list)
        if (!pc.selection(rho, p.f_c()).graph_inside(p.f_c(), rho))
            throw SelectionOutOfGraph("Stribeck selection leaves the graph of f_c SGN_rho for rho = " + fmt17(rho));

    std::vector<SweepCell> cells(pc.rho_list.size() * ics.size());
    parallel_for(cells.size(), [&](std::size_t n) {
        const std::size_t r = n / ics.size();
        const std::size_t i = n % ics.size();
        const double rho = pc.rho_list[r];
        const Trajectory tr =
            simulate_perturbed(ics[i], p, rho, pc.selection(rho, p.f_c()), pc.options(cfg.sim.horizon));
        const auto rep = audit_iss(tr, p, env, rho);
        cells[n] = {rho, i, tail_sup_dist(tr, p), env.kappa2 + env.kappa3 * rho, rep.passed, rep.worst_margin,
                    tr.phases.size()};
        if (dir) {
            char name[64];
            std::snprintf(name, sizeof name, "perturbed_r%02zu_%03zu.csv", r, i);
            write_trajectory_csv(*dir / name, tr, p, g);
        }
    });
    return cells;
}

inline int cmd_iss_sweep(const ExperimentConfig& cfg)
{
    const Params p = cfg.params();
    const VhatGains g = pick_vhat_gains(p);
    const StabilityConstants k = stability_constants(p, g);
    const std::filesystem::path dir = cfg.output_dir;
    const auto cells = run_iss_sweep(cfg, p, k.iss, &dir);

    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "sweep.csv", std::ios::binary);
        if (!out) throw Error("cannot write sweep.csv");
        out << "rho_v,ic,tail_sup,envelope_tail,envelope_ok,worst_margin,phase_count\n";
        for (const auto& c : cells)
            out << fmt17(c.rho_v) << ',' << c.ic << ',' << fmt17(c.tail_sup) << ',' << fmt17(c.envelope_tail) << ','
                << (c.envelope_ok ? 1 : 0) << ',' << fmt17(c.worst_margin) << ',' << c.phase_count << '\n';
    }
    bool all_ok = true;
    json rows = json::array();
    for (double rho : cfg.perturbation->rho_list) {
        double tail = 0.0;
        bool ok = true;
        for (const auto& c : cells) {
            if (c.rho_v != rho) continue;
            tail = std::max(tail, c.tail_sup);
            ok = ok && c.envelope_ok;
        }
        all_ok = all_ok && ok;
        rows.push_back({{"rho_v", rho}, {"max_tail_sup", tail}, {"envelope_tail", k.iss.kappa2 + k.iss.kappa3 * rho},
                        {"envelope_ok", ok}});
    }
    json summary = detail::base_summary("iss-sweep", cfg, k, g);
    summary["sweep"] = rows;
    summary["audits_passed"] = all_ok;
    write_json(dir / "iss_sweep.json", summary);
    return all_ok ? exit_ok : exit_audit;
}

inline int cmd_verify(const ExperimentConfig& cfg, std::ostream& os = std::cout)
{
    (void)cfg.params();
    const auto results = run_verify_battery(cfg);
    bool all = true;
    char line[256];
    std::snprintf(line, sizeof line, "%-20s %-7s %-5s %8s  %s\n", "check", "preset", "ok", "seconds", "detail");
    os << line;
    for (const auto& r : results) {
        std::snprintf(line, sizeof line, "%-20s %-7s %-5s %8.2f  ", r.name.c_str(), r.preset.c_str(),
                      r.passed ? "PASS" : "FAIL", r.seconds);
        os << line << r.detail << '\n';
        all = all && r.passed;
    }
    os << (all ? "all checks passed" : "some checks FAILED") << '\n';
    return all ? exit_ok : exit_audit;
}

} // namespace stickslip

#pragma once

// CSV and JSON artifacts. Numbers are written with 17 significant digits so
// files round-trip doubles exactly and are byte-identical across runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "stickslip/certificates.hpp"
#include "stickslip/simulator.hpp"

namespace stickslip {

using json = nlohmann::json;

inline std::string fmt17(double a)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", a);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

} // namespace detail

inline const char* trajectory_csv_header() { return "t,e_i,s,v,sigma,phi,mode,phase,V,Vhat,dist_A"; }

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr, const Params& p,
                                 const VhatGains& g)
{
    auto out = detail::open_out(path);
    out << trajectory_csv_header() << '\n';
    for (const auto& s : tr.samples) {
        out << fmt17(s.t) << ',' << fmt17(s.z.e_i) << ',' << fmt17(s.z.s) << ',' << fmt17(s.z.v) << ','
            << fmt17(s.x.sigma) << ',' << fmt17(s.x.phi) << ',' << to_int(s.mode) << ','
            << to_string(phase_of(s.mode)) << ',' << fmt17(lyap_V(s.x, p)) << ',' << fmt17(lyap_Vhat(s.x, p, g))
            << ',' << fmt17(dist_to_attractor_z(s.z, p)) << '\n';
    }
}

/// V, Vhat, the region flag (R or Rhat) and dist_A per sample.
inline void write_lyapunov_csv(const std::filesystem::path& path, const Trajectory& tr, const Params& p,
                               const VhatGains& g)
{
    auto out = detail::open_out(path);
    out << "t,V,Vhat,region,dist_A\n";
    for (const auto& s : tr.samples) {
        out << fmt17(s.t) << ',' << fmt17(lyap_V(s.x, p)) << ',' << fmt17(lyap_Vhat(s.x, p, g)) << ','
            << (region_R(s.x, p) ? "R" : "Rhat") << ',' << fmt17(dist_to_attractor_x(s.x, p)) << '\n';
    }
}

inline void write_phases_csv(const std::filesystem::path& path, const std::vector<Phase>& phases)
{
    auto out = detail::open_out(path);
    out << "index,kind,t_start,t_end,duration\n";
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& ph = phases[i];
        out << i << ',' << to_string(ph.kind) << ',' << fmt17(ph.t_start) << ',' << fmt17(ph.t_end) << ','
            << fmt17(ph.duration()) << '\n';
    }
}

inline void write_json(const std::filesystem::path& path, const json& j)
{
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

inline json to_json(const StateZ& z) { return json::array({z.e_i, z.s, z.v}); }

inline json to_json(const std::vector<Phase>& phases)
{
    json a = json::array();
    for (const auto& ph : phases) a.push_back({{"kind", to_string(ph.kind)}, {"t_start", ph.t_start}, {"t_end", ph.t_end}});
    return a;
}

inline json to_json(const VhatGains& g) { return {{"k1", g.k1}, {"k2", g.k2}, {"k3", g.k3}, {"k4", g.k4}}; }

inline json to_json(const IssEnvelope& e)
{
    return {{"c", e.c},
            {"lambda", e.lambda},
            {"kappa1", e.kappa1},
            {"kappa2", e.kappa2},
            {"kappa3", e.kappa3},
            {"transient_gain", e.transient_gain},
            {"forced_gain", e.forced_gain}};
}

inline json to_json(const StabilityConstants& k)
{
    json j = {{"c1", k.c1},
              {"c2", k.c2},
              {"chat1", k.chat1},
              {"chat2", k.chat2},
              {"c_decrease", k.c_decrease},
              {"stab_gain", k.stab_gain},
              {"iss", to_json(k.iss)}};
    if (k.delta_l) j["delta_l"] = *k.delta_l;
    return j;
}

inline json to_json(const CertificateReport& r)
{
    json jumps = json::array();
    for (const auto& jmp : r.jumps) jumps.push_back({{"t", jmp.t}, {"dV", jmp.dv}});
    json j = {{"name", r.name},
              {"passed", r.passed},
              {"worst_margin", std::isfinite(r.worst_margin) ? json(r.worst_margin) : json(nullptr)},
              {"t1", r.t1},
              {"t2", r.t2},
              {"checks", r.checks}};
    if (!r.jumps.empty()) j["v_jumps"] = jumps;
    if (!r.detail.empty()) j["detail"] = r.detail;
    return j;
}

} // namespace stickslip

#pragma once

// Experiment configuration and its JSON form.
//
// {
//   "preset": "case_a",                         // or "params": {k_p, k_v, k_i, f_c}
//   "initial_conditions": [[e_i, s, v], ...],
//   "random_ics": {"count": 5, "range": 5.0},   // uniform in [-range, range]^3
//   "horizon": 40.0,
//   "sim": {"event_tol": 1e-10, "dense_output_dt": 0.01, "max_events": 100000},
//   "perturbation": {"rho_list": [0, 0.1], "f_s": null, "v_s": 0.1,
//                    "eps": 1e-4, "step": 1e-5, "dense_output_dt": 0.05},
//   "audits": {"decrease": true, "stability": true, "iss": false},
//   "output_dir": "out",
//   "seed": 0
// }
//
// Unknown keys are rejected. Without "f_s" each rho uses f_s = f_c (1 + rho).

#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "stickslip/model.hpp"
#include "stickslip/simulator.hpp"

namespace stickslip {

using json = nlohmann::json;

struct PerturbationConfig {
    std::vector<double> rho_list{0.0, 0.05, 0.1, 0.2, 0.3};
    std::optional<double> f_s;
    double v_s = 0.1;
    double eps = 1e-4;
    double step = 1e-5;
    double dense_output_dt = 0.05;

    StribeckSelection selection(double rho_v, double f_c) const
    {
        return {f_s.value_or(f_c * (1.0 + rho_v)), v_s};
    }
    RegularizedOptions options(double horizon) const { return {horizon, eps, step, dense_output_dt}; }
};

struct AuditFlags {
    bool decrease = true;
    bool stability = true;
    bool iss = false;
};

struct ExperimentConfig {
    std::string preset; // empty when params are explicit
    double k_p = 0.0;
    double k_v = 0.0;
    double k_i = 0.0;
    double f_c = 0.0;
    std::vector<StateZ> initial_conditions;
    std::size_t random_count = 0;
    double random_range = 5.0;
    SimOptions sim;
    std::optional<PerturbationConfig> perturbation;
    AuditFlags audits;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    Params params() const { return validate_params(k_p, k_v, k_i, f_c); }

    /// Explicit ICs followed by random_count draws from mt19937_64(seed).
    std::vector<StateZ> all_initial_conditions() const
    {
        std::vector<StateZ> out = initial_conditions;
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-random_range, random_range);
        for (std::size_t i = 0; i < random_count; ++i) {
            StateZ z;
            z.e_i = u(rng);
            z.s = u(rng);
            z.v = u(rng);
            out.push_back(z);
        }
        return out;
    }
};

inline void apply_preset(ExperimentConfig& c, const std::string& name)
{
    if (name == "case_a") {
        c.k_p = 3.0; c.k_v = 6.4; c.k_i = 4.0; c.f_c = 1.0;
    } else if (name == "case_b") {
        c.k_p = 0.66; c.k_v = 1.5; c.k_i = 0.08; c.f_c = 1.0;
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected case_a or case_b)");
    }
    c.preset = name;
}

/// Default experiment for a preset: the single IC z0 = (0, 1, 0).
inline ExperimentConfig preset_config(const std::string& name)
{
    ExperimentConfig c;
    apply_preset(c, name);
    c.initial_conditions = {{0.0, 1.0, 0.0}};
    c.sim.horizon = name == "case_b" ? 300.0 : 40.0;
    return c;
}

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read(const json& j, const char* key, T& out)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

} // namespace detail

/// Parses a config; validates the parameters so a bad config fails here.
inline ExperimentConfig parse_config(const json& j)
{
    using detail::read;
    detail::check_keys(j, {"preset", "params", "initial_conditions", "random_ics", "horizon", "sim", "perturbation",
                           "audits", "output_dir", "seed"},
                       "config");
    ExperimentConfig c;
    if (j.contains("preset")) apply_preset(c, j.at("preset").get<std::string>());
    if (j.contains("params")) {
        const auto& pj = j.at("params");
        detail::check_keys(pj, {"k_p", "k_v", "k_i", "f_c"}, "params");
        read(pj, "k_p", c.k_p);
        read(pj, "k_v", c.k_v);
        read(pj, "k_i", c.k_i);
        read(pj, "f_c", c.f_c);
        // the preset label survives only if the explicit values agree with it
        if (!c.preset.empty()) {
            ExperimentConfig ref;
            apply_preset(ref, c.preset);
            if (ref.k_p != c.k_p || ref.k_v != c.k_v || ref.k_i != c.k_i || ref.f_c != c.f_c) c.preset.clear();
        }
    }
    if (!j.contains("preset") && !j.contains("params")) throw ConfigError("config needs 'preset' or 'params'");

    if (j.contains("initial_conditions")) {
        for (const auto& ic : j.at("initial_conditions")) {
            if (!ic.is_array() || ic.size() != 3) throw ConfigError("initial condition must be [e_i, s, v]");
            StateZ z{ic[0].get<double>(), ic[1].get<double>(), ic[2].get<double>()};
            if (!z.finite()) throw ConfigError("initial condition must be finite");
            c.initial_conditions.push_back(z);
        }
    }
    if (j.contains("random_ics")) {
        const auto& rj = j.at("random_ics");
        detail::check_keys(rj, {"count", "range"}, "random_ics");
        read(rj, "count", c.random_count);
        read(rj, "range", c.random_range);
        if (!(c.random_range > 0.0)) throw ConfigError("random_ics.range must be positive");
    }
    read(j, "horizon", c.sim.horizon);
    if (j.contains("sim")) {
        const auto& sj = j.at("sim");
        detail::check_keys(sj, {"event_tol", "dense_output_dt", "max_events"}, "sim");
        read(sj, "event_tol", c.sim.event_tol);
        read(sj, "dense_output_dt", c.sim.dense_output_dt);
        read(sj, "max_events", c.sim.max_events);
    }
    if (j.contains("perturbation")) {
        const auto& pj = j.at("perturbation");
        detail::check_keys(pj, {"rho_list", "f_s", "v_s", "eps", "step", "dense_output_dt"}, "perturbation");
        PerturbationConfig pc;
        read(pj, "rho_list", pc.rho_list);
        if (pj.contains("f_s") && !pj.at("f_s").is_null()) pc.f_s = pj.at("f_s").get<double>();
        read(pj, "v_s", pc.v_s);
        read(pj, "eps", pc.eps);
        read(pj, "step", pc.step);
        read(pj, "dense_output_dt", pc.dense_output_dt);
        c.perturbation = pc;
    }
    if (j.contains("audits")) {
        const auto& aj = j.at("audits");
        detail::check_keys(aj, {"decrease", "stability", "iss"}, "audits");
        read(aj, "decrease", c.audits.decrease);
        read(aj, "stability", c.audits.stability);
        read(aj, "iss", c.audits.iss);
    }
    read(j, "output_dir", c.output_dir);
    read(j, "seed", c.seed);

    if (c.initial_conditions.empty() && c.random_count == 0)
        throw ConfigError("config needs initial_conditions or random_ics.count > 0");
    if (!(c.sim.horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (!(c.sim.event_tol > 0.0) || !(c.sim.dense_output_dt > 0.0)) throw ConfigError("sim tolerances must be positive");
    (void)c.params();
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

inline json to_json(const ExperimentConfig& c)
{
    json j;
    if (!c.preset.empty()) j["preset"] = c.preset;
    j["params"] = {{"k_p", c.k_p}, {"k_v", c.k_v}, {"k_i", c.k_i}, {"f_c", c.f_c}};
    json ics = json::array();
    for (const auto& z : c.initial_conditions) ics.push_back({z.e_i, z.s, z.v});
    j["initial_conditions"] = ics;
    j["random_ics"] = {{"count", c.random_count}, {"range", c.random_range}};
    j["horizon"] = c.sim.horizon;
    j["sim"] = {{"event_tol", c.sim.event_tol}, {"dense_output_dt", c.sim.dense_output_dt},
                {"max_events", c.sim.max_events}};
    if (c.perturbation) {
        const auto& pc = *c.perturbation;
        j["perturbation"] = {{"rho_list", pc.rho_list},
                             {"f_s", pc.f_s ? json(*pc.f_s) : json(nullptr)},
                             {"v_s", pc.v_s},
                             {"eps", pc.eps},
                             {"step", pc.step},
                             {"dense_output_dt", pc.dense_output_dt}};
    }
    j["audits"] = {{"decrease", c.audits.decrease}, {"stability", c.audits.stability}, {"iss", c.audits.iss}};
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    return j;
}

} // namespace stickslip

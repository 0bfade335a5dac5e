// stickslip: simulate, audit and sweep the PID loop under Coulomb friction.
//
//   stickslip simulate  --preset case_a --out out/a
//   stickslip lyapunov  --config exp.json
//   stickslip iss-sweep --preset case_a --rho 0 0.1 0.3
//   stickslip verify

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stickslip/stickslip.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::string preset;
    std::string out;
    std::optional<double> horizon;
    std::optional<std::uint64_t> seed;
    std::vector<double> rho;
};

void add_common(CLI::App* sub, CommonFlags& f)
{
    sub->add_option("--config", f.config, "experiment JSON")->check(CLI::ExistingFile);
    sub->add_option("--preset", f.preset, "parameter preset")->check(CLI::IsMember({"case_a", "case_b"}));
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--horizon", f.horizon, "simulation horizon [s]");
    sub->add_option("--seed", f.seed, "seed for random initial conditions");
}

stickslip::ExperimentConfig build_config(const CommonFlags& f, const std::string& command)
{
    using namespace stickslip;
    ExperimentConfig cfg;
    if (!f.config.empty()) {
        cfg = load_config(f.config);
        if (!f.preset.empty()) apply_preset(cfg, f.preset);
    } else if (!f.preset.empty()) {
        cfg = preset_config(f.preset);
    } else if (command == "verify") {
        cfg = preset_config("case_a");
    } else {
        throw ConfigError("either --config or --preset is required");
    }
    if (f.horizon) cfg.sim.horizon = *f.horizon;
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.output_dir = f.out;
    if (command == "iss-sweep") {
        if (!cfg.perturbation && f.config.empty()) cfg.perturbation = PerturbationConfig{};
        if (!f.rho.empty()) {
            if (!cfg.perturbation) throw ConfigError("iss-sweep needs a perturbation block");
            cfg.perturbation->rho_list = f.rho;
        }
    }
    if (!(cfg.sim.horizon > 0.0)) throw ConfigError("horizon must be positive");
    (void)cfg.params();
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    using namespace stickslip;
    CLI::App app{"Event-driven simulation and Lyapunov/ISS audits for a PID loop with Coulomb friction"};
    app.require_subcommand(1);
    CommonFlags flags;
    auto* sim = app.add_subcommand("simulate", "trajectories, phases and a run summary");
    auto* lyap = app.add_subcommand("lyapunov", "V, Vhat and region series with the decrease audit");
    auto* sweep = app.add_subcommand("iss-sweep", "perturbed runs over a list of rho_v");
    auto* ver = app.add_subcommand("verify", "invariant battery on both presets");
    for (auto* s : {sim, lyap, sweep, ver}) add_common(s, flags);
    sweep->add_option("--rho", flags.rho, "rho_v values (must include 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        const std::string command = app.get_subcommands().front()->get_name();
        const ExperimentConfig cfg = build_config(flags, command);
        int code = exit_ok;
        if (command == "simulate") code = cmd_simulate(cfg);
        else if (command == "lyapunov") code = cmd_lyapunov(cfg);
        else if (command == "iss-sweep") code = cmd_iss_sweep(cfg);
        else code = cmd_verify(cfg);
        if (code == exit_audit) std::cerr << "audit failure; see the summary JSON\n";
        return code;
    } catch (const AuditFailed& e) {
        std::cerr << "audit failed: " << e.what() << '\n';
        return exit_audit;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const AssumptionViolated& e) {
        std::cerr << "assumption violated: " << e.what() << '\n';
        return exit_config;
    } catch (const NonHurwitz& e) {
        std::cerr << "not Hurwitz: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
}

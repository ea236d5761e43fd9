#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "dds/config.hpp"
#include "dds/experiment.hpp"
#include "dds/scenarios.hpp"

namespace {

dds::ExperimentConfig load_config(const std::string& scenario_arg,
                                  const std::string& config_path) {
    dds::IniMap ini;
    if (!config_path.empty()) ini = dds::parse_ini(dds::io_detail::read_file(config_path));

    std::string scenario = scenario_arg;
    if (scenario.empty()) {
        auto run = ini.find("run");
        if (run != ini.end()) {
            auto key = run->second.find("scenario");
            if (key != run->second.end()) scenario = key->second;
        }
    }
    if (scenario.empty())
        throw dds::ValidationError(
            "no scenario given: pass one on the command line or set [run] scenario in the config");

    dds::ExperimentConfig cfg = dds::default_config(scenario);
    dds::apply_ini(cfg, ini);
    if (!scenario_arg.empty()) cfg.scenario = scenario_arg; // positional wins
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic diffusion swarm simulator: run a swarm + reference pair, "
                 "validate configs, or compare run outputs"};
    app.require_subcommand(1);

    std::string scenario, config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false, snapshots_set = false;
    int snapshot_every = 0;

    CLI::App* run = app.add_subcommand("run", "run a scenario with both engines");
    run->add_option("scenario", scenario, "scenario name (see list-scenarios)");
    run->add_option("--config", config_path, "INI file overriding scenario defaults")
        ->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "override the RNG seed")->each([&](const std::string&) {
        seed_set = true;
    });
    run->add_option("--out-dir", out_dir, "output directory (default runs/<scenario>-seed<N>)");
    run->add_option("--snapshots", snapshot_every, "record every N engine steps")
        ->check(CLI::PositiveNumber)
        ->each([&](const std::string&) { snapshots_set = true; });

    CLI::App* validate_cmd = app.add_subcommand("validate", "check a config without running");
    validate_cmd->add_option("scenario", scenario, "scenario name");
    validate_cmd->add_option("--config", config_path, "INI file to check")
        ->check(CLI::ExistingFile);

    CLI::App* compare = app.add_subcommand("compare", "byte-compare two run directories");
    std::string dir_a, dir_b;
    compare->add_option("dir_a", dir_a, "first run directory")->required();
    compare->add_option("dir_b", dir_b, "second run directory")->required();

    CLI::App* list = app.add_subcommand("list-scenarios", "show available scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            std::printf("gaussian_dispersion      free packet spreading in a hard-wall box\n"
                        "ground_vs_modulus        stationary eigenmode vs its tent-shaped modulus\n"
                        "two_packet_interference  counter-moving packets crossing mid-box\n"
                        "double_well              packet sloshing across a finite central barrier\n");
            return 0;
        }
        if (validate_cmd->parsed()) {
            const dds::ExperimentConfig cfg = load_config(scenario, config_path);
            const double a = dds::validate(cfg);
            std::printf("ok: scenario=%s cells=%d dt=%g explosion_fraction=%.6g\n",
                        cfg.scenario.c_str(), cfg.n_cells, cfg.dds_dt, a);
            return 0;
        }
        if (compare->parsed()) {
            const dds::CompareResult r = dds::compare_runs(dir_a, dir_b);
            std::printf("%s: %s\n", r.identical ? "identical" : "different", r.detail.c_str());
            return r.identical ? 0 : 1;
        }
        // run
        dds::ExperimentConfig cfg = load_config(scenario, config_path);
        if (seed_set) cfg.seed = seed;
        if (snapshots_set) cfg.snapshot_every = snapshot_every;
        const dds::ExperimentResult result = dds::run_experiment(cfg);
        if (out_dir.empty())
            out_dir = "runs/" + cfg.scenario + "-seed" + std::to_string(cfg.seed);
        dds::write_run(result, out_dir);
        std::printf("wrote %s (%zu snapshots)\n", out_dir.c_str(), result.times.size());
        std::printf("final: M_dds=%.6g M_fd=%.6g L1_cross=%.6g weight_drift=%.3g "
                    "momentum_residual=%.3g fd_norm_drift=%.3g\n",
                    result.m_dds.back(), result.m_fd.back(), result.l1_cross.back(),
                    result.max_weight_drift, result.max_momentum_residual, result.fd_norm_drift);
        return 0;
    } catch (const dds::ValidationError& e) {
        std::fprintf(stderr, "invalid configuration: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

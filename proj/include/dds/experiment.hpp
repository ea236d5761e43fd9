#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dds/bridge.hpp"
#include "dds/config.hpp"
#include "dds/dds_engine.hpp"
#include "dds/fd_solver.hpp"
#include "dds/metrics.hpp"
#include "dds/scenarios.hpp"
#include "dds/smoothing.hpp"

namespace dds {

struct ExperimentResult {
    ExperimentConfig config;
    Grid1D grid;
    double explosion_fraction = 0.0; // resolved value actually used

    std::vector<double> times;
    std::vector<std::vector<double>> dds_mass;  // [snapshot][cell], sums to ~1
    std::vector<std::vector<double>> fd_mass;   // normalized reference masses
    std::vector<std::vector<double>> v_mean;    // swarm mean speed per cell
    std::vector<std::vector<double>> thin_frac; // thin-layer arrival fraction

    std::vector<double> m_dds;     // L1 deviation from the t=0 swarm masses
    std::vector<double> m_fd;      // L1 deviation from the t=0 reference masses
    std::vector<double> l1_cross;  // L1 between the two engines per snapshot

    double max_weight_drift = 0.0;      // max |W(t)/W(0) - 1| over steps
    double max_momentum_residual = 0.0; // max |ledger residual| over steps
    double fd_norm_drift = 0.0;         // |norm2(end)/norm2(0) - 1|
};

/// Run both engines from the scenario's initial wavefunction and record
/// aligned snapshots. The reference scheme substeps so that each swarm step
/// lands exactly on the same time.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);

    ExperimentResult out;
    out.config = cfg;
    out.grid = config_grid(cfg);
    const PhysicalConstants constants = config_constants(cfg);
    const PotentialField pot = scenario_potential(cfg);
    const WaveField psi0 = initial_wavefunction(cfg, pot);

    DdsParams params = config_dds_params(cfg);
    out.explosion_fraction = params.explosion_fraction;
    Swarm swarm = bridge::swarm_from_wavefunction(psi0, cfg.total_weight, params, constants);

    fd::FdScheme scheme = config_fd_scheme(cfg);
    const int substeps = std::max(1, static_cast<int>(std::ceil(cfg.dds_dt / scheme.dt - 1e-12)));
    scheme.dt = cfg.dds_dt / substeps;
    WaveField psi = psi0;
    const double norm0 = psi.norm2();

    const long long n_steps =
        std::max<long long>(1, static_cast<long long>(std::ceil(cfg.t_final / cfg.dds_dt - 1e-9)));

    std::vector<double> thin(static_cast<std::size_t>(out.grid.n_cells), 0.0);
    auto record = [&](double t) {
        out.times.push_back(t);
        out.dds_mass.push_back(cell_masses(density(swarm)));
        out.fd_mass.push_back(cell_masses(density_of(psi)));
        out.v_mean.push_back(cell_mean_speeds(swarm));
        out.thin_frac.push_back(thin);
        if (out.times.size() == 1) {
            out.m_dds.push_back(0.0);
            out.m_fd.push_back(0.0);
        } else {
            out.m_dds.push_back(deviation_metric(out.dds_mass.back(), out.dds_mass.front()));
            out.m_fd.push_back(deviation_metric(out.fd_mass.back(), out.fd_mass.front()));
        }
        out.l1_cross.push_back(l1_distance(out.dds_mass.back(), out.fd_mass.back()));
    };
    record(0.0);

    StepReport report;
    for (long long k = 0; k < n_steps; ++k) {
        swarm = dds_step(swarm, pot, &report, static_cast<std::uint64_t>(k));
        thin = report.thin_arrival_fraction;
        out.max_weight_drift = std::max(
            out.max_weight_drift, std::abs(report.weight_after / swarm.total_weight_initial - 1.0));
        out.max_momentum_residual =
            std::max(out.max_momentum_residual, std::abs(report.momentum_residual));
        if (cfg.smoothing_every > 0 && (k + 1) % cfg.smoothing_every == 0)
            swarm = smooth_swarm(swarm, &pot);
        for (int j = 0; j < substeps; ++j) psi = fd::step_explicit(psi, pot, scheme, constants);
        if ((k + 1) % cfg.snapshot_every == 0 || k + 1 == n_steps)
            record(static_cast<double>(k + 1) * cfg.dds_dt);
    }
    out.fd_norm_drift = std::abs(psi.norm2() / norm0 - 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic text output
// ---------------------------------------------------------------------------

namespace io_detail {

inline void append_num(std::string& s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    s += buf;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw SimError("cannot open for writing: " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw SimError("short write: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw SimError("cannot open for reading: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

} // namespace io_detail

/// Long-format state table: one row per (snapshot, cell).
inline std::string states_csv(const ExperimentResult& r) {
    std::string s = "t,cell_index,x_center,rho_dds,rho_fd,v_mean,thin_layer_fraction\n";
    const double dx = r.grid.dx();
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        for (int i = 0; i < r.grid.n_cells; ++i) {
            io_detail::append_num(s, r.times[k]);
            s += ',';
            s += std::to_string(i);
            s += ',';
            io_detail::append_num(s, r.grid.center(i));
            s += ',';
            io_detail::append_num(s, r.dds_mass[k][static_cast<std::size_t>(i)] / dx);
            s += ',';
            io_detail::append_num(s, r.fd_mass[k][static_cast<std::size_t>(i)] / dx);
            s += ',';
            io_detail::append_num(s, r.v_mean[k][static_cast<std::size_t>(i)]);
            s += ',';
            io_detail::append_num(s, r.thin_frac[k][static_cast<std::size_t>(i)]);
            s += '\n';
        }
    }
    return s;
}

inline std::string metrics_csv(const ExperimentResult& r) {
    std::string s = "t,M_dds,M_fd,L1_dds_vs_fd\n";
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        io_detail::append_num(s, r.times[k]);
        s += ',';
        io_detail::append_num(s, r.m_dds[k]);
        s += ',';
        io_detail::append_num(s, r.m_fd[k]);
        s += ',';
        io_detail::append_num(s, r.l1_cross[k]);
        s += '\n';
    }
    return s;
}

/// Write config.ini, states.csv, metrics.csv and a manifest.json with content
/// checksums into `dir` (created if needed). Returns the manifest text.
inline std::string write_run(const ExperimentResult& r, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    const std::string ini = serialize(r.config);
    const std::string states = states_csv(r);
    const std::string metrics = metrics_csv(r);

    nlohmann::json manifest;
    manifest["scenario"] = r.config.scenario;
    manifest["seed"] = r.config.seed;
    manifest["engines"] = {"dds", "fd"};
    manifest["explosion_fraction"] = r.explosion_fraction;
    manifest["snapshots"] = r.times.size();
    manifest["summary"] = {{"final_m_dds", r.m_dds.back()},
                           {"final_m_fd", r.m_fd.back()},
                           {"final_l1_cross", r.l1_cross.back()},
                           {"max_weight_drift", r.max_weight_drift},
                           {"max_momentum_residual", r.max_momentum_residual},
                           {"fd_norm_drift", r.fd_norm_drift}};
    auto entry = [](const std::string& bytes) {
        return nlohmann::json{{"bytes", bytes.size()},
                              {"fnv1a64", io_detail::hex64(io_detail::fnv1a64(bytes))}};
    };
    manifest["files"] = {{"config.ini", entry(ini)},
                         {"states.csv", entry(states)},
                         {"metrics.csv", entry(metrics)}};

    const std::string manifest_text = manifest.dump(2) + "\n";
    io_detail::write_file(fs::path(dir) / "config.ini", ini);
    io_detail::write_file(fs::path(dir) / "states.csv", states);
    io_detail::write_file(fs::path(dir) / "metrics.csv", metrics);
    io_detail::write_file(fs::path(dir) / "manifest.json", manifest_text);
    return manifest_text;
}

struct CompareResult {
    bool identical = false;
    std::string detail;
};

/// Byte-compare the data files of two run directories.
inline CompareResult compare_runs(const std::string& dir_a, const std::string& dir_b) {
    namespace fs = std::filesystem;
    for (const char* name : {"states.csv", "metrics.csv"}) {
        const std::string a = io_detail::read_file(fs::path(dir_a) / name);
        const std::string b = io_detail::read_file(fs::path(dir_b) / name);
        if (a != b) {
            return {false, std::string(name) + " differs (" + std::to_string(a.size()) + " vs " +
                               std::to_string(b.size()) + " bytes, fnv1a64 " +
                               io_detail::hex64(io_detail::fnv1a64(a)) + " vs " +
                               io_detail::hex64(io_detail::fnv1a64(b)) + ")"};
        }
    }
    return {true, "states.csv and metrics.csv are byte-identical"};
}

} // namespace dds

#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "dds/dds_engine.hpp"
#include "dds/errors.hpp"
#include "dds/fd_solver.hpp"
#include "dds/grid.hpp"

namespace dds {

inline constexpr std::array<const char*, 4> kKnownScenarios = {
    "gaussian_dispersion", "ground_vs_modulus", "two_packet_interference", "double_well"};

/// Everything a run needs, flattened. Scenario defaults fill these; an INI
/// file overrides individual keys. explosion_fraction = 0 means "derive from
/// the stream calibration" (a literal 0 is never a valid fraction).
struct ExperimentConfig {
    std::string scenario = "gaussian_dispersion";

    // [grid]
    double x_min = 0.0;
    double x_max = 64.0;
    int n_cells = 64;
    bool periodic = false;

    // [constants]
    double hbar = 1.0;
    double mass = 1.0;

    // [dds]
    double dds_dt = 0.5;
    double max_speed = 2.0;
    double explosion_fraction = 0.0;
    double calibration = 1.0;
    bool integer_mode = false;
    bool waiting_mode = true;
    double total_weight = 1e6; // sample count in integer mode
    std::uint64_t seed = 1;

    // [fd]
    double fd_dt_factor = 0.5; // fraction of the stability limit
    fd::FdMode fd_mode = fd::FdMode::standard;
    fd::FdBoundary fd_boundary = fd::FdBoundary::reflecting;

    // [run]
    double t_final = 40.0;
    int snapshot_every = 4;   // in engine steps
    int smoothing_every = 0;  // in engine steps; 0 = never

    // [scenario]
    double sigma = 3.2;
    double center = 32.0;
    double k0 = 0.0;
    double barrier_center = 32.0;
    double barrier_width = 4.0;
    double barrier_height = 0.0;
    int eigenmode = 1;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline Grid1D config_grid(const ExperimentConfig& c) {
    return make_grid(c.x_min, c.x_max, c.n_cells, c.periodic);
}

inline PhysicalConstants config_constants(const ExperimentConfig& c) {
    PhysicalConstants k;
    k.hbar = c.hbar;
    k.mass = c.mass;
    return k;
}

inline double resolved_explosion_fraction(const ExperimentConfig& c) {
    if (c.explosion_fraction > 0.0) return c.explosion_fraction;
    return recommended_explosion_fraction(config_grid(c), config_constants(c), c.dds_dt,
                                          c.max_speed, c.calibration);
}

inline DdsParams config_dds_params(const ExperimentConfig& c) {
    DdsParams p;
    p.explosion_fraction = resolved_explosion_fraction(c);
    p.max_speed = c.max_speed;
    p.dt = c.dds_dt;
    p.integer_mode = c.integer_mode;
    p.waiting_mode = c.waiting_mode;
    p.rng_seed = c.seed;
    refresh_intensities(p, config_grid(c), config_constants(c));
    return p;
}

inline fd::FdScheme config_fd_scheme(const ExperimentConfig& c) {
    fd::FdScheme s;
    s.mode = c.fd_mode;
    s.boundary = c.fd_boundary;
    s.dt = c.fd_dt_factor * fd::stability_limit(config_grid(c), config_constants(c));
    return s;
}

// ---------------------------------------------------------------------------
// Strict INI parsing
// ---------------------------------------------------------------------------

using IniMap = std::map<std::string, std::map<std::string, std::string>>;

namespace config_detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double parse_double(const std::string& s, const std::string& key) {
    const std::string t = trim(s);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v))
        throw ValidationError("config: key '" + key + "' is not a finite number: '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s, const std::string& key) {
    const std::string t = trim(s);
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw ValidationError("config: key '" + key + "' is not an integer: '" + s + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    const std::string t = trim(s);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || t[0] == '-')
        throw ValidationError("config: key '" + key + "' is not an unsigned integer: '" + s +
                              "'");
    return v;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
    const std::string t = trim(s);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ValidationError("config: key '" + key + "' is not a boolean (true/false/1/0): '" + s +
                          "'");
}

inline std::string format_double(double v) {
    // shortest decimal that round-trips: try increasing precision
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

} // namespace config_detail

/// Parse INI text: [section] headings, key = value lines, ';' or '#' comments.
/// Anything else is an error with its line number.
inline IniMap parse_ini(const std::string& text) {
    IniMap out;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t e = text.find('\n', pos);
        std::string line = text.substr(pos, e == std::string::npos ? std::string::npos : e - pos);
        pos = (e == std::string::npos) ? text.size() + 1 : e + 1;
        ++line_no;

        const std::size_t comment = line.find_first_of(";#");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = config_detail::trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError("config line " + std::to_string(line_no) +
                                      ": unterminated section heading");
            section = config_detail::trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ValidationError("config line " + std::to_string(line_no) +
                                      ": empty section name");
            out[section]; // register even if empty
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
        const std::string key = config_detail::trim(line.substr(0, eq));
        const std::string value = config_detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
        if (section.empty())
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": key outside any [section]");
        if (out[section].count(key))
            throw ValidationError("config line " + std::to_string(line_no) + ": duplicate key '" +
                                  key + "' in [" + section + "]");
        out[section][key] = value;
    }
    return out;
}

/// Apply parsed INI values over a config. Unknown sections or keys are errors:
/// a typo must never silently fall back to a default.
inline void apply_ini(ExperimentConfig& c, const IniMap& ini) {
    using namespace config_detail;
    for (const auto& [section, keys] : ini) {
        for (const auto& [key, value] : keys) {
            const std::string where = "[" + section + "] " + key;
            if (section == "grid") {
                if (key == "x_min") c.x_min = parse_double(value, where);
                else if (key == "x_max") c.x_max = parse_double(value, where);
                else if (key == "n_cells") c.n_cells = static_cast<int>(parse_int(value, where));
                else if (key == "periodic") c.periodic = parse_bool(value, where);
                else throw ValidationError("config: unknown key " + where);
            } else if (section == "constants") {
                if (key == "hbar") c.hbar = parse_double(value, where);
                else if (key == "mass") c.mass = parse_double(value, where);
                else throw ValidationError("config: unknown key " + where);
            } else if (section == "dds") {
                if (key == "dt") c.dds_dt = parse_double(value, where);
                else if (key == "max_speed") c.max_speed = parse_double(value, where);
                else if (key == "explosion_fraction")
                    c.explosion_fraction = parse_double(value, where);
                else if (key == "calibration") c.calibration = parse_double(value, where);
                else if (key == "integer_mode") c.integer_mode = parse_bool(value, where);
                else if (key == "waiting_mode") c.waiting_mode = parse_bool(value, where);
                else if (key == "total_weight") c.total_weight = parse_double(value, where);
                else if (key == "seed") c.seed = parse_u64(value, where);
                else throw ValidationError("config: unknown key " + where);
            } else if (section == "fd") {
                if (key == "dt_factor") c.fd_dt_factor = parse_double(value, where);
                else if (key == "mode") {
                    const std::string v = trim(value);
                    if (v == "standard") c.fd_mode = fd::FdMode::standard;
                    else if (v == "shifted") c.fd_mode = fd::FdMode::shifted;
                    else throw ValidationError("config: " + where + " must be standard|shifted");
                } else if (key == "boundary") {
                    const std::string v = trim(value);
                    if (v == "reflecting") c.fd_boundary = fd::FdBoundary::reflecting;
                    else if (v == "periodic") c.fd_boundary = fd::FdBoundary::periodic;
                    else
                        throw ValidationError("config: " + where +
                                              " must be reflecting|periodic");
                } else throw ValidationError("config: unknown key " + where);
            } else if (section == "run") {
                if (key == "scenario") c.scenario = trim(value);
                else if (key == "t_final") c.t_final = parse_double(value, where);
                else if (key == "snapshot_every")
                    c.snapshot_every = static_cast<int>(parse_int(value, where));
                else if (key == "smoothing_every")
                    c.smoothing_every = static_cast<int>(parse_int(value, where));
                else throw ValidationError("config: unknown key " + where);
            } else if (section == "scenario") {
                if (key == "sigma") c.sigma = parse_double(value, where);
                else if (key == "center") c.center = parse_double(value, where);
                else if (key == "k0") c.k0 = parse_double(value, where);
                else if (key == "barrier_center") c.barrier_center = parse_double(value, where);
                else if (key == "barrier_width") c.barrier_width = parse_double(value, where);
                else if (key == "barrier_height") c.barrier_height = parse_double(value, where);
                else if (key == "eigenmode")
                    c.eigenmode = static_cast<int>(parse_int(value, where));
                else throw ValidationError("config: unknown key " + where);
            } else {
                throw ValidationError("config: unknown section [" + section + "]");
            }
        }
    }
}

/// Full validation of a run configuration. Throws ValidationError with a
/// message naming the offending key; returns the resolved explosion fraction.
inline double validate(const ExperimentConfig& c) {
    bool known = false;
    for (const char* s : kKnownScenarios) known = known || c.scenario == s;
    if (!known) throw ValidationError("config: unknown scenario '" + c.scenario + "'");

    const Grid1D grid = config_grid(c); // validates extents and cell count
    const PhysicalConstants constants = config_constants(c);
    validate(constants);
    const double dx = grid.dx();

    if (!(c.dds_dt > 0.0)) throw ValidationError("config: [dds] dt must be positive");
    if (!(c.max_speed > 0.0)) throw ValidationError("config: [dds] max_speed must be positive");
    const double hop = c.max_speed * c.dds_dt;
    if (hop < dx || hop >= 2.0 * dx)
        throw ValidationError(
            "config: max_speed * dt must lie in [dx, 2 dx): thin layers must cross one border "
            "and only one (got " + config_detail::format_double(hop) + ", dx = " +
            config_detail::format_double(dx) + ")");
    const double a = resolved_explosion_fraction(c);
    if (!(a > 0.0 && a < 0.5))
        throw ValidationError("config: explosion fraction resolves to " +
                              config_detail::format_double(a) + "; must lie in (0, 1/2)");
    if (!(c.calibration > 0.0)) throw ValidationError("config: [dds] calibration must be positive");
    if (!(c.total_weight > 0.0))
        throw ValidationError("config: [dds] total_weight must be positive");
    if (c.integer_mode &&
        (c.total_weight != std::floor(c.total_weight) || c.total_weight < 1.0))
        throw ValidationError("config: integer mode needs a whole total_weight >= 1");

    if (!(c.fd_dt_factor > 0.0 && c.fd_dt_factor <= 1.0))
        throw ValidationError("config: [fd] dt_factor must lie in (0, 1]");

    if (!(c.t_final > 0.0)) throw ValidationError("config: [run] t_final must be positive");
    if (c.snapshot_every < 1)
        throw ValidationError("config: [run] snapshot_every must be >= 1");
    if (c.smoothing_every < 0)
        throw ValidationError("config: [run] smoothing_every must be >= 0");
    if (c.smoothing_every > 0 && c.integer_mode)
        throw ValidationError("config: smoothing requires weighted mode");

    // packet parameters, where the scenario uses them
    if (c.scenario != "ground_vs_modulus") {
        if (!(c.sigma > 0.0)) throw ValidationError("config: [scenario] sigma must be positive");
        if (std::abs(c.k0) * dx > 1.5707963267948966)
            throw ValidationError(
                "config: [scenario] k0 * dx must stay below pi/2 (phase aliasing)");
        const double packet_speed = c.hbar * std::abs(c.k0) / c.mass;
        if (packet_speed >= c.max_speed)
            throw ValidationError(
                "config: packet speed hbar k0 / m must stay below [dds] max_speed");
    }
    if (c.scenario == "gaussian_dispersion" || c.scenario == "double_well") {
        if (!grid.contains(c.center))
            throw ValidationError("config: [scenario] center lies outside the domain");
    }
    if (c.scenario == "double_well") {
        if (!(c.barrier_width > 0.0))
            throw ValidationError("config: [scenario] barrier_width must be positive");
        if (c.barrier_height < 0.0)
            throw ValidationError("config: [scenario] barrier_height must be non-negative");
        if (c.barrier_center - 0.5 * c.barrier_width < grid.x_min ||
            c.barrier_center + 0.5 * c.barrier_width > grid.x_max)
            throw ValidationError("config: [scenario] barrier must lie inside the domain");
    }
    if (c.scenario == "ground_vs_modulus") {
        if (c.eigenmode < 1 || c.eigenmode >= c.n_cells)
            throw ValidationError("config: [scenario] eigenmode out of range");
    }
    return a;
}

/// Canonical INI text for a config: parse(serialize(c)) reproduces c exactly.
inline std::string serialize(const ExperimentConfig& c) {
    using config_detail::format_double;
    std::string s;
    auto kv = [&s](const char* k, const std::string& v) {
        s += k;
        s += " = ";
        s += v;
        s += '\n';
    };
    s += "[run]\n";
    kv("scenario", c.scenario);
    kv("t_final", format_double(c.t_final));
    kv("snapshot_every", std::to_string(c.snapshot_every));
    kv("smoothing_every", std::to_string(c.smoothing_every));
    s += "\n[grid]\n";
    kv("x_min", format_double(c.x_min));
    kv("x_max", format_double(c.x_max));
    kv("n_cells", std::to_string(c.n_cells));
    kv("periodic", c.periodic ? "true" : "false");
    s += "\n[constants]\n";
    kv("hbar", format_double(c.hbar));
    kv("mass", format_double(c.mass));
    s += "\n[dds]\n";
    kv("dt", format_double(c.dds_dt));
    kv("max_speed", format_double(c.max_speed));
    kv("explosion_fraction", format_double(c.explosion_fraction));
    kv("calibration", format_double(c.calibration));
    kv("integer_mode", c.integer_mode ? "true" : "false");
    kv("waiting_mode", c.waiting_mode ? "true" : "false");
    kv("total_weight", format_double(c.total_weight));
    kv("seed", std::to_string(c.seed));
    s += "\n[fd]\n";
    kv("dt_factor", format_double(c.fd_dt_factor));
    kv("mode", c.fd_mode == fd::FdMode::standard ? "standard" : "shifted");
    kv("boundary", c.fd_boundary == fd::FdBoundary::reflecting ? "reflecting" : "periodic");
    s += "\n[scenario]\n";
    kv("sigma", format_double(c.sigma));
    kv("center", format_double(c.center));
    kv("k0", format_double(c.k0));
    kv("barrier_center", format_double(c.barrier_center));
    kv("barrier_width", format_double(c.barrier_width));
    kv("barrier_height", format_double(c.barrier_height));
    kv("eigenmode", std::to_string(c.eigenmode));
    return s;
}

} // namespace dds

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <string>

#include <json.hpp>

#include "dds/experiment.hpp"

using namespace dds;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(bool integer_mode = false, std::uint64_t seed = 1) {
    ExperimentConfig c = default_config("gaussian_dispersion");
    c.t_final = 4.0;
    c.snapshot_every = 2;
    c.integer_mode = integer_mode;
    c.total_weight = integer_mode ? 2000.0 : 1e6;
    c.seed = seed;
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DDSIM_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return (status >= 256) ? (status >> 8) & 0xff : status;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

} // namespace

TEST_CASE("experiment run: snapshot cadence, normalization, conservation") {
    const ExperimentResult r = run_experiment(tiny_config());

    // 8 steps of 0.5, snapshots every 2 steps plus t = 0
    REQUIRE(r.times.size() == 5);
    CHECK(r.times[0] == 0.0);
    CHECK(r.times[1] == doctest::Approx(1.0)); // two steps of dt = 0.5
    CHECK(r.times.back() == doctest::Approx(4.0));
    REQUIRE(r.dds_mass.size() == 5);
    REQUIRE(r.fd_mass.size() == 5);
    REQUIRE(r.m_dds.size() == 5);
    REQUIRE(r.l1_cross.size() == 5);

    for (const std::vector<double>& row : r.dds_mass)
        CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (const std::vector<double>& row : r.fd_mass)
        CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));

    CHECK(r.l1_cross[0] < 1e-4); // both engines start from the same state
    CHECK(r.m_dds[0] == 0.0);
    CHECK(r.max_weight_drift < 1e-12);
    CHECK(r.max_momentum_residual < 1e-6);
    CHECK(r.fd_norm_drift < 0.01);
    CHECK(r.explosion_fraction == doctest::Approx(0.0625));
}

TEST_CASE("weighted runs are bit-reproducible; integer runs depend on the seed") {
    const std::string a = states_csv(run_experiment(tiny_config()));
    const std::string b = states_csv(run_experiment(tiny_config()));
    CHECK(a == b);

    const std::string s1 = states_csv(run_experiment(tiny_config(true, 1)));
    const std::string s1_again = states_csv(run_experiment(tiny_config(true, 1)));
    const std::string s2 = states_csv(run_experiment(tiny_config(true, 2)));
    CHECK(s1 == s1_again);
    CHECK(s1 != s2);
}

TEST_CASE("run directory: files, checksums, byte comparison") {
    TempDir dir_a("dds_test_run_a");
    TempDir dir_b("dds_test_run_b");
    TempDir dir_c("dds_test_run_c");

    const ExperimentResult ra = run_experiment(tiny_config(true, 1));
    const ExperimentResult rb = run_experiment(tiny_config(true, 1));
    const ExperimentResult rc = run_experiment(tiny_config(true, 2));
    (void)write_run(ra, dir_a.str());
    (void)write_run(rb, dir_b.str());
    (void)write_run(rc, dir_c.str());

    for (const char* f : {"config.ini", "states.csv", "metrics.csv", "manifest.json"})
        CHECK(fs::exists(dir_a.path / f));

    // manifest checksums match the bytes on disk
    const nlohmann::json manifest =
        nlohmann::json::parse(io_detail::read_file(dir_a.path / "manifest.json"));
    CHECK(manifest.at("scenario") == "gaussian_dispersion");
    CHECK(manifest.at("seed") == 1);
    for (const char* f : {"config.ini", "states.csv", "metrics.csv"}) {
        const std::string bytes = io_detail::read_file(dir_a.path / f);
        CHECK(manifest.at("files").at(f).at("bytes").get<std::uint64_t>() == bytes.size());
        CHECK(manifest.at("files").at(f).at("fnv1a64").get<std::string>() ==
              io_detail::hex64(io_detail::fnv1a64(bytes)));
    }

    const CompareResult same = compare_runs(dir_a.str(), dir_b.str());
    CHECK(same.identical);
    const CompareResult diff = compare_runs(dir_a.str(), dir_c.str());
    CHECK_FALSE(diff.identical);
    CHECK(diff.detail.find("states.csv") != std::string::npos);

    // csv structure: header plus one row per (snapshot, cell)
    const std::string states = io_detail::read_file(dir_a.path / "states.csv");
    const std::size_t rows = static_cast<std::size_t>(
        std::count(states.begin(), states.end(), '\n'));
    CHECK(rows == 1 + ra.times.size() * static_cast<std::size_t>(ra.grid.n_cells));
    CHECK(states.rfind("t,cell_index,x_center,rho_dds,rho_fd,v_mean,thin_layer_fraction\n", 0) ==
          0);
}

TEST_CASE("fnv1a64 reference vectors") {
    CHECK(io_detail::fnv1a64("") == 14695981039346656037ull);
    CHECK(io_detail::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(io_detail::hex64(0xaf63dc4c8601ec8cull) == "af63dc4c8601ec8c");
}

TEST_CASE("command line interface") {
    CHECK(run_cli("list-scenarios") == 0);
    CHECK(run_cli("validate gaussian_dispersion") == 0);
    CHECK(run_cli("validate no_such_scenario") == 2);
    CHECK(run_cli("") != 0); // a subcommand is required

    TempDir out("dds_test_cli_run");
    const std::string run_dir = (out.path / "r1").string();
    CHECK(run_cli("run gaussian_dispersion --out-dir " + run_dir + " --snapshots 16") == 0);
    CHECK(fs::exists(fs::path(run_dir) / "manifest.json"));

    const std::string run_dir2 = (out.path / "r2").string();
    CHECK(run_cli("run gaussian_dispersion --out-dir " + run_dir2 + " --snapshots 16") == 0);
    CHECK(run_cli("compare " + run_dir + " " + run_dir2) == 0);

    // a config file on disk drives the run; broken values exit with code 2
    const fs::path bad_ini = out.path / "bad.ini";
    io_detail::write_file(bad_ini, "[dds]\nmax_speed = 0.25\n");
    CHECK(run_cli("validate gaussian_dispersion --config " + bad_ini.string()) == 2);

    const fs::path good_ini = out.path / "good.ini";
    io_detail::write_file(good_ini, "[run]\nscenario = ground_vs_modulus\nt_final = 2\n");
    CHECK(run_cli("validate --config " + good_ini.string()) == 0);
}

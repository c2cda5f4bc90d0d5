#include <doctest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "rodsim/oracles.hpp"
#include "rodsim/report.hpp"
#include "rodsim/runner.hpp"
#include "test_util.hpp"

using namespace rodsim;
using namespace rodsim::testutil;

namespace {

const char* kSmallScenario = R"(
# a small clamped beam
material soft E 1e5 poisson 0.5 rho 500 radius 0.02
rod beam line 0 0 0  1 0 0 nodes 11 material soft
clamp beam start
gravity 0 0 0
sim dt 0.01 time 0.1 integrator implicit_midpoint tol 1e-8
init_mode_velocity beam 0.005
log every 2 energies on
seed 3
)";

std::string tmp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "rodsim_harness_test";
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.0, -9.8, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, 0.1, 123456.789}) {
        const std::string s = format_double(v);
        double back = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), back);
        REQUIRE(res.ec == std::errc{});
        CHECK(back == v);
    }
}

TEST_CASE("scenario parse -> serialize -> parse is identity") {
    const ScenarioSpec a = parse_scenario(kSmallScenario);
    const std::string canon = serialize_scenario(a);
    const ScenarioSpec b = parse_scenario(canon);
    CHECK(serialize_scenario(b) == canon);

    // a richer spec with every section
    const char* full = R"(
material m1 E 3e5 poisson 0.5 rho 1200 radius 0.005
rod fing1 line 0.025 0 0  0.025 0 0.3 nodes 12 material m1
rod fing2 helix center 0 0 0 axis 0 0 1 radius 0.02 pitch 0.05 contour 0.5 phase 0.3 nodes 20 material m1
joint fing1 11 fing2 start
clamp fing1 start
fix_node fing2 5
fix_theta fing2 3
gravity 0 0 -9.8
damping 0.25
floor z -0.01 mu 0.4 delta 5e-4 nu 1e-3 stiffness 2e4
selfcontact mu 0.5 delta 5e-4 nu 1e-3 stiffness 1e4
push fing1 0.5 0 0
actuate fing1 random_phi_deg 0 40 seed 9 azimuth_deg 90 ramp 0 1
sim dt 0.002 time 0.4 integrator backward_euler tol 1e-7 max_iters 30 line_search on adaptive on min_dt 1e-6 settle 0.1 8
log every 5 energies off
sweep push_x fing1 linspace -10.6 10.5 44
seed 11
)";
    const ScenarioSpec c = parse_scenario(full);
    CHECK(c.sweep->values.size() == 44);
    CHECK(c.sweep->values.front() == doctest::Approx(-10.6));
    CHECK(c.sweep->values.back() == doctest::Approx(10.5));
    const std::string canon2 = serialize_scenario(c);
    CHECK(serialize_scenario(parse_scenario(canon2)) == canon2);
}

TEST_CASE("scenario validation errors") {
    CHECK_THROWS_AS(parse_scenario("gravity 0 0 -9.8\nsim dt 0.1 time 1\n"),
                    std::invalid_argument);  // no rods
    CHECK_THROWS_AS(parse_scenario("material m E 1 poisson 0.5 rho 1 radius 1\n"
                                   "rod r line 0 0 0 1 0 0 nodes 5 material missing\n"),
                    std::invalid_argument);  // unresolved material
    CHECK_THROWS_AS(parse_scenario("wibble 3\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_scenario("material m E 1e5 poisson 0.5 rho 1 radius 0.1\n"
                                   "rod r line 0 0 0 1 0 0 nodes 5 material m\n"
                                   "sim dt 0.1 time -4\n"),
                    std::invalid_argument);  // negative sim time
}

TEST_CASE("run_scenario writes a parseable, monotone log") {
    const ScenarioSpec spec = parse_scenario(kSmallScenario);
    RunOptions opts;
    opts.out_dir = tmp_dir();
    opts.log_name = "small.csv";
    const RunResult r = run_scenario(spec, opts);
    CHECK(r.steps == 10);
    const CsvTable log = read_csv(r.log_path);
    CHECK(log.columns.front() == "t");
    CHECK(log.rows.size() == 6);  // t=0 plus every 2nd of 10 steps
    const auto t = log.column("t");
    for (size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
    // energy columns present
    CHECK(log.column_index("e_kinetic") >= 0);
    // all rows have the same width by construction of read_csv
}

TEST_CASE("cantilever oracle: boundary cases and scaling") {
    Material mat = Material::from_poisson(1e5, 0.5, 500.0, 0.02);
    const CantileverOracle oracle(mat, 1.0, 0.005);

    // velocity-only initial condition: zero deflection at t=0
    for (double s : {0.1, 0.5, 1.0}) CHECK(oracle.deflection(s, 0.0) == 0.0);

    // first-mode frequency: (1.8751)^2 sqrt(EI / (rho A L^4))
    const double expect =
        1.87510406871196 * 1.87510406871196 *
        std::sqrt(mat.ei() / (mat.density * mat.area() * 1.0));
    CHECK(oracle.omega(0) == doctest::Approx(expect).epsilon(1e-9));

    // E scaled by 100 -> omega scaled by 10
    Material stiff = Material::from_poisson(1e7, 0.5, 500.0, 0.02);
    const CantileverOracle oracle2(stiff, 1.0, 0.005);
    CHECK(oracle2.omega(0) == doctest::Approx(10.0 * oracle.omega(0)).epsilon(1e-9));

    // tip amplitude of the single-mode response is v_tip / omega1
    CHECK(oracle.tip_amplitude() == doctest::Approx(0.005 / oracle.omega(0)).epsilon(1e-3));
}

TEST_CASE("friction oracle branch values") {
    // threshold with m ~ 1 kg: mu*m*g ~ 3.92 N
    const double m = 509.3 * M_PI * 0.025 * 0.025 * 1.0;
    CHECK(friction_oracle(3.9, 0.4, m, 9.8, 1.5) == 0.0);
    CHECK(friction_oracle(0.4 * m * 9.8, 0.4, m, 9.8, 1.5) == 0.0);  // exact boundary
    const double ek = friction_oracle(10.5, 0.4, m, 9.8, 1.5);
    const double expect = 1.5 * 1.5 / (2 * m) * std::pow(10.5 - 0.4 * m * 9.8, 2);
    CHECK(ek == doctest::Approx(expect).epsilon(1e-12));
    // pull direction symmetry
    CHECK(friction_oracle(-10.5, 0.4, m, 9.8, 1.5) == ek);
}

TEST_CASE("report: identical series, shifted sine bound, constant series") {
    std::vector<double> t, sine, shifted, constant;
    const double period = 2.0, dt = 0.01;
    for (int i = 0; i < 600; ++i) {
        t.push_back(i * dt);
        sine.push_back(std::sin(2 * M_PI * i * dt / period));
        shifted.push_back(std::sin(2 * M_PI * (i + 1) * dt / period));
        constant.push_back(4.2);
    }
    const SeriesMetrics same = compare_series(t, sine, sine);
    CHECK(same.max_err == 0.0);
    CHECK(same.rms_err == 0.0);
    REQUIRE(same.frequency.has_value());
    CHECK(*same.frequency == doctest::Approx(1.0 / period).epsilon(1e-3));

    const SeriesMetrics shift = compare_series(t, sine, shifted);
    CHECK(shift.rms_err <= 1.0 * 2 * M_PI * dt / period * (1 + 1e-9));

    const SeriesMetrics flat = compare_series(t, constant, constant);
    CHECK(!flat.frequency.has_value());

    CHECK_THROWS_AS(compare_series(t, sine, std::vector<double>(3, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("sweep: single value equals run_scenario, workers do not change outputs") {
    ScenarioSpec spec = parse_scenario(R"(
material soft E 1e5 poisson 0.5 rho 509.3 radius 0.025
rod bar line 0 0 0.0251  1 0 0.0251 nodes 8 material soft
gravity 0 0 -9.8
floor z 0 mu 0.4 delta 5e-4 nu 1e-3 stiffness 2e4
sim dt 0.005 time 0.1 integrator backward_euler tol 1e-7 settle 0.05 10
log every 4
sweep push_x bar linspace 2 8 3
seed 1
)");
    RunOptions opts;
    opts.out_dir = tmp_dir() + "/w1";
    opts.workers = 1;
    const SweepResult serial = sweep_runner(spec, opts);
    REQUIRE(serial.entries.size() == 3);
    for (const auto& e : serial.entries) CHECK(e.ok);

    RunOptions opts4 = opts;
    opts4.out_dir = tmp_dir() + "/w4";
    opts4.workers = 4;
    const SweepResult parallel = sweep_runner(spec, opts4);

    for (size_t i = 0; i < 3; ++i) {
        // byte-identical per-run logs regardless of concurrency
        std::ifstream a(serial.entries[i].log_path, std::ios::binary);
        std::ifstream b(parallel.entries[i].log_path, std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
        CHECK(!sa.str().empty());
    }
    CHECK(serial.summary.to_string() == parallel.summary.to_string());

    // a single-value sweep reproduces a plain run with that push
    ScenarioSpec single = spec;
    single.sweep->values = {5.0};
    RunOptions opts1;
    opts1.out_dir = tmp_dir() + "/single";
    const SweepResult sw = sweep_runner(single, opts1);
    ScenarioSpec plain = spec;
    plain.sweep.reset();
    plain.pushes.push_back({"bar", Vec3(5, 0, 0)});
    RunOptions opts_plain;
    opts_plain.out_dir = tmp_dir() + "/plain";
    const RunResult rr = run_scenario(plain, opts_plain);
    CHECK(sw.entries[0].kinetic_energy == rr.final_kinetic_energy);
}

TEST_CASE("repeated runs are byte-identical") {
    const ScenarioSpec spec = parse_scenario(kSmallScenario);
    RunOptions a, b;
    a.out_dir = tmp_dir() + "/rep1";
    b.out_dir = tmp_dir() + "/rep2";
    const RunResult ra = run_scenario(spec, a);
    const RunResult rb = run_scenario(spec, b);
    std::ifstream fa(ra.log_path, std::ios::binary), fb(rb.log_path, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
}

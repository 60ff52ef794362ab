#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "esrkit/config.hpp"
#include "esrkit/errors.hpp"
#include "esrkit/io.hpp"
#include "esrkit/report.hpp"
#include "esrkit/synth.hpp"
#include "test_util.hpp"

using esr::ordered_json;
using testutil::rel_err;

namespace {

ordered_json sweep_scenario(uint64_t seed, double jump_lo, double jump_hi) {
    return ordered_json{
        {"kind", "sweep"},
        {"seed", seed},
        {"resonator", {{"f0_hz", 5.015e9}, {"q", 5e4}, {"qc_re", 1e5}, {"qc_im", 0.0}}},
        {"q0_inv", 2e-5},
        {"field", {{"start_tesla", 0.1}, {"stop_tesla", 0.25}, {"points", 400}}},
        {"peaks",
         {{{"label", "central"},
           {"shape", "lorentzian"},
           {"spin", {{"kind", "free_doublet"}, {"g_e", 2.0023}}},
           {"b_peak_tesla", 0.179},
           {"omega_over_2pi_hz", 1e6},
           {"gamma2_over_2pi_hz", 8.7e7}}}},
        {"background", {{"c", 0.0}, {"b_on_tesla", 0.05}, {"sigma_on_tesla", 0.01}}},
        {"noise",
         {{"q_rel", 0.01},
          {"df_sigma_hz", 1e3},
          {"flux_jump_count", 4},
          {"flux_jump_min_hz", jump_lo},
          {"flux_jump_max_hz", jump_hi},
          {"flux_jump_width", 5}}}};
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("synthesis is a pure function of the scenario") {
    auto sc = sweep_scenario(42, 2e4, 8e4);
    auto a = esr::synthesize(sc);
    auto b = esr::synthesize(sc);
    REQUIRE(a.data.rows() == b.data.rows());
    CHECK((a.data.array() == b.data.array()).all());  // bitwise, not approximately
    CHECK(a.columns == b.columns);
    CHECK(a.manifest == b.manifest);

    auto c = esr::synthesize(sweep_scenario(43, 2e4, 8e4));
    CHECK((a.data.array() != c.data.array()).any());
}

TEST_CASE("flux jumps land only in the frequency channel") {
    // zero-amplitude jumps consume the same RNG draws, so every other
    // channel must be bitwise identical to the jumpy run
    auto quiet = esr::synthesize(sweep_scenario(7, 0.0, 0.0));
    auto jumpy = esr::synthesize(sweep_scenario(7, 2e4, 8e4));
    REQUIRE(quiet.columns == std::vector<std::string>{"B_tesla", "f_hz", "q_inv"});
    CHECK((quiet.data.col(0).array() == jumpy.data.col(0).array()).all());
    CHECK((quiet.data.col(2).array() == jumpy.data.col(2).array()).all());
    CHECK((quiet.data.col(1).array() != jumpy.data.col(1).array()).any());
}

TEST_CASE("saturation noise is the advertised gaussian") {
    const double q = 2e4, q_ext = 5e4, qs0 = 4e-6, psat = 14e-9, eps = 0.5;
    const double rel = 0.05;
    double sum = 0.0, sumsq = 0.0;
    int count = 0;
    for (uint64_t seed = 1; seed <= 50; ++seed) {
        ordered_json sc = {
            {"kind", "saturation"},
            {"seed", seed},
            {"q", q},
            {"q_ext", q_ext},
            {"qs0_inv", qs0},
            {"p_sat_watt", psat},
            {"epsilon", eps},
            {"power", {{"start_watt", 1e-14}, {"stop_watt", 1e-9}, {"points", 40}}},
            {"noise", {{"q_rel", rel}}}};
        auto tab = esr::synthesize(sc);
        for (Eigen::Index i = 0; i < tab.data.rows(); ++i) {
            const double p0 = 2.0 * q * q * tab.data(i, 0) / q_ext;
            const double clean = qs0 * std::pow(1.0 + p0 / psat, -eps);
            const double z = (tab.data(i, 1) / clean - 1.0) / rel;
            sum += z;
            sumsq += z * z;
            ++count;
        }
    }
    const double mean = sum / count;
    const double var = sumsq / count - mean * mean;
    CHECK(count == 2000);
    CHECK(std::abs(mean) < 0.09);       // 4 sigma for N(0,1) sample mean
    CHECK(var > 0.87);
    CHECK(var < 1.13);
}

TEST_CASE("manifest records provenance") {
    auto sc = sweep_scenario(99, 2e4, 8e4);
    auto tab = esr::synthesize(sc);
    CHECK(tab.manifest.at("tool") == "esrkit");
    CHECK(tab.manifest.at("kind") == "sweep");
    CHECK(tab.manifest.at("seed") == 99);
    CHECK(tab.manifest.at("rng") == "mt19937_64+box-muller");
    CHECK(tab.manifest.at("scenario") == sc);
}

TEST_CASE("scenario validation names the offending key") {
    ordered_json bad_kind = {{"kind", "interpretive_dance"}, {"seed", 1}};
    CHECK_THROWS_WITH_AS(esr::synthesize(bad_kind),
                         doctest::Contains("unknown kind"), esr::InputError);

    auto extra = sweep_scenario(1, 0.0, 0.0);
    extra["entropy"] = 1.0;
    CHECK_THROWS_WITH_AS(esr::synthesize(extra), doctest::Contains("entropy"),
                         esr::InputError);

    auto missing = sweep_scenario(1, 0.0, 0.0);
    missing.erase("resonator");
    CHECK_THROWS_AS(esr::synthesize(missing), esr::InputError);
}

TEST_CASE("csv writes read back exactly") {
    const auto path = temp_path("esrkit_roundtrip.csv");
    Eigen::MatrixXd data(3, 2);
    data << 0.1, -1.25e-7, 0.2, 3.0e4, 0.3, 6.62607015e-34;
    std::vector<std::string> labels = {"satlow", "central", "sathigh"};
    esr::write_csv_table(path.string(), {"B_tesla", "q_inv"}, data, labels,
                         {"synthetic fixture"});
    auto tab = esr::read_csv_table(path.string());
    REQUIRE(tab.columns == std::vector<std::string>{"B_tesla", "q_inv"});
    REQUIRE(tab.data.rows() == 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(rel_err(tab.data(i, j), data(i, j)) < 1e-12);  // %.12e format
    CHECK(tab.labels == labels);
    CHECK(tab.column_index("q_inv") == 1);
    CHECK(tab.column_index("nope") == -1);
    CHECK_THROWS_AS(tab.column("nope"), esr::InputError);
    std::filesystem::remove(path);
}

TEST_CASE("csv parser skips comments and reports the source line") {
    const auto path = temp_path("esrkit_badrow.csv");
    {
        std::ofstream out(path);
        out << "# preamble\n";
        out << "\n";
        out << "B_tesla,q_inv\n";
        out << "0.1,1e-5\n";
        out << "# mid-table remark\n";
        out << "0.2,not_a_number\n";
    }
    try {
        esr::read_csv_table(path.string());
        FAIL("expected a parse error");
    } catch (const esr::InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("cannot parse") != std::string::npos);
        CHECK(msg.find("(line 6)") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("typed loaders enforce their column contracts") {
    const auto path = temp_path("esrkit_columns.csv");
    {
        std::ofstream out(path);
        out << "B_tesla,f_hz\n0.1,5e9\n0.2,5e9\n";
    }
    CHECK_THROWS_AS(esr::load_sweep(path.string()), esr::InputError);  // no q_inv
    CHECK_THROWS_AS(esr::load_s21(path.string()), esr::InputError);    // no s21_re/im
    std::filesystem::remove(path);
}

TEST_CASE("config hash is stable and the loader is strict") {
    esr::Config def;
    CHECK(def.hash() == "486891e2c720663e");
    CHECK(esr::load_config("").hash() == def.hash());
    CHECK(def.canonical() == esr::Config{}.canonical());

    const auto path = temp_path("esrkit_config.toml");
    {
        std::ofstream out(path);
        out << "# overrides\n[resonator]\nf0_hz = 7.2e9\nq = 3e4\n";
        out << "[run]\nt_kelvin = 0.3\n";
    }
    auto cfg = esr::load_config(path.string());
    CHECK(cfg.resonator.f0_hz == 7.2e9);
    CHECK(cfg.resonator.q == 3e4);
    CHECK(cfg.t_kelvin == 0.3);
    CHECK(cfg.hash() != def.hash());

    {
        std::ofstream out(path);
        out << "[resonator]\nfrequency = 7.2e9\n";  // not a key we define
    }
    CHECK_THROWS_AS(esr::load_config(path.string()), esr::InputError);
    std::filesystem::remove(path);
}

TEST_CASE("report rendering is byte-stable") {
    ordered_json r1 = {{"command", "fit-resonance"},
                       {"inputs", {"trace.csv"}},
                       {"params", {{"f0_hz", 5.015e9}, {"q", 5.0e4}}}};
    ordered_json r2 = {{"command", "fit-sweep"},
                       {"inputs", {"sweep.csv"}},
                       {"params", {{"central.b_peak_tesla", 0.179}}}};
    const auto once = esr::render_report({r1, r2});
    const auto twice = esr::render_report({r1, r2});
    CHECK(once == twice);
    CHECK_FALSE(once.empty());
    CHECK(once.find("fit-resonance") != std::string::npos);
    CHECK(once.find("fit-sweep") != std::string::npos);
}

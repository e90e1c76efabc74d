#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <numbers>

#include "shockfusion/burgers.hpp"
#include "support/cole_hopf.hpp"

using namespace shockfusion;
namespace fs = std::filesystem;

namespace {

double max_abs_error_vs_oracle(const burgers::SpaceTimeField& f, double nu, double t_query) {
    const double dt = f.t[1] - f.t[0];
    const std::size_t k = std::size_t(std::llround(t_query / dt));
    double err = 0.0;
    for (std::size_t i = 0; i < f.x.size(); ++i)
        err = std::max(err, std::abs(f.u[k][i] - oracle::cole_hopf_u(f.x[i], f.t[k], nu)));
    return err;
}

}  // namespace

TEST_CASE("initial condition and walls are exact") {
    burgers::BurgersConfig cfg;
    cfg.nx = 65;
    cfg.nt = 41;
    const auto f = burgers::solve_burgers(cfg);
    for (std::size_t i = 1; i + 1 < f.x.size(); ++i)
        CHECK(f.u[0][i] == -std::sin(std::numbers::pi * f.x[i]));
    for (const auto& row : f.u) {
        CHECK(row.front() == 0.0);
        CHECK(row.back() == 0.0);
    }
}

TEST_CASE("diffusion-dominated limit decays monotonically in max-norm") {
    burgers::BurgersConfig cfg;
    cfg.nu = 10.0;
    cfg.nx = 129;
    cfg.nt = 201;
    const auto f = burgers::solve_burgers(cfg);
    double prev = 1e300;
    for (const auto& row : f.u) {
        double m = 0.0;
        for (double v : row) m = std::max(m, std::abs(v));
        CHECK(m <= prev + 1e-12);
        prev = m;
    }
    CHECK(prev < 1e-6);  // essentially fully decayed by t = 1
}

TEST_CASE("solver matches the Cole-Hopf quadrature oracle and refines") {
    const double nu = 0.01 / std::numbers::pi;
    std::vector<std::pair<int, int>> levels = {{513, 801}, {1025, 1601}, {2049, 3201}};
    std::vector<double> worst;
    for (auto [nx, nt] : levels) {
        burgers::BurgersConfig cfg;
        cfg.nu = nu;
        cfg.nx = nx;
        cfg.nt = nt;
        const auto f = burgers::solve_burgers(cfg);
        double e = 0.0;
        for (double tq : {0.25, 0.5, 1.0}) e = std::max(e, max_abs_error_vs_oracle(f, nu, tq));
        worst.push_back(e);
    }
    CHECK(worst[2] < 5e-3);
    // halving dx and dt improves the oracle error by at least 3x
    CHECK(worst[0] / worst[1] >= 3.0);
    CHECK(worst[1] / worst[2] >= 3.0);
}

TEST_CASE("t_shock estimation: tie-breaks and scale invariance") {
    burgers::SpaceTimeField f;
    f.x = {-1.0, -0.5, 0.0, 0.5, 1.0};
    f.t = {0.0, 0.5, 1.0};
    SECTION("field constant in time picks the earliest time") {
        f.u = {{0, 1, 0, -1, 0}, {0, 1, 0, -1, 0}, {0, 1, 0, -1, 0}};
        CHECK(burgers::estimate_t_shock(f) == 0.0);
    }
    SECTION("decaying gradient picks t = 0") {
        f.u = {{0, 1, 0, -1, 0}, {0, 0.5, 0, -0.5, 0}, {0, 0.25, 0, -0.25, 0}};
        CHECK(burgers::estimate_t_shock(f) == 0.0);
    }
    SECTION("positive scaling of u leaves the estimate unchanged") {
        f.u = {{0, 0.5, 0, -0.5, 0}, {0, 1, 0, -1, 0}, {0, 0.25, 0, -0.25, 0}};
        const double t1 = burgers::estimate_t_shock(f);
        for (auto& row : f.u)
            for (double& v : row) v *= 3.0;
        CHECK(burgers::estimate_t_shock(f) == t1);
        CHECK(t1 == 0.5);
    }
}

TEST_CASE("t_shock calibration recovers a synthetic affine law") {
    // sharpness profile peaks exactly at t* = 0.3 + 2 nu
    auto make_field = [](double nu) {
        burgers::SpaceTimeField f;
        const int nx = 201, nt = 101;
        for (int i = 0; i < nx; ++i) f.x.push_back(-1.0 + 2.0 * i / (nx - 1));
        for (int n = 0; n < nt; ++n) f.t.push_back(double(n) / (nt - 1));
        const double t_star = 0.3 + 2.0 * nu;
        for (int n = 0; n < nt; ++n) {
            const double w = 0.05 + (f.t[n] - t_star) * (f.t[n] - t_star);
            std::vector<double> row(nx);
            for (int i = 0; i < nx; ++i) row[i] = std::tanh(f.x[i] / w);
            f.u.push_back(std::move(row));
        }
        return f;
    };
    std::vector<std::pair<double, burgers::SpaceTimeField>> cases;
    for (double nu : {0.05, 0.1, 0.15}) cases.emplace_back(nu, make_field(nu));
    const auto cal = burgers::calibrate_t_shock(cases);
    CHECK(cal.a0 == Catch::Approx(0.3).margin(1e-9));
    CHECK(cal.a1 == Catch::Approx(2.0).margin(1e-9));
    CHECK(cal.residual == Catch::Approx(0.0).margin(1e-9));
    CHECK(cal.per_case.size() == 3);

    SECTION("two points interpolate exactly") {
        cases.pop_back();
        const auto two = burgers::calibrate_t_shock(cases);
        CHECK(two.residual == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("identical viscosities are rank deficient") {
        std::vector<std::pair<double, burgers::SpaceTimeField>> same = {cases[0], cases[0]};
        CHECK_THROWS_AS(burgers::calibrate_t_shock(same), RankDeficient);
    }
}

TEST_CASE("dataset generation is deterministic and parseable") {
    const fs::path dir = fs::temp_directory_path() / "shockfusion_burgers_test";
    fs::remove_all(dir);
    burgers::BurgersConfig cfg;
    cfg.nx = 65;
    cfg.nt = 51;
    const std::vector<double> nus = {0.01, 0.02, 0.03, 0.04, 0.05};
    const burgers::DatasetStrides strides{8, 10};
    auto paths = burgers::generate_burgers_dataset(nus, cfg, dir.string(), "manifest.json", strides);
    REQUIRE(paths.size() == 5);
    auto cases = io::load_cases((dir / "manifest.json").string());
    REQUIRE(cases.size() == 5);
    for (const auto& rec : cases) {
        CHECK(rec.condition_kind == io::ConditionKind::viscosity);
        CHECK(rec.zones[0].i_count == 9);   // 0,8,...,64
        CHECK(rec.zones[0].j_count == 6);   // 0,10,...,50
        CHECK(rec.zones[0].require("U").values.size() == 54);
    }
    // byte-identical regeneration
    std::ifstream a(paths[0], std::ios::binary);
    std::string first((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    burgers::generate_burgers_dataset(nus, cfg, dir.string(), "manifest.json", strides);
    std::ifstream b(paths[0], std::ios::binary);
    std::string second((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(first == second);
    fs::remove_all(dir);

    CHECK_THROWS_AS(burgers::generate_burgers_dataset({}, cfg, dir.string()), ConfigError);
}

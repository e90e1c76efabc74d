#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "shockfusion/evaluation.hpp"

using namespace shockfusion;
namespace fs = std::filesystem;

TEST_CASE("relative l2 oracles") {
    CHECK(eval::rel_l2({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(eval::rel_l2({1, 2, 3}, {0, 0, 0}) == 1.0);
    CHECK(eval::rel_l2({3, 4}, {3, 0}) == Catch::Approx(0.8).margin(1e-15));

    SECTION("scale equivariance") {
        const std::vector<double> t = {0.3, -1.2, 2.5}, p = {0.1, -1.0, 2.9};
        std::vector<double> t7 = t, p7 = p;
        for (double& v : t7) v *= 7.0;
        for (double& v : p7) v *= 7.0;
        CHECK(eval::rel_l2(t, p) == Catch::Approx(eval::rel_l2(t7, p7)).epsilon(1e-14));
    }
    SECTION("errors") {
        CHECK_THROWS_AS(eval::rel_l2({0, 0}, {1, 1}), ZeroReference);
        CHECK_THROWS_AS(eval::rel_l2({1, 2}, {1}), ShapeMismatch);
    }
}

TEST_CASE("joint relative l2 equals the stacked-vector computation") {
    const std::vector<double> tu = {1, 2, 3}, tv = {-1, 0.5, 2};
    const std::vector<double> pu = {1.1, 1.9, 3.3}, pv = {-0.8, 0.4, 2.2};
    std::vector<double> t_stack = tu, p_stack = pu;
    t_stack.insert(t_stack.end(), tv.begin(), tv.end());
    p_stack.insert(p_stack.end(), pv.begin(), pv.end());
    CHECK(eval::joint_rel_l2({tu, tv}, {pu, pv}) ==
          Catch::Approx(eval::rel_l2(t_stack, p_stack)).epsilon(1e-14));
    CHECK_THROWS_AS(eval::joint_rel_l2({tu}, {pu, pv}), ShapeMismatch);
}

TEST_CASE("range-normalized errors") {
    std::vector<double> truth, shifted;
    for (int i = 0; i <= 10; ++i) {
        truth.push_back(double(i));        // range 10
        shifted.push_back(double(i) + 1);  // uniform error 1
    }
    SECTION("exact prediction") {
        const auto e = eval::range_normalized_errors(truth, truth);
        CHECK(e.nrmse_pct == 0.0);
        CHECK(e.nmae_pct == 0.0);
    }
    SECTION("uniform unit error against a range of ten is ten percent") {
        const auto e = eval::range_normalized_errors(truth, shifted);
        CHECK(e.nrmse_pct == Catch::Approx(10.0).margin(1e-12));
        CHECK(e.nmae_pct == Catch::Approx(10.0).margin(1e-12));
    }
    SECTION("constant-magnitude alternating errors equalize NRMSE and NMAE") {
        std::vector<double> pred = truth;
        for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += (i % 2 == 0 ? 0.5 : -0.5);
        const auto e = eval::range_normalized_errors(truth, pred);
        CHECK(e.nrmse_pct == Catch::Approx(e.nmae_pct).epsilon(1e-14));
    }
    SECTION("constant reference has no usable range") {
        CHECK_THROWS_AS(eval::range_normalized_errors({2, 2, 2}, {2, 2, 3}), ZeroRange);
        CHECK_THROWS_AS(eval::range_normalized_errors({}, {}), EmptySelection);
    }
}

TEST_CASE("reports: construction and serialization round trip") {
    const std::vector<std::string> names = {"U", "V"};
    const std::vector<std::vector<double>> truth = {{1, 2, 3, 4}, {0.5, -1, 2, 0.25}};
    const std::vector<std::vector<double>> pred = {{1.1, 2, 2.8, 4.2}, {0.5, -0.9, 2.1, 0.2}};
    const auto rep = eval::make_report("shock_aware", 21.0, "case_a", names, truth, pred);
    REQUIRE(rep.channels.size() == 2);
    CHECK(rep.channels[0].name == "U");
    CHECK(rep.channels[0].rel_l2 == Catch::Approx(eval::rel_l2(truth[0], pred[0])).epsilon(1e-14));
    CHECK(rep.joint_rel_l2 == Catch::Approx(eval::joint_rel_l2(truth, pred)).epsilon(1e-14));

    const fs::path dir = fs::temp_directory_path() / "shockfusion_eval_test";
    fs::create_directories(dir);
    eval::save_reports_csv((dir / "m.csv").string(), {rep});
    eval::save_reports_json((dir / "m.json").string(), {rep});

    std::ifstream csv(dir / "m.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "model,case,condition,channel,rel_l2,nrmse_pct,nmae_pct,joint_rel_l2");
    int rows = 0;
    for (std::string line; std::getline(csv, line) && !line.empty();) ++rows;
    CHECK(rows == 2);  // one row per channel

    std::ifstream js(dir / "m.json");
    const auto j = nlohmann::json::parse(js);
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 1);
    CHECK(j[0]["model"] == "shock_aware");
    CHECK(j[0]["condition"].get<double>() == 21.0);
    CHECK(j[0]["channels"]["U"]["rel_l2"].get<double>() ==
          Catch::Approx(rep.channels[0].rel_l2).epsilon(1e-12));
    CHECK(j[0]["joint_rel_l2"].get<double>() == Catch::Approx(rep.joint_rel_l2).epsilon(1e-12));
    fs::remove_all(dir);

    CHECK_THROWS_AS(eval::make_report("m", 0.0, "c", {"U"}, truth, pred), ShapeMismatch);
}

namespace {

io::ZoneGrid profile_zone() {
    io::ZoneGrid z;
    z.i_count = 5;
    z.j_count = 3;
    io::Column X{"X", {}}, Y{"Y", {}}, U{"U", {}};
    // deliberately store x in descending order to exercise output sorting
    for (int j = 0; j < 3; ++j)
        for (int i = 4; i >= 0; --i) {
            X.values.push_back(double(i));
            Y.values.push_back(0.5 * j);
            U.values.push_back(double(i) + 10.0 * j);
        }
    z.columns = {X, Y, U};
    return z;
}

}  // namespace

TEST_CASE("centerline profiles") {
    const io::ZoneGrid z = profile_zone();
    std::vector<double> pred(z.point_count());
    for (int p = 0; p < z.point_count(); ++p) pred[p] = z.require("U").values[p] + 0.1;

    SECTION("empty sigma collapses the band onto the prediction") {
        const auto prof = eval::centerline_profile(z, pred, {}, 0.5);
        REQUIRE(prof.size() == 5);
        for (std::size_t i = 0; i < prof.size(); ++i) {
            CHECK(prof[i].lo == prof[i].pred);
            CHECK(prof[i].hi == prof[i].pred);
            CHECK(prof[i].x == double(i));  // sorted ascending despite input order
            CHECK(prof[i].truth == double(i) + 10.0);
            CHECK(prof[i].pred == Catch::Approx(prof[i].truth + 0.1).margin(1e-12));
        }
    }
    SECTION("sigma widens the band symmetrically") {
        const std::vector<double> sigma(z.point_count(), 0.2);
        const auto prof = eval::centerline_profile(z, pred, sigma, 0.5);
        for (const auto& p : prof) {
            CHECK(p.lo == Catch::Approx(p.pred - 0.4).margin(1e-12));
            CHECK(p.hi == Catch::Approx(p.pred + 0.4).margin(1e-12));
        }
    }
    SECTION("requests far from any grid row are rejected") {
        CHECK_THROWS_AS(eval::centerline_profile(z, pred, {}, 5.0), EmptySelection);
    }
    SECTION("profile agrees with the prediction-file error columns") {
        io::CaseRecord rec;
        rec.zones.push_back(z);
        const auto out = io::parse_tecplot(io::write_prediction_file(rec, pred, {}, 1e-9));
        const auto& zz = out.zones[0];
        const auto& tvals = z.require("U").values;
        for (int p = 0; p < z.point_count(); ++p) {
            const double expect = std::abs(tvals[p] - pred[p]) / std::max(std::abs(tvals[p]), 1e-9);
            CHECK(zz.require("Error_U").values[p] == Catch::Approx(expect).epsilon(1e-12));
            const double e2 = (tvals[p] - pred[p]) * (tvals[p] - pred[p]) /
                              std::max(tvals[p] * tvals[p], 1e-18);
            CHECK(zz.require("ErrorU_L2").values[p] == Catch::Approx(e2).epsilon(1e-12));
        }
    }
}

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <random>

#include "shockfusion/field_io.hpp"

using namespace shockfusion;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kNozzleColumns = {"X",   "Y", "Density", "QX",   "QY",       "T",
                                                 "U",   "V", "Txy",     "Mach", "Pressure", "Knudsen"};

io::ZoneGrid make_zone(int i, int j, const std::vector<std::string>& names, std::mt19937_64& rng) {
    io::ZoneGrid z;
    z.i_count = i;
    z.j_count = j;
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (const auto& name : names) {
        io::Column c;
        c.name = name;
        for (int p = 0; p < i * j; ++p) c.values.push_back(u(rng));
        z.columns.push_back(std::move(c));
    }
    return z;
}

io::CaseRecord golden_case() {
    auto rng = make_rng(2024, "golden");
    io::CaseRecord rec;
    rec.zones.push_back(make_zone(100, 60, kNozzleColumns, rng));
    rec.zones.push_back(make_zone(40, 30, kNozzleColumns, rng));
    return rec;
}

}  // namespace

TEST_CASE("golden two-zone file round-trips exactly") {
    const io::CaseRecord original = golden_case();
    const std::string text = io::write_tecplot(original);
    const io::CaseRecord once = io::parse_tecplot(text);
    REQUIRE(once.zones.size() == 2);
    CHECK(once.zones[0].point_count() == 6000);
    CHECK(once.zones[1].point_count() == 1200);
    const io::CaseRecord twice = io::parse_tecplot(io::write_tecplot(once));
    REQUIRE(twice.zones.size() == once.zones.size());
    for (std::size_t z = 0; z < once.zones.size(); ++z) {
        CHECK(twice.zones[z].i_count == once.zones[z].i_count);
        CHECK(twice.zones[z].j_count == once.zones[z].j_count);
        REQUIRE(twice.zones[z].columns.size() == once.zones[z].columns.size());
        for (std::size_t c = 0; c < once.zones[z].columns.size(); ++c) {
            CHECK(twice.zones[z].columns[c].name == once.zones[z].columns[c].name);
            // bitwise equality via shortest round-trip formatting
            CHECK(twice.zones[z].columns[c].values == once.zones[z].columns[c].values);
            CHECK(once.zones[z].columns[c].values == original.zones[z].columns[c].values);
        }
    }
}

TEST_CASE("parser tolerates dialect variation") {
    const std::string text =
        "TITLE = \"sample\"\n"
        "VARIABLES = \"X\" \"Y\" \"U\"\n"
        "ZONE T=\"first zone\", I=2, J=2, DATAPACKING=POINT\n"
        "0 0 1.5e-2\n"
        "1 0 2\n"
        "0 1 3\n"
        "1 1 -4.25\n";
    const io::CaseRecord rec = io::parse_tecplot(text);
    REQUIRE(rec.zones.size() == 1);
    CHECK(rec.zones[0].i_count == 2);
    CHECK(rec.zones[0].j_count == 2);
    CHECK(rec.zones[0].require("U").values == std::vector<double>{0.015, 2.0, 3.0, -4.25});
}

TEST_CASE("single-point zone parses") {
    const io::CaseRecord rec = io::parse_tecplot("VARIABLES = \"X\" \"T\" \"U\"\nZONE I=1, J=1, F=POINT\n0.5 0.25 -1\n");
    REQUIRE(rec.zones.size() == 1);
    CHECK(rec.zones[0].point_count() == 1);
    CHECK(rec.zones[0].coord1().values[0] == 0.25);
}

TEST_CASE("malformed inputs raise typed errors") {
    CHECK_THROWS_AS(io::parse_tecplot("ZONE I=1, J=1, F=POINT\n1 2\n"), MalformedHeader);
    CHECK_THROWS_AS(io::parse_tecplot("VARIABLES = \"X\" \"U\"\n1 2\n"), MalformedHeader);
    CHECK_THROWS_AS(io::parse_tecplot("VARIABLES = \"X\" \"U\"\nZONE I=2, J=2\n1 2\n"),
                    MalformedHeader);
    // short by one row
    CHECK_THROWS_AS(
        io::parse_tecplot("VARIABLES = \"X\" \"U\"\nZONE I=2, J=2, F=POINT\n1 2\n3 4\n5 6\n"),
        CountMismatch);
    // one extra row
    CHECK_THROWS_AS(io::parse_tecplot("VARIABLES = \"X\" \"U\"\nZONE I=1, J=2, F=POINT\n"
                                      "1 2\n3 4\n5 6\n"),
                    CountMismatch);
    try {
        io::parse_tecplot("VARIABLES = \"X\" \"U\"\nZONE I=1, J=2, F=POINT\n1 2\n3 oops\n");
        FAIL("expected NonNumericToken");
    } catch (const NonNumericToken& e) {
        CHECK(std::string(e.what()).find("line") != std::string::npos);
        CHECK(std::string(e.what()).find("oops") != std::string::npos);
    }
}

TEST_CASE("prediction file: exact hand-built error columns") {
    io::CaseRecord rec;
    io::ZoneGrid z;
    z.i_count = 2;
    z.j_count = 2;
    z.columns = {{"X", {0, 1, 0, 1}},
                 {"Y", {0, 0, 1, 1}},
                 {"U", {2.0, 0.0, -3.0, 1.0}},
                 {"V", {1.0, 2.0, 0.5, -1.0}}};
    rec.zones.push_back(z);

    SECTION("stated formulas, including the epsilon floor") {
        const std::vector<double> pred_u = {1.0, 0.1, -3.0, 1.0};
        const std::vector<double> pred_v = {1.0, 2.0, 0.5, -1.0};
        const io::CaseRecord out = io::parse_tecplot(io::write_prediction_file(rec, pred_u, pred_v, 1e-3));
        const auto& zz = out.zones[0];
        CHECK(zz.require("U").values == pred_u);
        CHECK(zz.require("X").values == z.columns[0].values);  // coordinates untouched
        CHECK(zz.require("Y").values == z.columns[1].values);
        // U_true=2, pred=1 -> 0.5 and 0.25; U_true=0, pred=0.1, eps=1e-3 -> 100 and 1e4
        CHECK(zz.require("Error_U").values[0] == 0.5);
        CHECK(zz.require("ErrorU_L2").values[0] == 0.25);
        CHECK(zz.require("Error_U").values[1] == Catch::Approx(100.0).epsilon(1e-12));
        CHECK(zz.require("ErrorU_L2").values[1] == Catch::Approx(1e4).epsilon(1e-12));
        CHECK(zz.require("Error_U").values[2] == 0.0);
        CHECK(zz.require("Error_V").values == std::vector<double>{0, 0, 0, 0});
        CHECK(zz.require("ErrorV_L2").values == std::vector<double>{0, 0, 0, 0});
    }

    SECTION("exact prediction zeroes every error column") {
        const io::CaseRecord out = io::parse_tecplot(io::write_prediction_file(
            rec, rec.zones[0].require("U").values, rec.zones[0].require("V").values, 1e-9));
        for (const char* col : {"Error_U", "Error_V", "ErrorU_L2", "ErrorV_L2"})
            for (double v : out.zones[0].require(col).values) CHECK(v == 0.0);
    }

    SECTION("length mismatches are rejected") {
        CHECK_THROWS_AS(io::write_prediction_file(rec, {1.0}, {1.0}, 1e-9), LengthMismatch);
    }
}

TEST_CASE("median row spacing") {
    io::ZoneGrid z;
    z.i_count = 4;
    z.j_count = 1;
    z.columns = {{"X", {0, 1, 2, 4}}, {"Y", {0, 0, 0, 0}}, {"U", {0, 0, 0, 0}}};
    CHECK(io::median_row_spacing(z) == 1.0);  // diffs {1,1,2}

    SECTION("uniform grid returns the spacing") {
        io::ZoneGrid g;
        g.i_count = 3;
        g.j_count = 2;
        g.columns = {{"X", {0, 0.5, 1.0, 0, 0.5, 1.0}}, {"Y", {0, 0, 0, 1, 1, 1}},
                     {"U", {0, 0, 0, 0, 0, 0}}};
        CHECK(io::median_row_spacing(g) == 0.5);
    }

    SECTION("invariant to permutation and duplicates") {
        io::ZoneGrid g = z;
        g.i_count = 6;
        g.columns[0].values = {4, 2, 0, 1, 2, 0};  // shuffled with duplicates
        g.columns[1].values = {0, 0, 0, 0, 0, 0};
        g.columns[2].values.resize(6, 0.0);
        CHECK(io::median_row_spacing(g) == 1.0);
    }

    SECTION("degenerate rows") {
        io::ZoneGrid g = z;
        g.columns[0].values = {3, 3, 3, 3};
        CHECK_THROWS_AS(io::median_row_spacing(g), DegenerateGrid);
    }
}

TEST_CASE("manifest round trip with relative paths") {
    const fs::path dir = fs::temp_directory_path() / "shockfusion_manifest_test";
    fs::create_directories(dir);
    const std::string case_path = (dir / "case_a.dat").string();
    io::write_file(case_path,
                   "VARIABLES = \"X\" \"T\" \"U\"\nZONE I=2, J=1, F=POINT\n0 0 1\n1 0 2\n");
    io::save_manifest((dir / "manifest.json").string(),
                      {{case_path, 0.02, io::ConditionKind::viscosity}});
    auto entries = io::load_manifest((dir / "manifest.json").string());
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].condition == 0.02);
    CHECK(entries[0].condition_kind == io::ConditionKind::viscosity);
    auto cases = io::load_cases((dir / "manifest.json").string());
    REQUIRE(cases.size() == 1);
    CHECK(cases[0].condition == 0.02);
    CHECK(cases[0].zones[0].point_count() == 2);

    io::write_file((dir / "bad.json").string(), "not json");
    CHECK_THROWS_AS(io::load_manifest((dir / "bad.json").string()), ConfigError);
    fs::remove_all(dir);
}

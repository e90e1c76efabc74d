#include <catch2/catch_amalgamated.hpp>

#include "shockfusion/common.hpp"

using namespace shockfusion;

TEST_CASE("median handles odd, even and degenerate samples") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK(median({7.0}) == 7.0);
    CHECK_THROWS_AS(median({}), Error);
}

TEST_CASE("percentile uses linear interpolation between order statistics") {
    std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    CHECK(percentile(v, 0.0) == 1.0);
    CHECK(percentile(v, 100.0) == 4.0);
    CHECK(percentile(v, 50.0) == Catch::Approx(2.5).epsilon(1e-15));
    // pos = 0.95 * 3 = 2.85 -> 3 + 0.85 * (4 - 3)
    CHECK(percentile(v, 95.0) == Catch::Approx(3.85).epsilon(1e-15));
    CHECK(percentile({5.0}, 30.0) == 5.0);
}

TEST_CASE("affine fit recovers exact lines and reports residuals") {
    std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
    std::vector<double> y;
    for (double xi : x) y.push_back(2.0 + 3.0 * xi);
    AffineFit f = fit_affine(x, y);
    CHECK(f.a0 == Catch::Approx(2.0).margin(1e-12));
    CHECK(f.a1 == Catch::Approx(3.0).margin(1e-12));
    CHECK(f.residual == Catch::Approx(0.0).margin(1e-12));

    CHECK_THROWS_AS(fit_affine({1.0, 1.0, 1.0}, {0.0, 1.0, 2.0}), RankDeficient);
    CHECK_THROWS_AS(fit_affine({1.0}, {2.0}), RankDeficient);
    CHECK_THROWS_AS(fit_affine({1.0, 2.0}, {1.0}), ShapeMismatch);
}

TEST_CASE("Huber IRLS refit resists a gross outlier") {
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(double(i));
        y.push_back(1.0 + 2.0 * double(i));
    }
    y[10] += 50.0;  // single corrupted response
    AffineFit plain = fit_affine(x, y);
    AffineFit robust = fit_affine_huber(x, y);
    CHECK(std::abs(robust.a1 - 2.0) < std::abs(plain.a1 - 2.0));
    CHECK(robust.a1 == Catch::Approx(2.0).margin(0.05));
    CHECK(robust.a0 == Catch::Approx(1.0).margin(0.5));
}

TEST_CASE("isotonic fit pools adjacent violators") {
    // classic PAVA example: the {3,2} violation pools to 2.5
    auto inc = isotonic_fit({1.0, 3.0, 2.0, 4.0}, true);
    REQUIRE(inc.size() == 4);
    CHECK(inc[0] == 1.0);
    CHECK(inc[1] == Catch::Approx(2.5));
    CHECK(inc[2] == Catch::Approx(2.5));
    CHECK(inc[3] == 4.0);

    auto dec = isotonic_fit({4.0, 2.0, 3.0, 1.0}, false);
    CHECK(dec[0] == 4.0);
    CHECK(dec[1] == Catch::Approx(2.5));
    CHECK(dec[2] == Catch::Approx(2.5));
    CHECK(dec[3] == 1.0);

    // already monotone input is a fixed point
    auto fixed = isotonic_fit({1.0, 2.0, 3.0}, true);
    CHECK(fixed == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("seed substreams are deterministic and name-separated") {
    CHECK(substream_seed(42, "init") == substream_seed(42, "init"));
    CHECK(substream_seed(42, "init") != substream_seed(42, "batches"));
    CHECK(substream_seed(42, "init") != substream_seed(43, "init"));
    auto a = make_rng(7, "stream");
    auto b = make_rng(7, "stream");
    CHECK(a() == b());
}

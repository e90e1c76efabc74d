#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "shockfusion/trainer.hpp"

using namespace shockfusion;

TEST_CASE("weighted Huber: hand-computed values") {
    auto one = [](double pred, double target, double delta) {
        Eigen::MatrixXd p(1, 1), t(1, 1);
        p << pred;
        t << target;
        return train::weighted_huber(p, t, Eigen::VectorXd::Ones(1), delta);
    };
    SECTION("quadratic region: r = 0.25, delta = 0.6") {
        const auto res = one(0.25, 0.0, 0.6);
        CHECK(res.loss == Catch::Approx(0.03125).margin(1e-15));
        CHECK(res.grad(0, 0) == Catch::Approx(0.25).margin(1e-15));
    }
    SECTION("linear region: r = 2, delta = 0.6") {
        const auto res = one(2.0, 0.0, 0.6);
        CHECK(res.loss == Catch::Approx(1.02).margin(1e-15));
        CHECK(res.grad(0, 0) == Catch::Approx(0.6).margin(1e-15));
    }
    SECTION("exact prediction gives zero loss and gradient") {
        const auto res = one(1.7, 1.7, 0.6);
        CHECK(res.loss == 0.0);
        CHECK(res.grad(0, 0) == 0.0);
    }
    SECTION("C1 continuity at |r| = delta") {
        const double d = 0.6, eps = 1e-7;
        const auto lo = one(d - eps, 0.0, d);
        const auto hi = one(d + eps, 0.0, d);
        CHECK(std::abs(hi.loss - lo.loss) < 1e-6);
        CHECK(std::abs(hi.grad(0, 0) - lo.grad(0, 0)) < 1e-6);
    }
}

TEST_CASE("weighted Huber: reduction properties") {
    Eigen::MatrixXd pred(3, 2), target(3, 2);
    pred << 0.1, 2.0, -0.4, 0.0, 1.0, -3.0;
    target << 0.0, 0.0, 0.0, 0.5, 1.2, 0.0;
    Eigen::VectorXd w(3);
    w << 1.0, 2.5, 0.5;

    SECTION("scaling all weights leaves loss and gradient unchanged") {
        const auto a = train::weighted_huber(pred, target, w, 0.6);
        const auto b = train::weighted_huber(pred, target, 7.0 * w, 0.6);
        CHECK(a.loss == Catch::Approx(b.loss).epsilon(1e-12));
        CHECK((a.grad - b.grad).lpNorm<Eigen::Infinity>() < 1e-12);
    }
    SECTION("huge delta degrades to the weighted mean of 0.5 r^2") {
        const auto res = train::weighted_huber(pred, target, w, 1e6);
        double expect = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 2; ++c) {
                const double r = pred(i, c) - target(i, c);
                expect += w[i] * 0.5 * r * r;
            }
        expect /= w.sum();
        CHECK(res.loss == Catch::Approx(expect).margin(1e-9));
    }
    SECTION("shape and parameter validation") {
        CHECK_THROWS_AS(train::weighted_huber(pred, target.topRows(2), w, 0.6), ShapeMismatch);
        CHECK_THROWS_AS(train::weighted_huber(pred, target, w.head(2), 0.6), ShapeMismatch);
        CHECK_THROWS_AS(train::weighted_huber(pred, target, w, 0.0), ConfigError);
        CHECK_THROWS_AS(train::weighted_huber(pred, target, Eigen::VectorXd::Zero(3), 0.6),
                        ConfigError);
    }
}

TEST_CASE("group split is condition-disjoint") {
    // six distinct conditions, several samples per condition
    std::vector<double> conditions;
    for (double c : {15.0, 18.0, 21.0, 24.0, 27.0, 33.0})
        for (int rep = 0; rep < 3; ++rep) conditions.push_back(c);

    SECTION("0.2 of six groups rounds to exactly one validation group") {
        const auto [tr, va] = train::group_split(conditions, 0.2, 42);
        CHECK(va.size() == 3);  // one group, three samples
        CHECK(tr.size() + va.size() == conditions.size());
    }
    SECTION("1000 randomized trials never leak a condition across the split") {
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            const auto [tr, va] = train::group_split(conditions, 0.35, seed);
            std::set<double> train_conds, val_conds;
            for (auto i : tr) train_conds.insert(conditions[i]);
            for (auto i : va) val_conds.insert(conditions[i]);
            REQUIRE(!train_conds.empty());
            REQUIRE(!val_conds.empty());
            for (double c : val_conds) REQUIRE(train_conds.count(c) == 0);
            REQUIRE(tr.size() + va.size() == conditions.size());
        }
    }
    SECTION("deterministic for a fixed seed") {
        CHECK(train::group_split(conditions, 0.3, 7) == train::group_split(conditions, 0.3, 7));
    }
    SECTION("degenerate inputs") {
        CHECK_THROWS_AS(train::group_split({1.0, 1.0, 1.0}, 0.2, 0), TooFewGroups);
        CHECK_THROWS_AS(train::group_split(conditions, 0.0, 0), ConfigError);
        CHECK_THROWS_AS(train::group_split(conditions, 1.0, 0), ConfigError);
    }
}

TEST_CASE("batch assembly covers every point exactly once") {
    auto rng = make_rng(5, "batches/test");
    const auto batches = train::assemble_batches(6000, 512, rng);
    REQUIRE(batches.size() == 12);
    for (std::size_t b = 0; b + 1 < batches.size(); ++b) CHECK(batches[b].size() == 512);
    CHECK(batches.back().size() == 6000 - 11 * 512);
    std::vector<char> seen(6000, 0);
    for (const auto& b : batches)
        for (int i : b) {
            REQUIRE(seen[i] == 0);
            seen[i] = 1;
        }
    auto rng2 = make_rng(5, "batches/test");
    CHECK(train::assemble_batches(6000, 512, rng2) == batches);
}

TEST_CASE("phase weights blend the static components") {
    train::SampleSet s;
    s.cond = Eigen::MatrixXd::Zero(3, 1);
    s.trunk = Eigen::MatrixXd::Zero(3, 2);
    s.target = Eigen::MatrixXd::Zero(3, 1);
    s.w_d = Eigen::VectorXd::Constant(3, 2.0);
    s.w_g = Eigen::VectorXd::Constant(3, 1.4);
    s.w_rel = Eigen::VectorXd::Constant(3, 1.5);
    const Eigen::VectorXd w = s.phase_weights(0.7);
    CHECK(w[0] == Catch::Approx((0.7 * 2.0 + 0.3 * 1.4) * 1.5).margin(1e-15));
    // lambda = 1 reduces to the distance component alone
    CHECK(s.phase_weights(1.0)[1] == Catch::Approx(2.0 * 1.5).margin(1e-15));
    // lambda = 0 reduces to the gradient component alone
    CHECK(s.phase_weights(0.0)[2] == Catch::Approx(1.4 * 1.5).margin(1e-15));
}

namespace {

train::SampleSet make_synthetic_set(int n, std::uint64_t seed) {
    auto rng = make_rng(seed, "synthetic");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    train::SampleSet s;
    s.cond.resize(n, 1);
    s.trunk.resize(n, 2);
    s.target.resize(n, 1);
    for (int i = 0; i < n; ++i) {
        const double c = u(rng), a = u(rng), b = u(rng);
        s.cond(i, 0) = c;
        s.trunk(i, 0) = a;
        s.trunk(i, 1) = b;
        s.target(i, 0) = std::sin(2.0 * a) * c + 0.3 * b;
    }
    s.w_d = Eigen::VectorXd::Ones(n);
    s.w_g = Eigen::VectorXd::Ones(n);
    s.w_rel = Eigen::VectorXd::Ones(n);
    return s;
}

}  // namespace

TEST_CASE("a single small step decreases the loss on its own sample") {
    nn::FusionModel model(nn::make_fusion_spec(2, 1, 0.0, 8, {8}, {8}));
    model.init_parameters(13);
    const auto s = make_synthetic_set(1, 1);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);

    nn::ForwardCache cache;
    const Eigen::MatrixXd pred = model.forward(s.cond, s.trunk, nn::Mode::train, nullptr, &cache);
    const auto hub = train::weighted_huber(pred, s.target, w, 1.0);
    REQUIRE(hub.loss > 0.0);
    const Eigen::VectorXd grads = model.backward(cache, hub.grad);
    nn::AdamW opt;
    opt.lr = 1e-4;
    opt.weight_decay = 0.0;
    opt.step(model.params, grads);
    const Eigen::MatrixXd pred2 = model.forward(s.cond, s.trunk, nn::Mode::infer);
    const double after = train::weighted_huber(pred2, s.target, w, 1.0).loss;
    CHECK(after < hub.loss + 1e-12);
    CHECK(after < hub.loss);
}

TEST_CASE("curriculum training on a tiny synthetic dataset") {
    nn::FusionModel model(nn::make_fusion_spec(2, 1, 0.0, 16, {16}, {16}));
    model.init_parameters(29);
    const auto tr = make_synthetic_set(256, 2);
    const auto va = make_synthetic_set(64, 3);

    train::TrainConfig cfg;
    cfg.phases = {{"warmup", 1.0, 0.7, 30, 1.0}, {"focus", 0.5, 0.4, 30, 0.25}};
    cfg.batch_size = 64;
    cfg.lr = 3e-3;
    cfg.noise_std = 0.0;
    cfg.seed = 11;

    const double loss0 = train::weighted_huber(model.forward(va.cond, va.trunk, nn::Mode::infer),
                                               va.target, va.phase_weights(0.4), 0.5)
                             .loss;
    const auto history = train::train_curriculum(model, tr, va, cfg);

    REQUIRE(!history.epochs.empty());
    std::set<std::string> phases;
    for (const auto& e : history.epochs) {
        phases.insert(e.phase);
        CHECK(e.lr > 0.0);
        CHECK(std::isfinite(e.train_loss));
        CHECK(std::isfinite(e.val_loss));
    }
    CHECK(phases == std::set<std::string>{"warmup", "focus"});
    CHECK(history.best_val < loss0);  // training actually helps
    // global epoch indices are consecutive from zero
    for (std::size_t i = 0; i < history.epochs.size(); ++i)
        CHECK(history.epochs[i].epoch == int(i));

    SECTION("history CSV round-trips the header") {
        const std::string path =
            (std::filesystem::temp_directory_path() / "shockfusion_history.csv").string();
        history.save_csv(path);
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "epoch,phase,train_loss,train_loss_clean,val_loss,lr");
        std::filesystem::remove(path);
    }
}

TEST_CASE("early stopping caps the epoch count") {
    nn::FusionModel model(nn::make_fusion_spec(2, 1, 0.0, 8, {8}, {8}));
    model.init_parameters(31);
    const auto tr = make_synthetic_set(64, 4);
    const auto va = make_synthetic_set(32, 5);

    train::TrainConfig cfg;
    cfg.phases = {{"warmup", 1.0, 0.7, 500, 1.0}};
    cfg.batch_size = 64;
    cfg.lr = 1e-9;  // effectively frozen: validation can never improve meaningfully
    cfg.noise_std = 0.0;
    cfg.early_stopping.patience = 3;
    cfg.early_stopping.min_delta = 1e-2;
    cfg.seed = 12;

    const auto history = train::train_curriculum(model, tr, va, cfg);
    CHECK(history.epochs.size() <= std::size_t(2 + cfg.early_stopping.patience));
}

TEST_CASE("empty or misaligned sample sets are rejected") {
    train::SampleSet s;
    s.cond = Eigen::MatrixXd::Zero(0, 1);
    s.trunk = Eigen::MatrixXd::Zero(0, 2);
    s.target = Eigen::MatrixXd::Zero(0, 1);
    s.w_d = s.w_g = s.w_rel = Eigen::VectorXd::Zero(0);
    CHECK_THROWS_AS(s.validate(), EmptySelection);
    s = make_synthetic_set(4, 9);
    s.w_g = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(s.validate(), ShapeMismatch);
}

#pragma once

// End-to-end orchestration: variant definitions (the shock-aware model, the
// two baselines and the ablation family), dataset preparation, training,
// checkpoint evaluation, and the compare/ablation suites.

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "shockfusion/checkpoint.hpp"
#include "shockfusion/evaluation.hpp"
#include "shockfusion/field_io.hpp"
#include "shockfusion/neural.hpp"
#include "shockfusion/shock_features.hpp"
#include "shockfusion/trainer.hpp"

namespace shockfusion::pipeline {

enum class Variant {
    shock_aware,
    fusion_orig,
    vanilla,
    baseline_end_to_end,
    no_gradient_weighting,
    no_relative_weighting,
    simpler_architecture,
    external_calibration,
};

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::shock_aware: return "shock_aware";
        case Variant::fusion_orig: return "fusion_orig";
        case Variant::vanilla: return "vanilla";
        case Variant::baseline_end_to_end: return "baseline_end_to_end";
        case Variant::no_gradient_weighting: return "no_gradient_weighting";
        case Variant::no_relative_weighting: return "no_relative_weighting";
        case Variant::simpler_architecture: return "simpler_architecture";
        case Variant::external_calibration: return "external_calibration";
    }
    throw ConfigError("unknown variant");
}

inline Variant variant_from_string(const std::string& s) {
    for (Variant v : {Variant::shock_aware, Variant::fusion_orig, Variant::vanilla,
                      Variant::baseline_end_to_end, Variant::no_gradient_weighting,
                      Variant::no_relative_weighting, Variant::simpler_architecture,
                      Variant::external_calibration})
        if (to_string(v) == s) return v;
    if (s == "fusion") return Variant::fusion_orig;  // CLI shorthand
    throw ConfigError("unknown variant: " + s);
}

inline const std::vector<Variant>& ablation_variants() {
    static const std::vector<Variant> v = {
        Variant::baseline_end_to_end, Variant::no_gradient_weighting,
        Variant::no_relative_weighting, Variant::simpler_architecture,
        Variant::external_calibration};
    return v;
}

struct PipelineConfig {
    double dropout = 0.10;
    int fusion_dim = 128;
    std::vector<int> widths = {64, 96};
    std::vector<int> decoder_widths = {128};
    features::WeightParams weights;
    features::FeatureOptions feature_opts;  // shock_axis auto-set per condition kind
    train::TrainConfig train;
    bool oversample = false;
    double oversample_threshold = 0.0;  // on the W_d excess over 1, fraction of alpha
    double jitter_frac = 0.25;          // jitter amplitude as a fraction of dx
    bool robust_calibration = false;
};

// ---------------------------------------------------------------------------
// Calibration over loaded cases
// ---------------------------------------------------------------------------

/// Shock-station calibration generalized over the shock axis: axis 0 finds
/// the streamwise station of the row-median gradient peak; axis 1 finds the
/// coordinate (time) of the row holding the global gradient maximum.
inline features::ShockCalibration calibrate_cases(const std::vector<io::CaseRecord>& cases,
                                                  int shock_axis, bool robust = false) {
    if (shock_axis == 0) return features::calibrate_shock_station(cases, robust);
    if (cases.size() < 2) throw RankDeficient("calibration needs at least two cases");
    std::vector<double> conds, stations;
    for (const auto& rec : cases) {
        double best_g = -1.0, best_t = 0.0;
        for (const auto& zone : rec.zones) {
            const auto g = features::detail::streamwise_gradient(zone);
            const auto& t = zone.coord1().values;
            for (int j = 0; j < zone.j_count; ++j) {
                double row_max = 0.0;
                for (int i = 0; i < zone.i_count; ++i)
                    row_max = std::max(row_max, g[std::size_t(j) * zone.i_count + i]);
                if (row_max > best_g * (1.0 + 1e-15)) {
                    best_g = row_max;
                    best_t = t[std::size_t(j) * zone.i_count];
                }
            }
        }
        if (best_g <= 1e-12)
            throw NoGradientSignal("all gradients below tolerance for case '" + rec.source_path +
                                   "'");
        conds.push_back(rec.condition);
        stations.push_back(best_t);
    }
    AffineFit fit = robust ? fit_affine_huber(conds, stations) : fit_affine(conds, stations);
    features::ShockCalibration cal;
    cal.a0 = fit.a0;
    cal.a1 = fit.a1;
    cal.residual = fit.residual;
    for (std::size_t i = 0; i < conds.size(); ++i) cal.per_case.emplace_back(conds[i], stations[i]);
    return cal;
}

inline int default_shock_axis(io::ConditionKind kind) {
    return kind == io::ConditionKind::viscosity ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Data preparation
// ---------------------------------------------------------------------------

struct PreparedCase {
    double condition = 0.0;
    std::string label;
    Eigen::MatrixXd cond;    // raw branch inputs, one row per point
    Eigen::MatrixXd trunk;   // raw trunk features
    Eigen::MatrixXd target;  // raw targets
    Eigen::VectorXd w_d, w_g, w_rel;
};

struct Prepared {
    std::vector<PreparedCase> cases;
    std::vector<std::string> channels;
    features::ShockCalibration calibration;
    features::WeightParams weights;
    features::FeatureOptions opts;
    bool use_shock_features = true;
    bool condition_includes_station = false;
    io::ConditionKind condition_kind = io::ConditionKind::back_pressure;
};

namespace detail {

inline bool variant_uses_shock_features(Variant v) {
    return v != Variant::fusion_orig && v != Variant::vanilla &&
           v != Variant::baseline_end_to_end;
}

inline std::vector<std::string> detect_channels(const io::CaseRecord& rec) {
    std::vector<std::string> ch = {"U"};
    if (rec.zones.front().find("V")) ch.push_back("V");
    return ch;
}

// Raw branch/trunk inputs for one case under a checkpoint-style setup.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> case_inputs(
    const io::CaseRecord& rec, const features::ShockCalibration& calib,
    const features::WeightParams& weights, const features::FeatureOptions& opts,
    bool use_shock_features, bool condition_includes_station) {
    const int total = rec.total_points();
    const int cond_width = condition_includes_station ? 2 : 1;
    Eigen::MatrixXd cond(total, cond_width);
    cond.col(0).setConstant(rec.condition);
    if (condition_includes_station) cond.col(1).setConstant(calib.station(rec.condition));

    int trunk_width = 2;
    if (use_shock_features)
        trunk_width = features::kBaseFeatureCount + (opts.include_wall_distance ? 1 : 0);
    Eigen::MatrixXd trunk(total, trunk_width);
    int row = 0;
    for (const auto& zone : rec.zones) {
        if (use_shock_features) {
            const auto feats =
                features::build_trunk_features(zone, rec.condition, calib, weights, opts);
            for (int p = 0; p < zone.point_count(); ++p)
                for (int f = 0; f < trunk_width; ++f)
                    trunk(row + p, f) = feats[std::size_t(p) * trunk_width + f];
        } else {
            for (int p = 0; p < zone.point_count(); ++p) {
                trunk(row + p, 0) = zone.coord0().values[p];
                trunk(row + p, 1) = zone.coord1().values[p];
            }
        }
        row += zone.point_count();
    }
    return {std::move(cond), std::move(trunk)};
}

inline Eigen::MatrixXd case_targets(const io::CaseRecord& rec,
                                    const std::vector<std::string>& channels) {
    Eigen::MatrixXd target(rec.total_points(), Eigen::Index(channels.size()));
    int row = 0;
    for (const auto& zone : rec.zones) {
        for (std::size_t c = 0; c < channels.size(); ++c) {
            const auto& col = zone.require(channels[c]).values;
            for (int p = 0; p < zone.point_count(); ++p) target(row + p, Eigen::Index(c)) = col[p];
        }
        row += zone.point_count();
    }
    return target;
}

}  // namespace detail

/// Builds the per-case inputs, targets and weight components for a variant.
/// Shock-feature variants calibrate on the given cases (training set).
inline Prepared prepare_cases(const std::vector<io::CaseRecord>& cases, Variant variant,
                              const PipelineConfig& cfg) {
    if (cases.empty()) throw EmptySelection("no cases to prepare");
    Prepared prep;
    prep.condition_kind = cases.front().condition_kind;
    prep.channels = detail::detect_channels(cases.front());
    prep.use_shock_features = detail::variant_uses_shock_features(variant);
    prep.condition_includes_station = variant == Variant::external_calibration;
    prep.weights = cfg.weights;
    if (variant == Variant::no_gradient_weighting) prep.weights.beta = 0.0;
    if (variant == Variant::no_relative_weighting) prep.weights.use_rel_weight = false;
    prep.opts = cfg.feature_opts;
    prep.opts.shock_axis = default_shock_axis(prep.condition_kind);
    prep.opts.include_wall_distance = prep.condition_kind == io::ConditionKind::throat_ratio;
    // viscosity-conditioned cases use the tanh form of the indicator
    if (prep.condition_kind == io::ConditionKind::viscosity) prep.opts.tanh_indicator = true;

    if (prep.use_shock_features)
        prep.calibration = calibrate_cases(cases, prep.opts.shock_axis, cfg.robust_calibration);

    for (const auto& rec : cases) {
        PreparedCase pc;
        pc.condition = rec.condition;
        pc.label = std::filesystem::path(rec.source_path).filename().string();
        if (pc.label.empty()) pc.label = "case_" + io::format_double(rec.condition);
        auto [cond, trunk] =
            detail::case_inputs(rec, prep.calibration, prep.weights, prep.opts,
                                prep.use_shock_features, prep.condition_includes_station);
        pc.cond = std::move(cond);
        pc.trunk = std::move(trunk);
        pc.target = detail::case_targets(rec, prep.channels);

        const int total = rec.total_points();
        pc.w_d = Eigen::VectorXd::Ones(total);
        pc.w_g = Eigen::VectorXd::Ones(total);
        pc.w_rel = Eigen::VectorXd::Ones(total);
        int row = 0;
        for (const auto& zone : rec.zones) {
            const double dx = io::median_axis_spacing(zone, prep.opts.shock_axis, prep.opts.dx_min);
            const auto& c0 = zone.coord0().values;
            const auto& c1 = zone.coord1().values;
            if (prep.use_shock_features) {
                for (int p = 0; p < zone.point_count(); ++p) {
                    const double sc = prep.opts.shock_axis == 0 ? c0[p] : c1[p];
                    pc.w_d[row + p] = features::distance_weight(sc, rec.condition,
                                                                prep.calibration,
                                                                prep.weights.alpha, dx);
                }
            }
            const auto wg = features::gradient_weight_field(zone, prep.weights.beta,
                                                            prep.weights.q_clip);
            const auto wr = features::relative_weight_field(zone, prep.weights.gamma,
                                                            prep.weights.eps_rel,
                                                            prep.weights.use_rel_weight);
            for (int p = 0; p < zone.point_count(); ++p) {
                pc.w_g[row + p] = wg[p];
                pc.w_rel[row + p] = wr[p];
            }
            row += zone.point_count();
        }
        prep.cases.push_back(std::move(pc));
    }
    return prep;
}

/// Duplicates shock-near points (W_d excess above threshold·alpha) with a
/// uniform jitter of ±jitter_frac·dx on the shock-axis coordinate, rebuilding
/// the feature rows for the jittered points.
inline void oversample_case(PreparedCase& pc, const Prepared& prep, double dx, double threshold,
                            double jitter_frac, std::mt19937_64& rng) {
    if (!prep.use_shock_features) return;
    const int width = int(pc.trunk.cols());
    std::vector<int> picked;
    for (int p = 0; p < pc.trunk.rows(); ++p)
        if (pc.w_d[p] - 1.0 > threshold * prep.weights.alpha) picked.push_back(p);
    if (picked.empty()) return;
    std::uniform_real_distribution<double> jit(-jitter_frac * dx, jitter_frac * dx);
    const int n0 = int(pc.trunk.rows());
    const int n1 = n0 + int(picked.size());
    auto grow = [&](Eigen::MatrixXd& m) { m.conservativeResize(n1, Eigen::NoChange); };
    grow(pc.cond);
    grow(pc.trunk);
    grow(pc.target);
    pc.w_d.conservativeResize(n1);
    pc.w_g.conservativeResize(n1);
    pc.w_rel.conservativeResize(n1);
    for (std::size_t k = 0; k < picked.size(); ++k) {
        const int src = picked[k];
        const int dst = n0 + int(k);
        pc.cond.row(dst) = pc.cond.row(src);
        pc.target.row(dst) = pc.target.row(src);
        pc.w_d[dst] = pc.w_d[src];
        pc.w_g[dst] = pc.w_g[src];
        pc.w_rel[dst] = pc.w_rel[src];
        double c0 = pc.trunk(src, 0), c1 = pc.trunk(src, 1);
        (prep.opts.shock_axis == 0 ? c0 : c1) += jit(rng);
        std::vector<double> rowbuf(static_cast<std::size_t>(width), 0.0);
        features::feature_row(c0, c1, prep.opts.shock_axis == 0 ? c0 : c1, pc.condition,
                              prep.calibration, prep.weights, prep.opts, dx, rowbuf.data());
        if (width > features::kBaseFeatureCount)
            rowbuf[features::kBaseFeatureCount] = pc.trunk(src, features::kBaseFeatureCount);
        for (int f = 0; f < width; ++f) pc.trunk(dst, f) = rowbuf[f];
    }
}

// ---------------------------------------------------------------------------
// Model construction and training
// ---------------------------------------------------------------------------

inline nn::ArchitectureSpec make_variant_spec(Variant variant, int cond_width, int trunk_width,
                                              int out_dim, const PipelineConfig& cfg) {
    int fusion_dim = cfg.fusion_dim;
    std::vector<int> widths = cfg.widths;
    std::vector<int> decoder_widths = cfg.decoder_widths;
    if (variant == Variant::simpler_architecture) {
        fusion_dim /= 2;
        for (int& w : decoder_widths) w /= 2;
        if (!decoder_widths.empty()) decoder_widths.pop_back();  // one fewer decoder block
    }
    nn::ArchitectureSpec spec =
        variant == Variant::vanilla
            ? nn::make_vanilla_spec(trunk_width, out_dim, cfg.dropout, fusion_dim, widths)
            : nn::make_fusion_spec(trunk_width, out_dim, cfg.dropout, fusion_dim, widths,
                                   decoder_widths);
    // branch input width differs from the default single-scalar condition
    if (cond_width != spec.branch_blocks.front().in_dim)
        spec.branch_blocks.front().in_dim = cond_width;
    spec.validate();
    return spec;
}

struct TrainedVariant {
    ckpt::Checkpoint checkpoint;
    train::TrainHistory history;
    double val_fraction_used = 0.0;
};

/// Full training of one variant on the given training cases. The root seed
/// fans out to init/split/batch substreams; identical seeds reproduce runs.
inline TrainedVariant train_variant(const std::vector<io::CaseRecord>& train_cases,
                                    Variant variant, PipelineConfig cfg) {
    Prepared prep = prepare_cases(train_cases, variant, cfg);
    const std::uint64_t seed = cfg.train.seed;

    std::vector<double> conditions;
    for (const auto& pc : prep.cases) conditions.push_back(pc.condition);
    auto [train_idx, val_idx] = train::group_split(conditions, cfg.train.val_fraction, seed);
    for (auto ti : train_idx)
        for (auto vi : val_idx)
            if (conditions[ti] == conditions[vi])
                throw TooFewGroups("train/val condition sets overlap");

    if (cfg.oversample) {
        auto rng = make_rng(seed, "oversample");
        for (auto i : train_idx) {
            // representative spacing from the first zone of the source case
            const double dx = io::median_axis_spacing(train_cases[i].zones.front(),
                                                      prep.opts.shock_axis, prep.opts.dx_min);
            oversample_case(prep.cases[i], prep, dx, cfg.oversample_threshold, cfg.jitter_frac,
                            rng);
        }
    }

    auto stack_rows = [&](const std::vector<std::size_t>& idx, auto getter) {
        Eigen::Index total = 0;
        for (auto i : idx) total += getter(prep.cases[i]).rows();
        Eigen::MatrixXd out(total, getter(prep.cases[idx.front()]).cols());
        Eigen::Index row = 0;
        for (auto i : idx) {
            const auto& m = getter(prep.cases[i]);
            out.middleRows(row, m.rows()) = m;
            row += m.rows();
        }
        return out;
    };
    auto stack_vec = [&](const std::vector<std::size_t>& idx, auto getter) {
        Eigen::Index total = 0;
        for (auto i : idx) total += getter(prep.cases[i]).size();
        Eigen::VectorXd out(total);
        Eigen::Index row = 0;
        for (auto i : idx) {
            const auto& v = getter(prep.cases[i]);
            out.segment(row, v.size()) = v;
            row += v.size();
        }
        return out;
    };
    auto build_set = [&](const std::vector<std::size_t>& idx) {
        train::SampleSet s;
        s.cond = stack_rows(idx, [](const PreparedCase& c) -> const Eigen::MatrixXd& { return c.cond; });
        s.trunk = stack_rows(idx, [](const PreparedCase& c) -> const Eigen::MatrixXd& { return c.trunk; });
        s.target = stack_rows(idx, [](const PreparedCase& c) -> const Eigen::MatrixXd& { return c.target; });
        s.w_d = stack_vec(idx, [](const PreparedCase& c) -> const Eigen::VectorXd& { return c.w_d; });
        s.w_g = stack_vec(idx, [](const PreparedCase& c) -> const Eigen::VectorXd& { return c.w_g; });
        s.w_rel = stack_vec(idx, [](const PreparedCase& c) -> const Eigen::VectorXd& { return c.w_rel; });
        return s;
    };
    train::SampleSet train_set = build_set(train_idx);
    train::SampleSet val_set = build_set(val_idx);

    // standardize with training-split statistics only
    nn::Standardizer cond_std = nn::Standardizer::fit(train_set.cond);
    nn::Standardizer trunk_std = nn::Standardizer::fit(train_set.trunk);
    nn::Standardizer out_std = nn::Standardizer::fit(train_set.target);
    for (auto* s : {&train_set, &val_set}) {
        s->cond = cond_std.apply(s->cond);
        s->trunk = trunk_std.apply(s->trunk);
        s->target = out_std.apply(s->target);
    }

    nn::ArchitectureSpec spec = make_variant_spec(variant, int(train_set.cond.cols()),
                                                  int(train_set.trunk.cols()),
                                                  int(train_set.target.cols()), cfg);
    nn::FusionModel model(spec);
    model.init_parameters(substream_seed(seed, "init/" + to_string(variant)));
    model.cond_std = cond_std;
    model.trunk_std = trunk_std;
    model.out_std = out_std;

    // variants without a calibrated station cannot mix in the distance weight
    if (!prep.use_shock_features)
        for (auto& phase : cfg.train.phases) phase.lambda = 0.0;

    TrainedVariant out;
    out.history = train::train_curriculum(model, train_set, val_set, cfg.train);
    out.val_fraction_used = double(val_idx.size()) / double(prep.cases.size());
    out.checkpoint.model = std::move(model);
    out.checkpoint.calibration = prep.calibration;
    out.checkpoint.weights = prep.weights;
    out.checkpoint.feature_opts = prep.opts;
    out.checkpoint.variant_tag = to_string(variant);
    out.checkpoint.condition_kind = prep.condition_kind;
    out.checkpoint.channel_names = prep.channels;
    out.checkpoint.use_shock_features = prep.use_shock_features;
    out.checkpoint.condition_includes_station = prep.condition_includes_station;
    return out;
}

// ---------------------------------------------------------------------------
// Prediction and evaluation with a checkpoint
// ---------------------------------------------------------------------------

inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> checkpoint_inputs(const ckpt::Checkpoint& c,
                                                                     const io::CaseRecord& rec) {
    return detail::case_inputs(rec, c.calibration, c.weights, c.feature_opts,
                               c.use_shock_features, c.condition_includes_station);
}

/// Physical-unit predictions, one column per output channel.
inline Eigen::MatrixXd predict_case(const ckpt::Checkpoint& c, const io::CaseRecord& rec) {
    auto [cond, trunk] = checkpoint_inputs(c, rec);
    return c.model.predict(cond, trunk);
}

inline eval::MetricsReport evaluate_case(const ckpt::Checkpoint& c, const io::CaseRecord& rec,
                                         const std::string& model_tag = "") {
    const Eigen::MatrixXd pred = predict_case(c, rec);
    const Eigen::MatrixXd truth = detail::case_targets(rec, c.channel_names);
    std::vector<std::vector<double>> truth_ch, pred_ch;
    for (Eigen::Index ch = 0; ch < truth.cols(); ++ch) {
        truth_ch.emplace_back(truth.col(ch).data(), truth.col(ch).data() + truth.rows());
        pred_ch.emplace_back(pred.col(ch).data(), pred.col(ch).data() + pred.rows());
    }
    std::string label = std::filesystem::path(rec.source_path).filename().string();
    if (label.empty()) label = "case_" + io::format_double(rec.condition);
    return eval::make_report(model_tag.empty() ? c.variant_tag : model_tag, rec.condition, label,
                             c.channel_names, truth_ch, pred_ch);
}

// ---------------------------------------------------------------------------
// Compare and ablation suites
// ---------------------------------------------------------------------------

struct CompareResult {
    std::vector<eval::MetricsReport> reports;          // per (variant, seed, case)
    std::map<std::string, double> median_joint;        // variant -> median joint relL2
    std::map<std::string, double> improvement_pct;     // vs vanilla, positive = better
};

/// Trains {shock_aware, fusion_orig, vanilla} under identical budgets and
/// seeds, evaluates every test case, reports medians and the relative
/// improvement of each variant over the vanilla baseline.
inline CompareResult compare_models(const std::vector<io::CaseRecord>& train_cases,
                                    const std::vector<io::CaseRecord>& test_cases,
                                    const PipelineConfig& cfg,
                                    const std::vector<std::uint64_t>& seeds) {
    if (test_cases.empty()) throw EmptySelection("compare needs at least one test case");
    CompareResult res;
    const std::vector<Variant> variants = {Variant::shock_aware, Variant::fusion_orig,
                                           Variant::vanilla};
    std::map<std::string, std::vector<double>> joints;
    std::size_t expected_points = 0;
    for (const auto& rec : test_cases) expected_points += std::size_t(rec.total_points());
    for (Variant v : variants) {
        for (std::uint64_t seed : seeds) {
            PipelineConfig run_cfg = cfg;
            run_cfg.train.seed = substream_seed(seed, "compare/" + to_string(v));
            TrainedVariant trained = train_variant(train_cases, v, run_cfg);
            std::size_t points = 0;
            for (const auto& rec : test_cases) {
                eval::MetricsReport rep = evaluate_case(
                    trained.checkpoint, rec, to_string(v) + "/seed" + std::to_string(seed));
                points += std::size_t(rec.total_points());
                joints[to_string(v)].push_back(rep.joint_rel_l2);
                res.reports.push_back(std::move(rep));
            }
            if (points != expected_points)
                throw ShapeMismatch("variants evaluated on differing test point counts");
        }
    }
    for (auto& [tag, vals] : joints) res.median_joint[tag] = median(vals);
    const double vanilla_med = res.median_joint.at("vanilla");
    for (const auto& [tag, med] : res.median_joint)
        res.improvement_pct[tag] = (vanilla_med - med) / vanilla_med * 100.0;
    return res;
}

/// Runs the five ablation variants against the interpolation test case and
/// returns one NRMSE/NMAE report per variant.
inline std::vector<eval::MetricsReport> run_ablation(const std::vector<io::CaseRecord>& train_cases,
                                                     const io::CaseRecord& interpolation_case,
                                                     const PipelineConfig& cfg) {
    std::vector<eval::MetricsReport> reports;
    for (Variant v : ablation_variants()) {
        PipelineConfig run_cfg = cfg;
        run_cfg.train.seed = substream_seed(cfg.train.seed, "ablate/" + to_string(v));
        TrainedVariant trained = train_variant(train_cases, v, run_cfg);
        reports.push_back(evaluate_case(trained.checkpoint, interpolation_case, to_string(v)));
    }
    return reports;
}

}  // namespace shockfusion::pipeline

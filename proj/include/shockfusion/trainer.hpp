#pragma once

// Training loop: condition-grouped splitting, weighted Huber objective, and
// the two-phase curriculum (warmup then focus) with plateau LR reduction,
// early stopping, and an optional cosine fine-tune tail.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "shockfusion/common.hpp"
#include "shockfusion/field_io.hpp"
#include "shockfusion/neural.hpp"

namespace shockfusion::train {

// ---------------------------------------------------------------------------
// Split and batching
// ---------------------------------------------------------------------------

/// Condition-disjoint split at group granularity. Validation takes
/// round-half-up(val_fraction * groups) groups, at least one on each side.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> group_split(
    const std::vector<double>& conditions, double val_fraction, std::uint64_t seed) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("val_fraction must lie in (0,1)");
    std::vector<double> groups = conditions;
    std::sort(groups.begin(), groups.end());
    groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
    const std::size_t g = groups.size();
    if (g < 2) throw TooFewGroups("group split needs at least two distinct conditions");
    std::size_t n_val = std::size_t(std::floor(val_fraction * double(g) + 0.5));
    n_val = std::clamp<std::size_t>(n_val, 1, g - 1);
    auto rng = make_rng(seed, "group_split");
    std::shuffle(groups.begin(), groups.end(), rng);
    std::vector<double> val_groups(groups.begin(), groups.begin() + n_val);
    auto in_val = [&](double c) {
        return std::find(val_groups.begin(), val_groups.end(), c) != val_groups.end();
    };
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split;
    for (std::size_t i = 0; i < conditions.size(); ++i)
        (in_val(conditions[i]) ? split.second : split.first).push_back(i);
    return split;
}

/// Shuffled index batches covering every point exactly once per epoch.
inline std::vector<std::vector<int>> assemble_batches(int n_points, int batch_size,
                                                      std::mt19937_64& rng) {
    if (n_points < 1 || batch_size < 1) throw ConfigError("batching needs positive sizes");
    std::vector<int> order(n_points);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<int>> batches;
    for (int lo = 0; lo < n_points; lo += batch_size) {
        const int hi = std::min(lo + batch_size, n_points);
        batches.emplace_back(order.begin() + lo, order.begin() + hi);
    }
    return batches;
}

// ---------------------------------------------------------------------------
// Weighted Huber
// ---------------------------------------------------------------------------

struct HuberResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;  // d(loss)/d(pred)
};

/// loss = sum_i w_i * sum_ch l_delta(r_i,ch) / sum_i w_i (weighted-mean
/// reduction so the learning-rate scale is batch-size invariant).
inline HuberResult weighted_huber(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                                  const Eigen::VectorXd& weights, double delta) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
        weights.size() != pred.rows())
        throw ShapeMismatch("weighted_huber: shape mismatch");
    if (!(delta > 0.0)) throw ConfigError("weighted_huber: delta must be positive");
    const double w_sum = weights.sum();
    if (!(w_sum > 0.0)) throw ConfigError("weighted_huber: weights sum to zero");
    HuberResult res;
    res.grad.resize(pred.rows(), pred.cols());
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        const double w = weights[i] / w_sum;
        for (Eigen::Index c = 0; c < pred.cols(); ++c) {
            const double r = pred(i, c) - target(i, c);
            const double a = std::abs(r);
            if (a <= delta) {
                res.loss += weights[i] * 0.5 * r * r;
                res.grad(i, c) = w * r;
            } else {
                res.loss += weights[i] * delta * (a - 0.5 * delta);
                res.grad(i, c) = w * delta * (r > 0.0 ? 1.0 : -1.0);
            }
        }
    }
    res.loss /= w_sum;
    return res;
}

// ---------------------------------------------------------------------------
// Curriculum configuration and history
// ---------------------------------------------------------------------------

struct CurriculumPhase {
    std::string name = "warmup";
    double delta = 1.0;      // Huber width
    double lambda = 0.7;     // distance/gradient weight mix
    int max_epochs = 200;
    double lr_scale = 1.0;   // multiplier on the base lr at phase start
};

struct PlateauSchedule {
    double factor = 0.5;
    int patience = 10;
    double min_lr = 1e-5;
};

struct EarlyStopping {
    int patience = 35;
    double min_delta = 1e-6;
};

struct TrainConfig {
    std::vector<CurriculumPhase> phases = {{"warmup", 1.0, 0.7, 200, 1.0},
                                           {"focus", 0.5, 0.4, 300, 0.5}};
    int batch_size = 512;
    double lr = 8e-4;
    PlateauSchedule plateau;
    EarlyStopping early_stopping;
    int cosine_epochs = 0;  // optional fine-tune tail after the last phase
    double val_fraction = 0.2;
    double noise_std = 0.03;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 3e-4;
    double clipnorm = 1.0;

    void validate() const {
        if (phases.empty()) throw ConfigError("train: at least one phase is required");
        for (const auto& p : phases) {
            if (!(p.delta > 0.0)) throw ConfigError("train: phase delta must be positive");
            if (p.lambda < 0.0 || p.lambda > 1.0)
                throw ConfigError("train: phase lambda must lie in [0,1]");
            if (p.max_epochs < 1) throw ConfigError("train: phase epochs must be positive");
        }
        if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
        if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
        if (val_fraction <= 0.0 || val_fraction >= 1.0)
            throw ConfigError("train: val_fraction must lie in (0,1)");
    }
};

struct EpochRecord {
    int epoch = 0;           // global, 0-based
    std::string phase;
    double train_loss = 0.0;        // batch-averaged, dropout/noise active
    double train_loss_clean = 0.0;  // end-of-epoch pass without stochasticity
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    double best_val = std::numeric_limits<double>::infinity();

    void save_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write history to '" + path + "'");
        out << "epoch,phase,train_loss,train_loss_clean,val_loss,lr\n";
        char buf[64];
        auto fmt = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.10g", v);
            return std::string(buf);
        };
        for (const auto& e : epochs)
            out << e.epoch << ',' << e.phase << ',' << fmt(e.train_loss) << ','
                << fmt(e.train_loss_clean) << ',' << fmt(e.val_loss) << ',' << fmt(e.lr) << '\n';
    }
};

// ---------------------------------------------------------------------------
// Training set: standardized batches plus the static weight components. The
// per-phase sample weight is lambda * w_d + (1 - lambda) * w_g, multiplied by
// the relative weight when enabled; only lambda changes across phases.
// ---------------------------------------------------------------------------

struct SampleSet {
    Eigen::MatrixXd cond;    // standardized condition, one row per point
    Eigen::MatrixXd trunk;   // standardized trunk features
    Eigen::MatrixXd target;  // standardized targets
    Eigen::VectorXd w_d;     // distance weight, 1 + alpha * kernel
    Eigen::VectorXd w_g;     // gradient weight, 1 + beta * clipped magnitude
    Eigen::VectorXd w_rel;   // relative weight (all ones when disabled)

    int size() const { return int(cond.rows()); }

    void validate() const {
        const auto n = cond.rows();
        if (trunk.rows() != n || target.rows() != n || w_d.size() != n || w_g.size() != n ||
            w_rel.size() != n)
            throw ShapeMismatch("sample set rows misaligned");
        if (n == 0) throw EmptySelection("sample set is empty");
    }

    Eigen::VectorXd phase_weights(double lambda) const {
        return ((lambda * w_d + (1.0 - lambda) * w_g).array() * w_rel.array()).matrix();
    }
};

namespace detail {

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
    Eigen::MatrixXd out(Eigen::Index(idx.size()), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(Eigen::Index(r)) = m.row(idx[r]);
    return out;
}

inline Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(Eigen::Index(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) out[Eigen::Index(r)] = v[idx[r]];
    return out;
}

}  // namespace detail

/// Runs the curriculum phases (and the optional cosine tail) on the model.
/// Early stopping restores the best-validation parameters of each phase.
inline TrainHistory train_curriculum(nn::FusionModel& model, const SampleSet& train_set,
                                     const SampleSet& val_set, const TrainConfig& cfg) {
    cfg.validate();
    train_set.validate();
    val_set.validate();

    nn::AdamW opt;
    opt.lr = cfg.lr;
    opt.beta1 = cfg.adam_beta1;
    opt.beta2 = cfg.adam_beta2;
    opt.eps = cfg.adam_eps;
    opt.weight_decay = cfg.weight_decay;
    opt.clipnorm = cfg.clipnorm;

    TrainHistory history;
    int global_epoch = 0;

    auto eval_loss = [&](const SampleSet& s, const Eigen::VectorXd& w, double delta) {
        const Eigen::MatrixXd pred = model.forward(s.cond, s.trunk, nn::Mode::infer);
        return weighted_huber(pred, s.target, w, delta).loss;
    };

    std::vector<CurriculumPhase> schedule = cfg.phases;
    if (cfg.cosine_epochs > 0) {
        CurriculumPhase tail = schedule.back();
        tail.name = "cosine";
        tail.max_epochs = cfg.cosine_epochs;
        tail.lr_scale = -1.0;  // marker: cosine-decayed lr, no plateau
        schedule.push_back(tail);
    }

    for (const auto& phase : schedule) {
        const bool cosine = phase.lr_scale < 0.0;
        const double phase_lr0 = cosine ? opt.lr : cfg.lr * phase.lr_scale;
        opt.lr = phase_lr0;

        const Eigen::VectorXd w_train = train_set.phase_weights(phase.lambda);
        const Eigen::VectorXd w_val = val_set.phase_weights(phase.lambda);
        auto batch_rng = make_rng(cfg.seed, "batches/" + phase.name);
        auto noise_rng = make_rng(cfg.seed, "stochastic/" + phase.name);

        double best_val = std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_params = model.params;
        int bad_epochs = 0;
        double plateau_best = best_val;
        int plateau_bad = 0;

        for (int ep = 0; ep < phase.max_epochs; ++ep, ++global_epoch) {
            if (cosine)
                opt.lr = cfg.plateau.min_lr +
                         0.5 * (phase_lr0 - cfg.plateau.min_lr) *
                             (1.0 + std::cos(std::numbers::pi * double(ep) /
                                             double(std::max(phase.max_epochs - 1, 1))));
            double noisy_loss = 0.0;
            const auto batches = assemble_batches(train_set.size(), cfg.batch_size, batch_rng);
            for (const auto& idx : batches) {
                const Eigen::MatrixXd cond = detail::take_rows(train_set.cond, idx);
                const Eigen::MatrixXd trunk = detail::take_rows(train_set.trunk, idx);
                const Eigen::MatrixXd target = detail::take_rows(train_set.target, idx);
                const Eigen::VectorXd w = detail::take(w_train, idx);
                nn::ForwardCache cache;
                const Eigen::MatrixXd pred = model.forward(cond, trunk, nn::Mode::train,
                                                           &noise_rng, &cache, cfg.noise_std);
                HuberResult hub = weighted_huber(pred, target, w, phase.delta);
                noisy_loss += hub.loss;
                const Eigen::VectorXd grads = model.backward(cache, hub.grad);
                opt.step(model.params, grads);
            }
            noisy_loss /= double(batches.size());

            EpochRecord rec;
            rec.epoch = global_epoch;
            rec.phase = phase.name;
            rec.train_loss = noisy_loss;
            rec.train_loss_clean = eval_loss(train_set, w_train, phase.delta);
            rec.val_loss = eval_loss(val_set, w_val, phase.delta);
            rec.lr = opt.lr;
            history.epochs.push_back(rec);
            if (!std::isfinite(rec.val_loss))
                throw DivergedTraining("validation loss is not finite at epoch " +
                                       std::to_string(global_epoch));

            if (rec.val_loss < best_val - cfg.early_stopping.min_delta) {
                best_val = rec.val_loss;
                best_params = model.params;
                bad_epochs = 0;
            } else if (++bad_epochs > cfg.early_stopping.patience) {
                break;
            }
            if (!cosine) {
                if (rec.val_loss < plateau_best - cfg.early_stopping.min_delta) {
                    plateau_best = rec.val_loss;
                    plateau_bad = 0;
                } else if (++plateau_bad > cfg.plateau.patience) {
                    opt.lr = std::max(opt.lr * cfg.plateau.factor, cfg.plateau.min_lr);
                    plateau_bad = 0;
                }
            }
        }
        model.params = best_params;
        history.best_val = std::min(history.best_val, best_val);
    }
    return history;
}

}  // namespace shockfusion::train

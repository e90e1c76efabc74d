#pragma once

// JSON application configuration. Precedence is defaults < config file <
// command-line flags; `apply_config` only touches keys present in the
// document so later layers override earlier ones.

#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "shockfusion/burgers.hpp"
#include "shockfusion/pipeline.hpp"

namespace shockfusion::config {

struct BurgersGenConfig {
    std::vector<double> nu_train_scale = {0.5, 0.75, 1.0, 1.5, 2.0};  // times 0.01/pi
    std::vector<double> nu_test_scale = {1.25, 0.35};  // interpolation, extrapolation
    double nu_base = 0.01 / std::numbers::pi;
    burgers::BurgersConfig solver;
    burgers::DatasetStrides strides;

    std::vector<double> nu_train() const {
        std::vector<double> out;
        for (double s : nu_train_scale) out.push_back(s * nu_base);
        return out;
    }
    std::vector<double> nu_test() const {
        std::vector<double> out;
        for (double s : nu_test_scale) out.push_back(s * nu_base);
        return out;
    }
};

struct AppConfig {
    pipeline::PipelineConfig pipeline;
    BurgersGenConfig burgers;
};

namespace detail {

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline void apply_config(const nlohmann::json& j, AppConfig& cfg) {
    using detail::get_if;
    auto& p = cfg.pipeline;
    get_if(j, "dropout", p.dropout);
    get_if(j, "fusion_dim", p.fusion_dim);
    get_if(j, "widths", p.widths);
    get_if(j, "decoder_widths", p.decoder_widths);
    get_if(j, "oversample", p.oversample);
    get_if(j, "oversample_threshold", p.oversample_threshold);
    get_if(j, "jitter_frac", p.jitter_frac);
    get_if(j, "robust_calibration", p.robust_calibration);
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        get_if(w, "alpha", p.weights.alpha);
        get_if(w, "beta", p.weights.beta);
        get_if(w, "gamma", p.weights.gamma);
        get_if(w, "k", p.weights.k);
        get_if(w, "q_clip", p.weights.q_clip);
        get_if(w, "eps_rel", p.weights.eps_rel);
        get_if(w, "use_rel_weight", p.weights.use_rel_weight);
    }
    if (j.contains("features")) {
        const auto& f = j.at("features");
        get_if(f, "tanh_indicator", p.feature_opts.tanh_indicator);
        get_if(f, "dx_min", p.feature_opts.dx_min);
        get_if(f, "envelope_floor", p.feature_opts.envelope_floor);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        get_if(t, "batch_size", p.train.batch_size);
        get_if(t, "lr", p.train.lr);
        get_if(t, "val_fraction", p.train.val_fraction);
        get_if(t, "noise_std", p.train.noise_std);
        get_if(t, "weight_decay", p.train.weight_decay);
        get_if(t, "clipnorm", p.train.clipnorm);
        get_if(t, "cosine_epochs", p.train.cosine_epochs);
        get_if(t, "seed", p.train.seed);
        if (t.contains("phases")) {
            p.train.phases.clear();
            for (const auto& ph : t.at("phases")) {
                train::CurriculumPhase phase;
                get_if(ph, "name", phase.name);
                get_if(ph, "delta", phase.delta);
                get_if(ph, "lambda", phase.lambda);
                get_if(ph, "max_epochs", phase.max_epochs);
                get_if(ph, "lr_scale", phase.lr_scale);
                p.train.phases.push_back(phase);
            }
        }
        if (t.contains("plateau")) {
            const auto& pl = t.at("plateau");
            get_if(pl, "factor", p.train.plateau.factor);
            get_if(pl, "patience", p.train.plateau.patience);
            get_if(pl, "min_lr", p.train.plateau.min_lr);
        }
        if (t.contains("early_stopping")) {
            const auto& es = t.at("early_stopping");
            get_if(es, "patience", p.train.early_stopping.patience);
            get_if(es, "min_delta", p.train.early_stopping.min_delta);
        }
    }
    if (j.contains("burgers")) {
        const auto& b = j.at("burgers");
        get_if(b, "nu_train_scale", cfg.burgers.nu_train_scale);
        get_if(b, "nu_test_scale", cfg.burgers.nu_test_scale);
        get_if(b, "nu_base", cfg.burgers.nu_base);
        get_if(b, "nx", cfg.burgers.solver.nx);
        get_if(b, "nt", cfg.burgers.solver.nt);
        get_if(b, "t_end", cfg.burgers.solver.t_end);
        get_if(b, "x_stride", cfg.burgers.strides.x_stride);
        get_if(b, "t_stride", cfg.burgers.strides.t_stride);
    }
}

inline nlohmann::json config_snapshot(const AppConfig& cfg) {
    const auto& p = cfg.pipeline;
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& ph : p.train.phases)
        phases.push_back({{"name", ph.name},
                          {"delta", ph.delta},
                          {"lambda", ph.lambda},
                          {"max_epochs", ph.max_epochs},
                          {"lr_scale", ph.lr_scale}});
    return {
        {"dropout", p.dropout},
        {"fusion_dim", p.fusion_dim},
        {"widths", p.widths},
        {"decoder_widths", p.decoder_widths},
        {"oversample", p.oversample},
        {"oversample_threshold", p.oversample_threshold},
        {"jitter_frac", p.jitter_frac},
        {"robust_calibration", p.robust_calibration},
        {"weights",
         {{"alpha", p.weights.alpha},
          {"beta", p.weights.beta},
          {"gamma", p.weights.gamma},
          {"k", p.weights.k},
          {"q_clip", p.weights.q_clip},
          {"eps_rel", p.weights.eps_rel},
          {"use_rel_weight", p.weights.use_rel_weight}}},
        {"features",
         {{"tanh_indicator", p.feature_opts.tanh_indicator},
          {"dx_min", p.feature_opts.dx_min},
          {"envelope_floor", p.feature_opts.envelope_floor}}},
        {"train",
         {{"batch_size", p.train.batch_size},
          {"lr", p.train.lr},
          {"val_fraction", p.train.val_fraction},
          {"noise_std", p.train.noise_std},
          {"weight_decay", p.train.weight_decay},
          {"clipnorm", p.train.clipnorm},
          {"cosine_epochs", p.train.cosine_epochs},
          {"seed", p.train.seed},
          {"phases", phases},
          {"plateau",
           {{"factor", p.train.plateau.factor},
            {"patience", p.train.plateau.patience},
            {"min_lr", p.train.plateau.min_lr}}},
          {"early_stopping",
           {{"patience", p.train.early_stopping.patience},
            {"min_delta", p.train.early_stopping.min_delta}}}}},
        {"burgers",
         {{"nu_train_scale", cfg.burgers.nu_train_scale},
          {"nu_test_scale", cfg.burgers.nu_test_scale},
          {"nu_base", cfg.burgers.nu_base},
          {"nx", cfg.burgers.solver.nx},
          {"nt", cfg.burgers.solver.nt},
          {"t_end", cfg.burgers.solver.t_end},
          {"x_stride", cfg.burgers.strides.x_stride},
          {"t_stride", cfg.burgers.strides.t_stride}}},
    };
}

inline AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid config '" + path + "': " + e.what());
    }
    AppConfig cfg;
    apply_config(j, cfg);
    return cfg;
}

}  // namespace shockfusion::config

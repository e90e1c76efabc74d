#pragma once

// Physics-guided trunk features: signed distance to the calibrated shock
// station, a soft pre/post indicator, multi-scale Gaussian envelopes, and
// the curriculum sample weights built from them.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "shockfusion/common.hpp"
#include "shockfusion/field_io.hpp"

namespace shockfusion::features {

struct ShockCalibration {
    double a0 = 0.0;  // station(condition) = a0 + a1 * condition
    double a1 = 0.0;
    double residual = 0.0;
    std::vector<std::pair<double, double>> per_case;  // (condition, argmax location)
    bool has_robust = false;
    double robust_a0 = 0.0;  // Huber-IRLS refit, written when requested
    double robust_a1 = 0.0;
    double robust_residual = 0.0;

    double station(double condition) const { return a0 + a1 * condition; }
};

struct WeightParams {
    double alpha = 2.0;       // distance-weight amplitude
    double beta = 0.8;        // gradient-weight amplitude (gw_scale)
    double lambda = 0.7;      // convex mix, distance vs gradient
    double k = 1.8e3;         // indicator steepness (normalized units)
    double q_clip = 95.0;     // gradient normalization percentile
    double gamma = 0.5;       // relative-weight amplitude
    double eps_rel = 1e-6;    // floor for the relative-weight denominator
    bool use_rel_weight = true;

    void validate() const {
        if (!(alpha > 0.0)) throw ConfigError("weights: alpha must be positive");
        if (beta < 0.0) throw ConfigError("weights: beta must be non-negative");
        if (lambda < 0.0 || lambda > 1.0) throw ConfigError("weights: lambda must lie in [0,1]");
        if (!(k > 0.0)) throw ConfigError("weights: k must be positive");
    }
};

struct FeatureOptions {
    int shock_axis = 0;               // 0: coord0 (x), 1: coord1 (time for Burgers)
    bool tanh_indicator = false;      // tanh variant with kappa = k/2
    bool include_wall_distance = false;
    double dx_min = 1e-12;
    double envelope_floor = 1e-12;    // clip for the Gaussian envelopes
};

// ---------------------------------------------------------------------------
// Point-level primitives
// ---------------------------------------------------------------------------

inline double signed_distance(double x, double condition, const ShockCalibration& calib) {
    return x - calib.station(condition);
}

/// Overflow-safe logistic indicator s = 1 / (1 + exp(-k (x_s - x))).
inline double soft_indicator(double x, double condition, const ShockCalibration& calib, double k) {
    const double z = k * (calib.station(condition) - x);
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// tanh variant: 0.5 (1 + tanh(kappa (x_s - x))).
inline double tanh_indicator(double x, double condition, const ShockCalibration& calib, double kappa) {
    return 0.5 * (1.0 + std::tanh(kappa * (calib.station(condition) - x)));
}

struct Envelopes {
    double phi_1, phi_2, phi_3;
};

/// Gaussian envelopes at widths {3, 7, 12} * dx.
inline Envelopes rbf_envelopes(double d, double dx) {
    if (!(dx > 0.0)) throw ConfigError("rbf_envelopes: dx must be positive");
    Envelopes e;
    const double d2 = d * d;
    e.phi_1 = std::exp(-d2 / (2.0 * (3.0 * dx) * (3.0 * dx)));
    e.phi_2 = std::exp(-d2 / (2.0 * (7.0 * dx) * (7.0 * dx)));
    e.phi_3 = std::exp(-d2 / (2.0 * (12.0 * dx) * (12.0 * dx)));
    return e;
}

/// Distance weight W_d = 1 + alpha exp(-d^2 / (2 (7 dx)^2)).
inline double distance_weight(double x, double condition, const ShockCalibration& calib, double alpha,
                              double dx) {
    if (!(alpha > 0.0)) throw ConfigError("distance_weight: alpha must be positive");
    if (!(dx > 0.0)) throw ConfigError("distance_weight: dx must be positive");
    const double d = signed_distance(x, condition, calib);
    return 1.0 + alpha * std::exp(-d * d / (2.0 * (7.0 * dx) * (7.0 * dx)));
}

// ---------------------------------------------------------------------------
// Calibration of the shock station from training cases
// ---------------------------------------------------------------------------

namespace detail {

// |dU/dx| along each constant-coord1 row, central differences with one-sided
// stencils at the row ends. Returns gradients in zone point order.
inline std::vector<double> streamwise_gradient(const io::ZoneGrid& zone) {
    const auto& x = zone.coord0().values;
    const auto& u = zone.require("U").values;
    const int I = zone.i_count;
    const int J = zone.j_count;
    std::vector<double> g(std::size_t(I) * J, 0.0);
    for (int j = 0; j < J; ++j) {
        const int base = j * I;
        for (int i = 0; i < I; ++i) {
            int lo = std::max(i - 1, 0);
            int hi = std::min(i + 1, I - 1);
            const double dx = x[base + hi] - x[base + lo];
            g[base + i] = dx != 0.0 ? std::abs((u[base + hi] - u[base + lo]) / dx) : 0.0;
        }
    }
    return g;
}

// Shock station of one case: x at the global max of the row-median gradient
// magnitude, smallest x on ties. Aggregating with the row median suppresses
// wall-layer outliers.
inline double case_shock_station(const io::CaseRecord& rec) {
    double best_g = -1.0;
    double best_x = std::numeric_limits<double>::quiet_NaN();
    for (const auto& zone : rec.zones) {
        const auto g = streamwise_gradient(zone);
        const auto& x = zone.coord0().values;
        const int I = zone.i_count;
        const int J = zone.j_count;
        for (int i = 0; i < I; ++i) {
            std::vector<double> col(J);
            for (int j = 0; j < J; ++j) col[j] = g[j * I + i];
            const double med = median(std::move(col));
            const double xi = x[i];  // column abscissa from the first row
            if (med > best_g + 1e-300 ||
                (med == best_g && xi < best_x)) {
                if (med > best_g || xi < best_x) { best_g = med; best_x = xi; }
            }
        }
    }
    if (best_g <= 1e-12)
        throw NoGradientSignal("all streamwise gradients below tolerance for case '" +
                               rec.source_path + "'");
    return best_x;
}

}  // namespace detail

/// Least-squares affine fit of the per-case maximal-gradient location against
/// the scalar condition. `robust` additionally runs a Huber-IRLS refit.
inline ShockCalibration calibrate_shock_station(const std::vector<io::CaseRecord>& cases,
                                                bool robust = false) {
    if (cases.size() < 2) throw RankDeficient("shock calibration needs at least two cases");
    std::vector<double> conds, stations;
    for (const auto& rec : cases) {
        conds.push_back(rec.condition);
        stations.push_back(detail::case_shock_station(rec));
    }
    AffineFit fit = fit_affine(conds, stations);
    ShockCalibration cal;
    cal.a0 = fit.a0;
    cal.a1 = fit.a1;
    cal.residual = fit.residual;
    for (std::size_t i = 0; i < conds.size(); ++i) cal.per_case.emplace_back(conds[i], stations[i]);
    if (robust) {
        AffineFit rf = fit_affine_huber(conds, stations);
        cal.has_robust = true;
        cal.robust_a0 = rf.a0;
        cal.robust_a1 = rf.a1;
        cal.robust_residual = rf.residual;
    }
    return cal;
}

// ---------------------------------------------------------------------------
// Trunk feature matrix
// ---------------------------------------------------------------------------

inline constexpr int kBaseFeatureCount = 9;

/// One trunk feature row: [c0, c1, d, s, |d|, d^2, phi_1, phi_2, phi_3]
/// (+ wall distance when enabled). `shock_coord` is the coordinate the
/// signed distance is measured along.
inline void feature_row(double c0, double c1, double shock_coord, double condition,
                        const ShockCalibration& calib, const WeightParams& params,
                        const FeatureOptions& opts, double dx, double* out) {
    const double d = signed_distance(shock_coord, condition, calib);
    const double s = opts.tanh_indicator
                         ? tanh_indicator(shock_coord, condition, calib, params.k / 2.0)
                         : soft_indicator(shock_coord, condition, calib, params.k);
    Envelopes phi = rbf_envelopes(d, dx);
    out[0] = c0;
    out[1] = c1;
    out[2] = d;
    out[3] = s;
    out[4] = std::abs(d);
    out[5] = d * d;
    out[6] = std::clamp(phi.phi_1, opts.envelope_floor, 1.0);
    out[7] = std::clamp(phi.phi_2, opts.envelope_floor, 1.0);
    out[8] = std::clamp(phi.phi_3, opts.envelope_floor, 1.0);
}

namespace detail {

// Distance from a point to the polyline through the given zone row.
inline double distance_to_row(const io::ZoneGrid& zone, int j, double px, double py) {
    const auto& x = zone.coord0().values;
    const auto& y = zone.coord1().values;
    const int I = zone.i_count;
    const int base = j * I;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i + 1 < I; ++i) {
        const double ax = x[base + i], ay = y[base + i];
        const double bx = x[base + i + 1], by = y[base + i + 1];
        const double vx = bx - ax, vy = by - ay;
        const double len2 = vx * vx + vy * vy;
        double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double dx = px - (ax + t * vx);
        const double dy = py - (ay + t * vy);
        best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    if (I == 1) {
        const double dx = px - x[base], dy = py - y[base];
        best = std::sqrt(dx * dx + dy * dy);
    }
    return best;
}

}  // namespace detail

/// Normalized distance to the nearest lateral boundary row (j = 0 and
/// j = J-1 polylines), scaled by the zone maximum.
inline std::vector<double> wall_distance_field(const io::ZoneGrid& zone) {
    const auto& x = zone.coord0().values;
    const auto& y = zone.coord1().values;
    const int n = zone.point_count();
    std::vector<double> w(n);
    double wmax = 0.0;
    for (int p = 0; p < n; ++p) {
        const double d0 = detail::distance_to_row(zone, 0, x[p], y[p]);
        const double d1 = detail::distance_to_row(zone, zone.j_count - 1, x[p], y[p]);
        w[p] = std::min(d0, d1);
        wmax = std::max(wmax, w[p]);
    }
    if (wmax > 0.0)
        for (double& v : w) v /= wmax;
    return w;
}

/// Full trunk feature matrix for a zone, row-major, one row per zone point,
/// 9 columns (10 with wall distance). `dx` defaults to the median spacing
/// along the shock axis.
inline std::vector<double> build_trunk_features(const io::ZoneGrid& zone, double condition,
                                                const ShockCalibration& calib,
                                                const WeightParams& params,
                                                const FeatureOptions& opts = {},
                                                double dx = 0.0) {
    params.validate();
    if (dx <= 0.0) dx = io::median_axis_spacing(zone, opts.shock_axis, opts.dx_min);
    const int n = zone.point_count();
    const int width = kBaseFeatureCount + (opts.include_wall_distance ? 1 : 0);
    const auto& c0 = zone.coord0().values;
    const auto& c1 = zone.coord1().values;
    std::vector<double> rows(std::size_t(n) * width);
    for (int p = 0; p < n; ++p) {
        const double shock_coord = opts.shock_axis == 0 ? c0[p] : c1[p];
        feature_row(c0[p], c1[p], shock_coord, condition, calib, params, opts, dx,
                    rows.data() + std::size_t(p) * width);
    }
    if (opts.include_wall_distance) {
        const auto wd = wall_distance_field(zone);
        for (int p = 0; p < n; ++p) rows[std::size_t(p) * width + kBaseFeatureCount] = wd[p];
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Sample weights
// ---------------------------------------------------------------------------

/// W_g = 1 + beta * clip(g / q_clip-percentile, 0, 1). Rows with no gradient
/// signal (constant U) degrade to all-ones.
inline std::vector<double> gradient_weight_field(const io::ZoneGrid& zone, double beta,
                                                 double q_clip = 95.0) {
    std::vector<double> g = detail::streamwise_gradient(zone);
    const double q = percentile(g, q_clip);
    std::vector<double> w(g.size(), 1.0);
    if (q <= 0.0) return w;
    for (std::size_t i = 0; i < g.size(); ++i)
        w[i] = 1.0 + beta * std::clamp(g[i] / q, 0.0, 1.0);
    return w;
}

/// Normalized gradient magnitudes g~ in [0,1] (the beta-independent part).
inline std::vector<double> normalized_gradient_field(const io::ZoneGrid& zone, double q_clip = 95.0) {
    std::vector<double> g = detail::streamwise_gradient(zone);
    const double q = percentile(g, q_clip);
    if (q <= 0.0) return std::vector<double>(g.size(), 0.0);
    for (double& v : g) v = std::clamp(v / q, 0.0, 1.0);
    return g;
}

/// w = lambda * W_d + (1 - lambda) * W_g elementwise.
inline std::vector<double> combine_weights(const std::vector<double>& w_d,
                                           const std::vector<double>& w_g, double lambda) {
    if (w_d.size() != w_g.size()) throw ShapeMismatch("combine_weights: length mismatch");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("combine_weights: lambda must lie in [0,1]");
    std::vector<double> w(w_d.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = lambda * w_d[i] + (1.0 - lambda) * w_g[i];
    return w;
}

/// w_rel = 1 + gamma (1 - |U| / max|U|); keeps low-speed regions from being
/// underweighted. Disabled -> all ones.
inline std::vector<double> relative_weight_field(const io::ZoneGrid& zone, double gamma,
                                                 double eps_rel = 1e-6, bool enabled = true) {
    const auto& u = zone.require("U").values;
    std::vector<double> w(u.size(), 1.0);
    if (!enabled) return w;
    double umax = 0.0;
    for (double v : u) umax = std::max(umax, std::abs(v));
    umax = std::max(umax, eps_rel);
    for (std::size_t i = 0; i < u.size(); ++i) w[i] = 1.0 + gamma * (1.0 - std::abs(u[i]) / umax);
    return w;
}

}  // namespace shockfusion::features

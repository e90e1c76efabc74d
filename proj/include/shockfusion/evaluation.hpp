#pragma once

// Metrics (relative l2, NRMSE/NMAE as % of channel range), normalized error
// fields, centerline extraction with MC-dropout bands, and report emission.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "shockfusion/common.hpp"
#include "shockfusion/field_io.hpp"
#include <json.hpp>

namespace shockfusion::eval {

/// ||truth - pred||_2 / ||truth||_2.
inline double rel_l2(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size()) throw ShapeMismatch("rel_l2: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = truth[i] - pred[i];
        num += d * d;
        den += truth[i] * truth[i];
    }
    if (!(den > 0.0)) throw ZeroReference("rel_l2: reference vector has zero norm");
    return std::sqrt(num / den);
}

/// Joint variant: channels stacked into one vector before the norm ratio.
inline double joint_rel_l2(const std::vector<std::vector<double>>& truth_channels,
                           const std::vector<std::vector<double>>& pred_channels) {
    if (truth_channels.size() != pred_channels.size())
        throw ShapeMismatch("joint_rel_l2: channel count mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < truth_channels.size(); ++c) {
        if (truth_channels[c].size() != pred_channels[c].size())
            throw ShapeMismatch("joint_rel_l2: channel length mismatch");
        for (std::size_t i = 0; i < truth_channels[c].size(); ++i) {
            const double d = truth_channels[c][i] - pred_channels[c][i];
            num += d * d;
            den += truth_channels[c][i] * truth_channels[c][i];
        }
    }
    if (!(den > 0.0)) throw ZeroReference("joint_rel_l2: reference has zero norm");
    return std::sqrt(num / den);
}

struct RangeErrors {
    double nrmse_pct = 0.0;
    double nmae_pct = 0.0;
};

/// RMSE and MAE as a percentage of the truth's value range (max - min).
inline RangeErrors range_normalized_errors(const std::vector<double>& truth,
                                           const std::vector<double>& pred) {
    if (truth.size() != pred.size()) throw ShapeMismatch("range errors: length mismatch");
    if (truth.empty()) throw EmptySelection("range errors: empty input");
    const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) throw ZeroRange("range errors: constant reference field");
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = pred[i] - truth[i];
        se += d * d;
        ae += std::abs(d);
    }
    RangeErrors e;
    e.nrmse_pct = std::sqrt(se / double(truth.size())) / range * 100.0;
    e.nmae_pct = ae / double(truth.size()) / range * 100.0;
    return e;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ChannelMetrics {
    std::string name;
    double rel_l2 = 0.0;
    double nrmse_pct = 0.0;
    double nmae_pct = 0.0;
};

struct MetricsReport {
    std::string model_tag;
    double condition = 0.0;
    std::string case_label;
    std::vector<ChannelMetrics> channels;
    double joint_rel_l2 = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["model"] = model_tag;
        j["condition"] = condition;
        j["case"] = case_label;
        j["joint_rel_l2"] = joint_rel_l2;
        for (const auto& c : channels)
            j["channels"][c.name] = {
                {"rel_l2", c.rel_l2}, {"nrmse_pct", c.nrmse_pct}, {"nmae_pct", c.nmae_pct}};
        return j;
    }
};

/// Per-channel and joint metrics from aligned truth/prediction channels.
inline MetricsReport make_report(const std::string& model_tag, double condition,
                                 const std::string& case_label,
                                 const std::vector<std::string>& channel_names,
                                 const std::vector<std::vector<double>>& truth,
                                 const std::vector<std::vector<double>>& pred) {
    if (truth.size() != pred.size() || truth.size() != channel_names.size())
        throw ShapeMismatch("metrics report: channel count mismatch");
    MetricsReport rep;
    rep.model_tag = model_tag;
    rep.condition = condition;
    rep.case_label = case_label;
    for (std::size_t c = 0; c < truth.size(); ++c) {
        ChannelMetrics m;
        m.name = channel_names[c];
        m.rel_l2 = rel_l2(truth[c], pred[c]);
        const RangeErrors re = range_normalized_errors(truth[c], pred[c]);
        m.nrmse_pct = re.nrmse_pct;
        m.nmae_pct = re.nmae_pct;
        rep.channels.push_back(m);
    }
    rep.joint_rel_l2 = joint_rel_l2(truth, pred);
    return rep;
}

inline void save_reports_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report to '" + path + "'");
    out << "model,case,condition,channel,rel_l2,nrmse_pct,nmae_pct,joint_rel_l2\n";
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        return std::string(buf);
    };
    for (const auto& r : reports)
        for (const auto& c : r.channels)
            out << r.model_tag << ',' << r.case_label << ',' << fmt(r.condition) << ',' << c.name
                << ',' << fmt(c.rel_l2) << ',' << fmt(c.nrmse_pct) << ',' << fmt(c.nmae_pct) << ','
                << fmt(r.joint_rel_l2) << '\n';
}

inline void save_reports_json(const std::string& path, const std::vector<MetricsReport>& reports) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(r.to_json());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report to '" + path + "'");
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Centerline extraction
// ---------------------------------------------------------------------------

struct ProfilePoint {
    double x = 0.0;
    double truth = 0.0;
    double pred = 0.0;
    double lo = 0.0;  // pred - 2 sigma
    double hi = 0.0;  // pred + 2 sigma
};

/// Profile along the grid row nearest to `axis_value` (within half a cell),
/// ordered by the first coordinate. `sigma` may be empty (band collapses).
inline std::vector<ProfilePoint> centerline_profile(const io::ZoneGrid& zone,
                                                    const std::vector<double>& pred,
                                                    const std::vector<double>& sigma,
                                                    double axis_value,
                                                    const std::string& channel = "U") {
    const auto& c0 = zone.coord0().values;
    const auto& c1 = zone.coord1().values;
    const auto& truth = zone.require(channel).values;
    if (pred.size() != truth.size()) throw ShapeMismatch("profile: prediction length mismatch");
    if (!sigma.empty() && sigma.size() != truth.size())
        throw ShapeMismatch("profile: sigma length mismatch");

    std::vector<double> rows = c1;
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    double nearest = rows.front();
    for (double r : rows)
        if (std::abs(r - axis_value) < std::abs(nearest - axis_value)) nearest = r;
    double cell = std::numeric_limits<double>::infinity();
    if (rows.size() > 1) {
        std::vector<double> gaps;
        for (std::size_t i = 1; i < rows.size(); ++i) gaps.push_back(rows[i] - rows[i - 1]);
        cell = median(gaps);
    }
    if (std::abs(nearest - axis_value) > 0.5 * cell && rows.size() > 1)
        throw EmptySelection("no grid row within half a cell of the requested axis value");

    std::vector<ProfilePoint> profile;
    for (std::size_t p = 0; p < truth.size(); ++p) {
        if (c1[p] != nearest) continue;
        ProfilePoint pt;
        pt.x = c0[p];
        pt.truth = truth[p];
        pt.pred = pred[p];
        const double s = sigma.empty() ? 0.0 : sigma[p];
        pt.lo = pt.pred - 2.0 * s;
        pt.hi = pt.pred + 2.0 * s;
        profile.push_back(pt);
    }
    if (profile.empty()) throw EmptySelection("selected grid row contains no points");
    std::sort(profile.begin(), profile.end(),
              [](const ProfilePoint& a, const ProfilePoint& b) { return a.x < b.x; });
    return profile;
}

inline void save_profile_csv(const std::string& path, const std::vector<ProfilePoint>& profile) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write profile to '" + path + "'");
    out << "x,truth,pred,lo,hi\n";
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        return std::string(buf);
    };
    for (const auto& p : profile)
        out << fmt(p.x) << ',' << fmt(p.truth) << ',' << fmt(p.pred) << ',' << fmt(p.lo) << ','
            << fmt(p.hi) << '\n';
}

}  // namespace shockfusion::eval

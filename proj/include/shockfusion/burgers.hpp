#pragma once

// Viscous 1-D Burgers reference solutions: u_t + u u_x = nu u_xx on
// [x_lo, x_hi] with u(x,0) = -sin(pi x) and homogeneous Dirichlet walls.
// Crank-Nicolson in time with Newton iteration on the conservative flux,
// so the composite scheme is second order in both space and time.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "shockfusion/common.hpp"
#include "shockfusion/field_io.hpp"

namespace shockfusion::burgers {

enum class InitialCondition { neg_sin_pi_x };
enum class BoundaryCondition { dirichlet_zero };

struct BurgersConfig {
    double nu = 0.01 / std::numbers::pi;
    double x_lo = -1.0;
    double x_hi = 1.0;
    int nx = 4097;    // grid points including both walls
    double t_end = 1.0;
    int nt = 6401;    // time levels including t = 0
    InitialCondition ic = InitialCondition::neg_sin_pi_x;
    BoundaryCondition bc = BoundaryCondition::dirichlet_zero;

    void validate() const {
        if (!(nu > 0.0)) throw ConfigError("Burgers: nu must be positive");
        if (nx < 3) throw ConfigError("Burgers: nx must be at least 3");
        if (nt < 2) throw ConfigError("Burgers: nt must be at least 2");
        if (!(x_lo < x_hi)) throw ConfigError("Burgers: x_lo must be below x_hi");
        if (!(t_end > 0.0)) throw ConfigError("Burgers: t_end must be positive");
    }
};

struct SpaceTimeField {
    std::vector<double> x;               // nx
    std::vector<double> t;               // nt
    std::vector<std::vector<double>> u;  // nt rows of nx values
};

namespace detail {

// Tridiagonal solve (Thomas algorithm), overwrites d with the solution.
inline void solve_tridiag(std::vector<double>& a, std::vector<double>& b, std::vector<double>& c,
                          std::vector<double>& d) {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    d[n - 1] /= b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

// Spatial operator L(u) = -(F_{i+1} - F_{i-1}) / (2 dx) + nu * lap(u),
// with F = u^2/2. Boundary entries are left at zero (Dirichlet walls).
inline void rhs(const std::vector<double>& u, double nu, double dx, std::vector<double>& out) {
    const std::size_t n = u.size();
    out.assign(n, 0.0);
    const double inv2dx = 1.0 / (2.0 * dx);
    const double invdx2 = nu / (dx * dx);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double flux = (0.5 * u[i + 1] * u[i + 1] - 0.5 * u[i - 1] * u[i - 1]) * inv2dx;
        out[i] = -flux + (u[i + 1] - 2.0 * u[i] + u[i - 1]) * invdx2;
    }
}

}  // namespace detail

inline SpaceTimeField solve_burgers(const BurgersConfig& cfg) {
    cfg.validate();
    SpaceTimeField field;
    const int nx = cfg.nx;
    const int nt = cfg.nt;
    const double dx = (cfg.x_hi - cfg.x_lo) / double(nx - 1);
    const double dt = cfg.t_end / double(nt - 1);

    field.x.resize(nx);
    for (int i = 0; i < nx; ++i) field.x[i] = cfg.x_lo + dx * i;
    field.t.resize(nt);
    for (int n = 0; n < nt; ++n) field.t[n] = dt * n;

    std::vector<double> u(nx);
    for (int i = 0; i < nx; ++i) u[i] = -std::sin(std::numbers::pi * field.x[i]);
    u.front() = 0.0;
    u.back() = 0.0;
    field.u.reserve(nt);
    field.u.push_back(u);

    std::vector<double> rhs_n(nx), rhs_v(nx), res(nx), v(nx);
    std::vector<double> lo(nx), di(nx), up(nx);
    const double inv2dx = 1.0 / (2.0 * dx);
    const double nudx2 = cfg.nu / (dx * dx);

    for (int step = 0; step < nt - 1; ++step) {
        detail::rhs(u, cfg.nu, dx, rhs_n);
        v = u;  // Newton start from the previous level
        for (int iter = 0; iter < 12; ++iter) {
            detail::rhs(v, cfg.nu, dx, rhs_v);
            // Residual of the Crank-Nicolson step; walls pinned to zero.
            for (int i = 0; i < nx; ++i) res[i] = v[i] - u[i] - 0.5 * dt * (rhs_v[i] + rhs_n[i]);
            res[0] = v[0];
            res[nx - 1] = v[nx - 1];
            // Tridiagonal Jacobian dRes/dv.
            for (int i = 0; i < nx; ++i) { lo[i] = 0.0; di[i] = 1.0; up[i] = 0.0; }
            for (int i = 1; i + 1 < nx; ++i) {
                di[i] = 1.0 + dt * nudx2;
                up[i] = 0.5 * dt * (v[i + 1] * inv2dx - nudx2);
                lo[i] = 0.5 * dt * (-v[i - 1] * inv2dx - nudx2);
            }
            detail::solve_tridiag(lo, di, up, res);
            double delta = 0.0;
            for (int i = 0; i < nx; ++i) {
                v[i] -= res[i];
                delta = std::max(delta, std::abs(res[i]));
            }
            if (delta < 1e-13) break;
        }
        for (double q : v)
            if (!std::isfinite(q))
                throw UnstableStep("non-finite solution at time step " + std::to_string(step + 1));
        u = v;
        field.u.push_back(u);
    }
    return field;
}

/// Time of the sharpest spatial gradient: argmax over t of max over x of
/// |du/dx| (central differences, one-sided at the walls), earliest on ties.
inline double estimate_t_shock(const SpaceTimeField& field) {
    if (field.u.empty() || field.x.size() < 2) throw DegenerateGrid("empty space-time field");
    double best = -1.0;
    std::size_t best_n = 0;
    for (std::size_t n = 0; n < field.u.size(); ++n) {
        const auto& row = field.u[n];
        double g = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            double d;
            if (i == 0) d = (row[1] - row[0]) / (field.x[1] - field.x[0]);
            else if (i + 1 == row.size())
                d = (row[i] - row[i - 1]) / (field.x[i] - field.x[i - 1]);
            else
                d = (row[i + 1] - row[i - 1]) / (field.x[i + 1] - field.x[i - 1]);
            g = std::max(g, std::abs(d));
        }
        if (g > best + 1e-15 * std::max(1.0, best)) {  // strict improvement; earliest tie wins
            best = g;
            best_n = n;
        }
    }
    return field.t[best_n];
}

struct ShockTimeCalibration {
    double a0 = 0.0;
    double a1 = 0.0;
    double residual = 0.0;
    // Optional isotonic refit diagnostics (direction chosen by residual).
    double isotonic_residual = 0.0;
    bool isotonic_increasing = false;
    std::vector<std::pair<double, double>> per_case;  // (nu, estimated t_shock)
};

inline ShockTimeCalibration calibrate_t_shock(
    const std::vector<std::pair<double, SpaceTimeField>>& solutions) {
    if (solutions.size() < 2) throw RankDeficient("t_shock calibration needs at least two cases");
    std::vector<double> nus, ts;
    for (const auto& [nu, field] : solutions) {
        nus.push_back(nu);
        ts.push_back(estimate_t_shock(field));
    }
    AffineFit fit = fit_affine(nus, ts);  // throws RankDeficient when all nu equal
    ShockTimeCalibration cal;
    cal.a0 = fit.a0;
    cal.a1 = fit.a1;
    cal.residual = fit.residual;
    for (std::size_t i = 0; i < nus.size(); ++i) cal.per_case.emplace_back(nus[i], ts[i]);
    // isotonic refit on nu-sorted estimates, better direction kept
    std::vector<std::size_t> order(nus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return nus[a] < nus[b]; });
    std::vector<double> sorted_ts;
    for (auto i : order) sorted_ts.push_back(ts[i]);
    double best_res = 0.0;
    bool best_inc = true;
    for (bool inc : {true, false}) {
        auto fitvals = isotonic_fit(sorted_ts, inc);
        double ss = 0.0;
        for (std::size_t i = 0; i < fitvals.size(); ++i)
            ss += (fitvals[i] - sorted_ts[i]) * (fitvals[i] - sorted_ts[i]);
        const double res = std::sqrt(ss / double(fitvals.size()));
        if (inc || res < best_res) { best_res = res; best_inc = inc; }
    }
    cal.isotonic_residual = best_res;
    cal.isotonic_increasing = best_inc;
    return cal;
}

// ---------------------------------------------------------------------------
// Dataset generation: one Tecplot file per viscosity with columns [X, T, U]
// (the time coordinate takes the Y slot) plus a manifest.
// ---------------------------------------------------------------------------

struct DatasetStrides {
    int x_stride = 32;   // keep every k-th grid point
    int t_stride = 100;  // keep every k-th time level
};

inline io::CaseRecord field_to_case(const SpaceTimeField& field, double nu,
                                    const DatasetStrides& strides = {1, 1}) {
    io::ZoneGrid zone;
    std::vector<int> xi, ti;
    for (std::size_t i = 0; i < field.x.size(); i += strides.x_stride) xi.push_back(int(i));
    if (xi.back() != int(field.x.size()) - 1) xi.push_back(int(field.x.size()) - 1);
    for (std::size_t n = 0; n < field.t.size(); n += strides.t_stride) ti.push_back(int(n));
    if (ti.back() != int(field.t.size()) - 1) ti.push_back(int(field.t.size()) - 1);
    zone.i_count = int(xi.size());
    zone.j_count = int(ti.size());
    zone.columns = {{"X", {}}, {"T", {}}, {"U", {}}};
    for (int n : ti) {
        for (int i : xi) {
            zone.columns[0].values.push_back(field.x[i]);
            zone.columns[1].values.push_back(field.t[n]);
            zone.columns[2].values.push_back(field.u[n][i]);
        }
    }
    io::CaseRecord rec;
    rec.zones.push_back(std::move(zone));
    rec.condition = nu;
    rec.condition_kind = io::ConditionKind::viscosity;
    return rec;
}

/// Solves every nu in nu_list, writes the subsampled space-time files and a
/// manifest named `manifest_name` into out_dir. Returns the file paths.
inline std::vector<std::string> generate_burgers_dataset(const std::vector<double>& nu_list,
                                                         BurgersConfig cfg, const std::string& out_dir,
                                                         const std::string& manifest_name = "manifest.json",
                                                         const DatasetStrides& strides = {}) {
    if (nu_list.empty()) throw ConfigError("nu_list must not be empty");
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> paths;
    std::vector<io::ManifestEntry> entries;
    for (std::size_t k = 0; k < nu_list.size(); ++k) {
        cfg.nu = nu_list[k];
        cfg.validate();
        SpaceTimeField field = solve_burgers(cfg);
        io::CaseRecord rec = field_to_case(field, cfg.nu, strides);
        char name[64];
        std::snprintf(name, sizeof(name), "burgers_nu_%.6e.dat", cfg.nu);
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        io::write_file(path, io::write_tecplot(rec));
        paths.push_back(path);
        entries.push_back({path, cfg.nu, io::ConditionKind::viscosity});
    }
    io::save_manifest((std::filesystem::path(out_dir) / manifest_name).string(), entries);
    return paths;
}

}  // namespace shockfusion::burgers

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace shockfusion {

// ---------------------------------------------------------------------------
// Error taxonomy. Every failure mode carries a typed exception so callers can
// react per condition; all of them derive from Error for blanket handling.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedHeader : Error { using Error::Error; };
struct CountMismatch : Error { using Error::Error; };
struct NonNumericToken : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct DegenerateGrid : Error { using Error::Error; };
struct UnstableStep : Error { using Error::Error; };
struct RankDeficient : Error { using Error::Error; };
struct NoGradientSignal : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct StaleCache : Error { using Error::Error; };
struct NoStochasticLayers : Error { using Error::Error; };
struct TooFewGroups : Error { using Error::Error; };
struct DivergedTraining : Error { using Error::Error; };
struct ZeroReference : Error { using Error::Error; };
struct ZeroRange : Error { using Error::Error; };
struct EmptySelection : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Small numeric helpers shared across modules.
// ---------------------------------------------------------------------------

/// Median of a sample (copies; average of the two middle values for even n).
inline double median(std::vector<double> v) {
    if (v.empty()) throw Error("median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Linear-interpolation percentile, q in [0,100].
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw Error("percentile of empty sample");
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * double(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - double(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

struct AffineFit {
    double a0 = 0.0;
    double a1 = 0.0;
    double residual = 0.0;  // RMS of fit residuals
};

/// Least-squares affine fit y = a0 + a1*x. Throws RankDeficient when all x
/// coincide (no slope is identifiable).
inline AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeMismatch("fit_affine: size mismatch");
    if (x.size() < 2) throw RankDeficient("fit_affine: need at least two samples");
    const double n = double(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
    mx /= n; my /= n;
    double sxx = 0.0, sxy = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        scale = std::max(scale, std::abs(x[i]));
    }
    if (sxx <= 1e-30 * std::max(1.0, scale * scale))
        throw RankDeficient("fit_affine: all abscissae identical");
    AffineFit f;
    f.a1 = sxy / sxx;
    f.a0 = my - f.a1 * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.a0 - f.a1 * x[i];
        ss += r * r;
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

/// Huber-weighted IRLS refit of the affine map (robust calibration variant).
inline AffineFit fit_affine_huber(const std::vector<double>& x, const std::vector<double>& y,
                                  int iterations = 20) {
    AffineFit f = fit_affine(x, y);
    const std::size_t n = x.size();
    std::vector<double> w(n, 1.0);
    for (int it = 0; it < iterations; ++it) {
        // robust scale from the median absolute residual
        std::vector<double> absr(n);
        for (std::size_t i = 0; i < n; ++i) absr[i] = std::abs(y[i] - f.a0 - f.a1 * x[i]);
        double scale = 1.4826 * median(absr);
        if (scale < 1e-14) break;
        const double delta = 1.345 * scale;
        for (std::size_t i = 0; i < n; ++i) w[i] = absr[i] <= delta ? 1.0 : delta / absr[i];
        // weighted least squares
        double sw = 0, swx = 0, swy = 0;
        for (std::size_t i = 0; i < n; ++i) { sw += w[i]; swx += w[i] * x[i]; swy += w[i] * y[i]; }
        const double mx = swx / sw, my = swy / sw;
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sxx += w[i] * (x[i] - mx) * (x[i] - mx);
            sxy += w[i] * (x[i] - mx) * (y[i] - my);
        }
        if (sxx <= 1e-30) break;
        f.a1 = sxy / sxx;
        f.a0 = my - f.a1 * mx;
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.a0 - f.a1 * x[i];
        ss += r * r;
    }
    f.residual = std::sqrt(ss / double(n));
    return f;
}

/// Pool-adjacent-violators fit; returns fitted values. `increasing` selects
/// the monotone direction.
inline std::vector<double> isotonic_fit(const std::vector<double>& y, bool increasing) {
    std::vector<double> v = y;
    if (!increasing) for (auto& t : v) t = -t;
    std::vector<double> val, wt;
    std::vector<int> cnt;
    for (double t : v) {
        val.push_back(t); wt.push_back(1.0); cnt.push_back(1);
        while (val.size() > 1 && val[val.size() - 2] > val.back()) {
            const double merged = (val[val.size() - 2] * wt[wt.size() - 2] + val.back() * wt.back())
                                  / (wt[wt.size() - 2] + wt.back());
            wt[wt.size() - 2] += wt.back();
            cnt[cnt.size() - 2] += cnt.back();
            val[val.size() - 2] = merged;
            val.pop_back(); wt.pop_back(); cnt.pop_back();
        }
    }
    std::vector<double> out;
    for (std::size_t b = 0; b < val.size(); ++b)
        for (int k = 0; k < cnt[b]; ++k) out.push_back(increasing ? val[b] : -val[b]);
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic RNG substreams. One root seed fans out to independent named
// streams so individual components can be reproduced in isolation.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Seed for a named substream of a root seed.
inline std::uint64_t substream_seed(std::uint64_t root, const std::string& name) {
    return splitmix64(root ^ fnv1a64(name));
}

inline std::mt19937_64 make_rng(std::uint64_t root, const std::string& name) {
    return std::mt19937_64(substream_seed(root, name));
}

}  // namespace shockfusion

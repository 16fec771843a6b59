// Test-only reference implementations, kept independent of the library code
// they are used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

// Composite Simpson integration of f over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        int panels = 4000) {
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

// Standard normal cdf by numeric integration of the density.
inline double normal_cdf(double x) {
    if (x < -12.0) return 0.0;
    if (x > 12.0) return 1.0;
    return 0.5 + integrate(normal_pdf, 0.0, x, 8000);
}

// Bivariate normal cdf by dense two-dimensional quadrature of the density
// (composite 8-point Gauss-Legendre panels), |rho| < 1.
inline double bivariate_normal_cdf(double h, double k, double rho) {
    static const double gl_x[4] = {0.1834346424956498, 0.5255324099163290,
                                   0.7966664774136267, 0.9602898564975363};
    static const double gl_w[4] = {0.3626837833783620, 0.3137066458778873,
                                   0.2223810344533745, 0.1012285362903763};
    const double lo = -9.0;
    const double hx = std::min(h, 9.0), hy = std::min(k, 9.0);
    if (hx <= lo || hy <= lo) return 0.0;

    auto panel_points = [&](double a, double b) {
        std::vector<std::pair<double, double>> pts;  // (node, weight)
        const int panels = std::max(8, static_cast<int>(std::ceil((b - a) / 0.25)));
        const double w = (b - a) / panels;
        for (int p = 0; p < panels; ++p) {
            const double mid = a + (p + 0.5) * w;
            for (int i = 0; i < 4; ++i) {
                pts.emplace_back(mid - 0.5 * w * gl_x[i], 0.5 * w * gl_w[i]);
                pts.emplace_back(mid + 0.5 * w * gl_x[i], 0.5 * w * gl_w[i]);
            }
        }
        return pts;
    };
    const auto xs = panel_points(lo, hx);
    const auto ys = panel_points(lo, hy);
    const double c = 1.0 / (2.0 * 3.14159265358979323846 * std::sqrt(1.0 - rho * rho));
    double total = 0.0;
    for (const auto& [x, wx] : xs) {
        double row = 0.0;
        for (const auto& [y, wy] : ys) {
            const double q = (x * x - 2.0 * rho * x * y + y * y) / (2.0 * (1.0 - rho * rho));
            row += wy * std::exp(-q);
        }
        total += wx * row;
    }
    return c * total;
}

// Two-sided Kolmogorov-Smirnov statistic of a sample against a cdf.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, std::abs(f - (i + 1) / n));
        d = std::max(d, std::abs(f - i / n));
    }
    return d;
}

// Asymptotic critical value of the KS statistic at the 1% level.
inline double ks_critical_1pct(size_t n) { return 1.62762 / std::sqrt(static_cast<double>(n)); }

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace oracles

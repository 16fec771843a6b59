#include "taildep/stdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace taildep {

namespace {

void check_point(std::span<const double> x, int d) {
    if (static_cast<int>(x.size()) != d)
        throw std::invalid_argument("stdf: point dimension does not match data");
    for (double v : x) {
        if (!(v >= 0.0))
            throw std::invalid_argument("stdf: evaluation point must be in [0,inf)^d");
    }
}

// Per-row activation levels: row i enters the raw count of l'_{n,k}(a x)
// exactly when a > m_i, with m_i = min over the support of x of
// (n + 1 - R_ij) / (k x_j). The shifted variant replaces n + 1 by n + 1/2.
std::vector<double> activation_levels(const RankMatrix& ranks, double k,
                                      std::span<const double> x, double top) {
    const int n = ranks.n(), d = ranks.d();
    std::vector<double> m(n, std::numeric_limits<double>::infinity());
    for (int j = 0; j < d; ++j) {
        if (x[j] <= 0.0) continue;
        const double denom = k * x[j];
        for (int i = 0; i < n; ++i) {
            const double mij = (top - ranks(i, j)) / denom;
            if (mij < m[i]) m[i] = mij;
        }
    }
    return m;
}

double count_above(const std::vector<double>& sorted_m, double a) {
    // #{i : m_i < a}
    return static_cast<double>(
        std::lower_bound(sorted_m.begin(), sorted_m.end(), a) - sorted_m.begin());
}

double power_kernel(double t, double tau) { return (tau + 1.0) * std::pow(t, tau); }

void check_tau(double tau) {
    if (!(tau > -0.5))
        throw std::invalid_argument("power kernel exponent tau must exceed -1/2");
}

}  // namespace

void TailFraction::validate(int n) const {
    if (k < 1 || k > n)
        throw std::invalid_argument("tail fraction k must satisfy 1 <= k <= n");
    if (k1 && !(*k1 > k && *k1 <= n))
        throw std::invalid_argument("tail fraction k1 must satisfy k < k1 <= n");
}

RankMatrix compute_ranks(const DataMatrix& data) {
    const int n = data.n(), d = data.d();
    if (n < 2 || d < 1)
        throw std::invalid_argument("compute_ranks: need n >= 2 observations");
    for (double v : data.data())
        if (!std::isfinite(v))
            throw std::invalid_argument("compute_ranks: non-finite data entry");

    RankMatrix ranks(n, d);
    std::vector<int> idx(n);
    for (int j = 0; j < d; ++j) {
        std::iota(idx.begin(), idx.end(), 0);
        // Stable sort: tied values keep original row order, so the earlier
        // occurrence receives the lower rank.
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return data(a, j) < data(b, j);
        });
        for (int r = 0; r < n; ++r) ranks(idx[r], j) = r + 1;
    }
    return ranks;
}

StdfEstimate empirical_stdf(const RankMatrix& ranks, const TailFraction& tf,
                            std::span<const double> x, bool shifted) {
    tf.validate(ranks.n());
    check_point(x, ranks.d());
    const double top = ranks.n() + (shifted ? 0.5 : 1.0);
    const int n = ranks.n(), d = ranks.d();
    int count = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            if (x[j] > 0.0 && ranks(i, j) > top - tf.k * x[j]) {
                ++count;
                break;
            }
        }
    }
    return {std::vector<double>(x.begin(), x.end()),
            static_cast<double>(count) / tf.k,
            shifted ? StdfKind::shifted : StdfKind::raw};
}

double rescaled_raw_stdf(const RankMatrix& ranks, int k, double a,
                         std::span<const double> x) {
    if (!(a > 0.0)) throw std::invalid_argument("rescaled_raw_stdf: a must be > 0");
    check_point(x, ranks.d());
    const int n = ranks.n(), d = ranks.d();
    const double top = n + 1.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            if (x[j] > 0.0 && ranks(i, j) > top - k * a * x[j]) {
                ++count;
                break;
            }
        }
    }
    return count / (a * k);
}

StdfEstimate kernel_stdf(const RankMatrix& ranks, const TailFraction& tf,
                         std::span<const double> x, double tau) {
    check_tau(tau);
    tf.validate(ranks.n());
    check_point(x, ranks.d());
    const int k = tf.k;
    std::vector<double> m = activation_levels(ranks, k, x, ranks.n() + 1.0);
    std::sort(m.begin(), m.end());
    double sum = 0.0;
    for (int j = 1; j <= k; ++j) {
        const double a = static_cast<double>(j) / (k + 1);
        sum += power_kernel(a, tau) * count_above(m, a) / (a * k);
    }
    return {std::vector<double>(x.begin(), x.end()), sum / k, StdfKind::kernel};
}

RateEstimate default_rate_estimator(const RankMatrix& ranks, int k1,
                                    std::span<const double> x) {
    check_point(x, ranks.d());
    const int j_lo = std::max(2, static_cast<int>(std::lround(0.2 * k1)));
    const int j_hi = static_cast<int>(std::lround(0.95 * k1));
    if (j_hi - j_lo < 8)
        throw estimation_error("rate estimator: regression window too small");

    // Shifted empirical stdf at all levels j via the sorted activation levels.
    std::vector<double> m = activation_levels(ranks, 1.0, x, ranks.n() + 0.5);
    std::sort(m.begin(), m.end());
    auto level_value = [&](int j) { return count_above(m, static_cast<double>(j)) / j; };

    const double ref = level_value(k1);
    std::vector<double> drift, rel;
    for (int j = j_lo; j <= j_hi; ++j) {
        drift.push_back(level_value(j) - ref);
        rel.push_back(static_cast<double>(j) / k1);
    }

    // Profile A for each candidate exponent g on a log-spaced grid, keep the
    // pair with the smallest weighted residual sum of squares. The weights
    // j/k1 reflect the level-j estimator variance; the grid is kept narrow
    // around one because the drift data pin the exponent only weakly and a
    // free exponent inflates the corrected estimator's variance.
    double best_gamma = 1.0, best_alpha = 0.0;
    double best_sse = std::numeric_limits<double>::infinity();
    const int grid = 9;
    for (int gi = 0; gi < grid; ++gi) {
        const double g = 0.8 * std::pow(1.3 / 0.8, gi / (grid - 1.0));
        double svv = 0.0, svd = 0.0;
        for (size_t t = 0; t < rel.size(); ++t) {
            const double v = std::pow(rel[t], g) - 1.0;
            svv += rel[t] * v * v;
            svd += rel[t] * v * drift[t];
        }
        if (svv <= 0.0) continue;
        const double a = svd / svv;
        double sse = 0.0;
        for (size_t t = 0; t < rel.size(); ++t) {
            const double r = drift[t] - a * (std::pow(rel[t], g) - 1.0);
            sse += rel[t] * r * r;
        }
        if (sse < best_sse) {
            best_sse = sse;
            best_gamma = g;
            best_alpha = a;
        }
    }
    if (!std::isfinite(best_sse))
        throw estimation_error("rate estimator: degenerate regression");
    return {best_alpha, -best_gamma};
}

StdfEstimate bias_corrected_stdf(const RankMatrix& ranks, const TailFraction& tf,
                                 std::span<const double> x, double tau,
                                 const RateEstimator& rate) {
    check_tau(tau);
    tf.validate(ranks.n());
    if (!tf.k1)
        throw std::invalid_argument("bias_corrected_stdf: k1 is required");
    check_point(x, ranks.d());

    const int k = tf.k;
    const RateEstimate re = rate(ranks, *tf.k1, x);
    if (!std::isfinite(re.alpha) || !std::isfinite(re.beta))
        throw estimation_error("bias_corrected_stdf: non-finite rate estimates");

    double kernel_mass = 0.0, correction_mass = 0.0;
    for (int j = 1; j <= k; ++j) {
        const double a = static_cast<double>(j) / (k + 1);
        const double w = power_kernel(a, tau);
        kernel_mass += w;
        correction_mass += w * std::pow(a, -re.beta);
    }
    kernel_mass /= k;
    correction_mass /= k;

    const double breve = kernel_stdf(ranks, {tf.k, {}}, x, tau).value;
    const double ratio = static_cast<double>(*tf.k1) / k;
    const double value =
        (breve - std::pow(ratio, re.beta) * re.alpha * correction_mass) / kernel_mass;
    return {std::vector<double>(x.begin(), x.end()), value, StdfKind::bias_corrected};
}

double variance_factor(double tau) {
    check_tau(tau);
    return (2.0 * tau + 2.0) / (2.0 * tau + 1.0);
}

DataMatrix pareto_transform(const RankMatrix& ranks) {
    const int n = ranks.n(), d = ranks.d();
    DataMatrix out(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out(i, j) = n / (n + 0.5 - ranks(i, j));
    return out;
}

}  // namespace taildep

#include "taildep/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace taildep {

namespace {

void check_nonnegative_point(std::span<const double> x) {
    for (double v : x)
        if (!(v >= 0.0))
            throw std::invalid_argument("stdf argument must be in [0,inf)^d");
}

}  // namespace

std::vector<double> TailModel::analytic_gradient_x(std::span<const double>,
                                                   std::span<const double>) const {
    throw std::logic_error("model has no analytic gradient");
}

std::vector<double> finite_diff_gradient_x(const TailModel& model,
                                           std::span<const double> theta,
                                           std::span<const double> c) {
    const int d = model.dim();
    std::vector<double> g(d, 0.0);
    std::vector<double> xp(c.begin(), c.end()), xm(c.begin(), c.end());
    for (int j = 0; j < d; ++j) {
        if (!(c[j] > 0.0)) continue;
        const double h = 1e-5 * std::max(c[j], 1.0);
        xp[j] = c[j] + h;
        if (c[j] - h > 0.0) {
            xm[j] = c[j] - h;
            g[j] = (model.eval(xp, theta) - model.eval(xm, theta)) / (2.0 * h);
        } else {
            g[j] = (model.eval(xp, theta) - model.eval(c, theta)) / h;
        }
        xp[j] = c[j];
        xm[j] = c[j];
    }
    return g;
}

std::vector<double> stdf_gradient_x(const TailModel& model,
                                    std::span<const double> theta,
                                    std::span<const double> c) {
    if (model.has_analytic_gradient_x()) return model.analytic_gradient_x(c, theta);
    return finite_diff_gradient_x(model, theta, c);
}

// ---------------------------------------------------------------------------
// Logistic family

double logistic_stdf(std::span<const double> x, double theta) {
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("logistic theta must lie in (0,1]");
    check_nonnegative_point(x);
    double xm = 0.0, sum = 0.0;
    for (double v : x) {
        xm = std::max(xm, v);
        sum += v;
    }
    if (xm == 0.0) return 0.0;
    if (theta == 1.0) return sum;
    // Scale by the maximum so the powers stay in [0,1].
    double s = 0.0;
    for (double v : x)
        if (v > 0.0) s += std::pow(v / xm, 1.0 / theta);
    return xm * std::pow(s, theta);
}

LogisticModel::LogisticModel(int d) : d_(d) {
    if (d < 2) throw std::invalid_argument("LogisticModel: need d >= 2");
}

std::vector<ParamBound> LogisticModel::param_box() const {
    return {{0.0, 1.0, "theta"}};
}

double LogisticModel::eval(std::span<const double> x,
                           std::span<const double> theta) const {
    if (static_cast<int>(x.size()) != d_)
        throw std::invalid_argument("LogisticModel: wrong point dimension");
    return logistic_stdf(x, theta[0]);
}

std::vector<double> LogisticModel::analytic_gradient_x(
    std::span<const double> x, std::span<const double> theta) const {
    const double th = theta[0];
    if (!(th > 0.0 && th <= 1.0))
        throw std::invalid_argument("logistic theta must lie in (0,1]");
    std::vector<double> g(d_, 0.0);
    if (th == 1.0) {
        std::fill(g.begin(), g.end(), 1.0);
        return g;
    }
    double xm = 0.0;
    for (double v : x) xm = std::max(xm, v);
    if (xm == 0.0) return g;
    double s = 0.0;
    for (double v : x)
        if (v > 0.0) s += std::pow(v / xm, 1.0 / th);
    for (int j = 0; j < d_; ++j) {
        if (x[j] > 0.0)
            g[j] = std::pow(s, th - 1.0) * std::pow(x[j] / xm, (1.0 - th) / th);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Max-linear models

void MaxLinearCoeffs::validate() const {
    if (d < 1 || r < 1 || b.rows() != d || b.cols() != r)
        throw std::invalid_argument("MaxLinearCoeffs: inconsistent dimensions");
    for (int j = 0; j < d; ++j) {
        double row = 0.0;
        for (int t = 0; t < r; ++t) {
            if (!(b(j, t) >= 0.0))
                throw std::invalid_argument("MaxLinearCoeffs: negative loading");
            row += b(j, t);
        }
        if (std::abs(row - 1.0) > 1e-12)
            throw std::invalid_argument("MaxLinearCoeffs: row sums must equal one");
    }
    for (int t = 0; t < r; ++t) {
        double col = 0.0;
        for (int j = 0; j < d; ++j) col += b(j, t);
        if (!(col > 0.0))
            throw std::invalid_argument("MaxLinearCoeffs: zero column sum");
    }
}

double maxlinear_stdf(std::span<const double> x, const MaxLinearCoeffs& coeffs) {
    if (static_cast<int>(x.size()) != coeffs.d)
        throw std::invalid_argument("maxlinear_stdf: wrong point dimension");
    check_nonnegative_point(x);
    double total = 0.0;
    for (int t = 0; t < coeffs.r; ++t) {
        double m = 0.0;
        for (int j = 0; j < coeffs.d; ++j) m = std::max(m, coeffs.b(j, t) * x[j]);
        total += m;
    }
    return total;
}

int Dag::param_dim() const {
    int p = 0;
    for (const DagEdge& e : edges) p = std::max(p, e.param_index + 1);
    return p;
}

void Dag::validate() const {
    if (d < 1) throw config_error("dag: need at least one node");
    const int p = param_dim();
    std::vector<bool> used(p, false);
    for (const DagEdge& e : edges) {
        if (e.parent < 0 || e.parent >= d || e.child < 0 || e.child >= d ||
            e.parent == e.child)
            throw config_error("dag: invalid edge endpoints");
        if (e.param_index < 0 || e.param_index >= p)
            throw config_error("dag: invalid parameter index");
        used[e.param_index] = true;
    }
    if (!std::all_of(used.begin(), used.end(), [](bool b) { return b; }))
        throw config_error("dag: parameter indices must cover 0..p-1");
    topological_order();
}

std::vector<int> Dag::topological_order() const {
    std::vector<int> indeg(d, 0);
    std::vector<std::vector<int>> children(d);
    for (const DagEdge& e : edges) {
        ++indeg[e.child];
        children[e.parent].push_back(e.child);
    }
    std::vector<int> frontier, order;
    for (int j = 0; j < d; ++j)
        if (indeg[j] == 0) frontier.push_back(j);
    while (!frontier.empty()) {
        std::sort(frontier.begin(), frontier.end());
        const int j = frontier.front();
        frontier.erase(frontier.begin());
        order.push_back(j);
        for (int c : children[j])
            if (--indeg[c] == 0) frontier.push_back(c);
    }
    if (static_cast<int>(order.size()) != d)
        throw config_error("dag: graph contains a cycle");
    return order;
}

std::vector<std::string> Dag::param_names() const {
    std::vector<std::string> names(param_dim());
    for (const DagEdge& e : edges)
        if (names[e.param_index].empty()) names[e.param_index] = e.param_name;
    return names;
}

MaxLinearCoeffs dag_to_coeffs(const Dag& dag, std::span<const double> theta) {
    if (static_cast<int>(theta.size()) != dag.param_dim())
        throw std::invalid_argument("dag_to_coeffs: wrong parameter count");
    for (double u : theta)
        if (!(u > 0.0))
            throw std::invalid_argument("dag_to_coeffs: edge parameters must be > 0");

    const int d = dag.d;
    std::vector<std::vector<std::pair<int, double>>> parents(d);  // (parent, u_kj)
    for (const DagEdge& e : dag.edges)
        parents[e.child].emplace_back(e.parent, theta[e.param_index]);

    MaxLinearCoeffs out{d, d, Matrix(d, d)};
    for (int j : dag.topological_order()) {
        if (parents[j].empty()) {
            out.b(j, j) = 1.0;
            continue;
        }
        double other = 0.0;
        for (int t = 0; t < d; ++t) {
            double m = 0.0;
            for (const auto& [k, u] : parents[j]) m = std::max(m, u * out.b(k, t));
            out.b(j, t) = m;
            other += m;
        }
        const double uj = 1.0 - other;
        if (uj < -1e-12)
            throw infeasible_parameter_error(
                "dag_to_coeffs: row sum exceeds one at node " + std::to_string(j + 1),
                j + 1);
        out.b(j, j) = std::max(uj, 0.0);
    }
    return out;
}

MaxLinearDagModel::MaxLinearDagModel(Dag dag) : dag_(std::move(dag)) {
    dag_.validate();
}

std::vector<ParamBound> MaxLinearDagModel::param_box() const {
    std::vector<ParamBound> box;
    const std::vector<std::string> names = dag_.param_names();
    box.reserve(names.size());
    for (const std::string& name : names) box.push_back({0.0, 1.0, name});
    return box;
}

namespace {

// The coefficient matrix depends on theta only; one entry per thread is
// enough because evaluation sweeps many points at a fixed theta.
struct DagCoeffCache {
    const Dag* dag = nullptr;
    std::vector<double> theta;
    MaxLinearCoeffs coeffs;
};
thread_local DagCoeffCache dag_cache;

}  // namespace

double MaxLinearDagModel::eval(std::span<const double> x,
                               std::span<const double> theta) const {
    if (dag_cache.dag != &dag_ ||
        !std::equal(theta.begin(), theta.end(), dag_cache.theta.begin(),
                    dag_cache.theta.end())) {
        dag_cache.coeffs = dag_to_coeffs(dag_, theta);
        dag_cache.dag = &dag_;
        dag_cache.theta.assign(theta.begin(), theta.end());
    }
    return maxlinear_stdf(x, dag_cache.coeffs);
}

// ---------------------------------------------------------------------------
// Brown-Resnick / Huesler-Reiss

GridLocations GridLocations::unit_grid(int rows, int cols) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("unit_grid: rows and cols must be >= 1");
    GridLocations g;
    g.s.reserve(static_cast<size_t>(rows) * cols);
    // Centred at the centroid so the Gaussian increments stay small across
    // the grid during simulation; pair distances are unaffected.
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            g.s.push_back({c - 0.5 * (cols - 1), r - 0.5 * (rows - 1)});
    return g;
}

double GridLocations::distance(int i, int j) const {
    return std::hypot(s[i][0] - s[j][0], s[i][1] - s[j][1]);
}

void GridLocations::validate() const {
    for (size_t i = 0; i < s.size(); ++i)
        for (size_t j = i + 1; j < s.size(); ++j)
            if (s[i][0] == s[j][0] && s[i][1] == s[j][1])
                throw std::invalid_argument("grid locations must be distinct");
}

namespace {

void check_br_params(double alpha, double rho) {
    if (!(alpha > 0.0 && alpha <= 2.0))
        throw std::invalid_argument("variogram exponent alpha must lie in (0,2]");
    if (!(rho > 0.0))
        throw std::invalid_argument("variogram scale rho must be > 0");
}

}  // namespace

double variogram(std::span<const double> s, double alpha, double rho) {
    check_br_params(alpha, rho);
    double norm2 = 0.0;
    for (double v : s) norm2 += v * v;
    if (norm2 == 0.0) return 0.0;
    return std::pow(std::sqrt(norm2) / rho, alpha);
}

double br_pair_stdf(double x1, double x2, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("br_pair_stdf: gamma must be > 0");
    if (!(x1 >= 0.0) || !(x2 >= 0.0))
        throw std::invalid_argument("br_pair_stdf: arguments must be >= 0");
    if (x1 == 0.0) return x2;
    if (x2 == 0.0) return x1;
    const double a = std::sqrt(2.0 * gamma);
    const double lr = std::log(x1 / x2);
    return x1 * std_normal_cdf(0.5 * a + lr / a) + x2 * std_normal_cdf(0.5 * a - lr / a);
}

namespace {

// Trivariate normal cdf by conditioning on the third coordinate and
// integrating the bivariate cdf with 64-node Gauss-Legendre. Only the
// Brown-Resnick covariance expansion needs this; it is not part of the
// public numerics surface.
double tri_normal_cdf(double h1, double h2, double h3, double r12, double r13,
                      double r23) {
    const double lo = -8.5;
    const double hi = std::min(h3, 8.5);
    if (hi <= lo) return 0.0;
    const double s13 = std::sqrt(std::max(1.0 - r13 * r13, 0.0));
    const double s23 = std::sqrt(std::max(1.0 - r23 * r23, 0.0));
    const double denom = std::max(s13 * s23, 1e-15);
    const double rc = std::clamp((r12 - r13 * r23) / denom, -1.0, 1.0);
    auto nodes = gauss_legendre_nodes64();
    auto weights = gauss_legendre_weights64();
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    double sum = 0.0;
    for (size_t i = 0; i < nodes.size(); ++i) {
        const double z = mid + half * nodes[i];
        const double a1 = (h1 - r13 * z) / std::max(s13, 1e-15);
        const double a2 = (h2 - r23 * z) / std::max(s23, 1e-15);
        sum += weights[i] * std_normal_pdf(z) * bivariate_normal_cdf(a1, a2, rc);
    }
    return std::clamp(half * sum, 0.0, 1.0);
}

// General-argument Huesler-Reiss stdf for one to four positive coordinates.
// xs holds the positive values, g the pairwise variogram values.
double hr_stdf(std::span<const double> xs, const double g[4][4]) {
    const int m = static_cast<int>(xs.size());
    if (m == 1) return xs[0];
    if (m == 2) return br_pair_stdf(xs[0], xs[1], g[0][1]);

    auto eta = [&](int j, int i) {
        return std::sqrt(0.5 * g[j][i]) + std::log(xs[j] / xs[i]) / std::sqrt(2.0 * g[j][i]);
    };
    auto corr = [&](int j, int i, int k) {
        return std::clamp((g[j][i] + g[j][k] - g[i][k]) /
                              (2.0 * std::sqrt(g[j][i] * g[j][k])),
                          -1.0, 1.0);
    };

    double total = 0.0;
    if (m == 3) {
        for (int j = 0; j < 3; ++j) {
            const int i = (j + 1) % 3, k = (j + 2) % 3;
            total += xs[j] * bivariate_normal_cdf(eta(j, i), eta(j, k), corr(j, i, k));
        }
        return total;
    }
    for (int j = 0; j < 4; ++j) {
        int o[3], t = 0;
        for (int i = 0; i < 4; ++i)
            if (i != j) o[t++] = i;
        total += xs[j] * tri_normal_cdf(eta(j, o[0]), eta(j, o[1]), eta(j, o[2]),
                                        corr(j, o[0], o[1]), corr(j, o[0], o[2]),
                                        corr(j, o[1], o[2]));
    }
    return total;
}

// Memoization of extremal coefficients (all-ones arguments) keyed by the
// congruence class of the location subset. The covariance matrix of a pair
// point set re-evaluates the same handful of geometries hundreds of times
// per theta.
struct BrEvalCache {
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double rho = std::numeric_limits<double>::quiet_NaN();
    std::unordered_map<std::string, double> values;
};
thread_local BrEvalCache br_cache;

std::string congruence_key(std::span<const int> subset, const GridLocations& locs) {
    const int m = static_cast<int>(subset.size());
    long long q[4][4] = {};
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            const double dx = locs.s[subset[i]][0] - locs.s[subset[j]][0];
            const double dy = locs.s[subset[i]][1] - locs.s[subset[j]][1];
            q[i][j] = q[j][i] = std::llround((dx * dx + dy * dy) * 1e9);
        }
    }
    int perm[4];
    std::iota(perm, perm + m, 0);
    std::vector<long long> best;
    do {
        std::vector<long long> cur;
        cur.reserve(m * (m - 1) / 2);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) cur.push_back(q[perm[i]][perm[j]]);
        if (best.empty() || cur < best) best = cur;
    } while (std::next_permutation(perm, perm + m));
    std::string key(reinterpret_cast<const char*>(best.data()),
                    best.size() * sizeof(long long));
    key.push_back(static_cast<char>(m));
    return key;
}

double br_subset_coeff(std::span<const int> subset, const GridLocations& locs,
                       double alpha, double rho) {
    const int m = static_cast<int>(subset.size());
    if (m == 1) return 1.0;
    if (br_cache.alpha != alpha || br_cache.rho != rho) {
        br_cache.alpha = alpha;
        br_cache.rho = rho;
        br_cache.values.clear();
    }
    const std::string key = congruence_key(subset, locs);
    if (auto it = br_cache.values.find(key); it != br_cache.values.end())
        return it->second;

    double g[4][4] = {};
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            g[i][j] = g[j][i] =
                std::pow(locs.distance(subset[i], subset[j]) / rho, alpha);
    const std::vector<double> ones(m, 1.0);
    const double value = hr_stdf(ones, g);
    br_cache.values.emplace(key, value);
    return value;
}

}  // namespace

double br_extremal_coeff(std::span<const int> J, const GridLocations& locs,
                         double alpha, double rho) {
    check_br_params(alpha, rho);
    if (J.size() < 1 || J.size() > 3)
        throw std::invalid_argument(
            "br_extremal_coeff: only subsets of size 2 or 3 are supported");
    for (int j : J)
        if (j < 0 || j >= locs.size())
            throw std::invalid_argument("br_extremal_coeff: index out of range");
    std::vector<int> s(J.begin(), J.end());
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end())
        throw std::invalid_argument("br_extremal_coeff: duplicate indices");
    return br_subset_coeff(s, locs, alpha, rho);
}

BrownResnickModel::BrownResnickModel(GridLocations locs) : locs_(std::move(locs)) {
    locs_.validate();
    if (locs_.size() < 2)
        throw std::invalid_argument("BrownResnickModel: need at least two locations");
}

std::vector<ParamBound> BrownResnickModel::param_box() const {
    return {{0.0, 2.0, "alpha"},
            {0.0, std::numeric_limits<double>::infinity(), "rho"}};
}

double BrownResnickModel::eval(std::span<const double> x,
                               std::span<const double> theta) const {
    if (static_cast<int>(x.size()) != locs_.size())
        throw std::invalid_argument("BrownResnickModel: wrong point dimension");
    const double alpha = theta[0], rho = theta[1];
    check_br_params(alpha, rho);
    check_nonnegative_point(x);

    int support[4];
    double xs[4];
    int m = 0;
    bool indicator = true;
    for (int j = 0; j < locs_.size(); ++j) {
        if (x[j] > 0.0) {
            if (m == 4)
                throw estimation_error(
                    "BrownResnickModel: points with more than four positive "
                    "coordinates are not supported");
            support[m] = j;
            xs[m] = x[j];
            if (x[j] != 1.0) indicator = false;
            ++m;
        }
    }
    if (m == 0) return 0.0;
    if (m == 1) return xs[0];
    if (indicator)
        return br_subset_coeff(std::span<const int>(support, m), locs_, alpha, rho);

    double g[4][4] = {};
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            g[i][j] = g[j][i] =
                std::pow(locs_.distance(support[i], support[j]) / rho, alpha);
    return hr_stdf(std::span<const double>(xs, m), g);
}

}  // namespace taildep

#include "taildep/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace taildep {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
    return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    std::vector<double> y(a.rows(), 0.0);
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

SymMatrix SymMatrix::identity(int n) {
    SymMatrix m(n);
    for (int i = 0; i < n; ++i) m.set(i, i, 1.0);
    return m;
}

SymMatrix SymMatrix::from_matrix(const Matrix& a) {
    SymMatrix m(a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j <= i; ++j) m.set(i, j, 0.5 * (a(i, j) + a(j, i)));
    return m;
}

double SymMatrix::trace() const {
    double t = 0.0;
    for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
}

Matrix SymMatrix::to_matrix() const {
    Matrix m(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) m(i, j) = (*this)(i, j);
    return m;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rule

namespace {

struct GaussLegendre64 {
    std::vector<double> nodes;
    std::vector<double> weights;

    GaussLegendre64() {
        const int n = 64;
        nodes.resize(n);
        weights.resize(n);
        // Newton iteration on P_n, symmetric roots.
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
                }
                pp = n * (x * p0 - p1) / (x * x - 1.0);
                const double dx = p0 / pp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
        }
    }
};

const GaussLegendre64& gl64() {
    static const GaussLegendre64 rule;
    return rule;
}

}  // namespace

std::span<const double> gauss_legendre_nodes64() { return gl64().nodes; }
std::span<const double> gauss_legendre_weights64() { return gl64().weights; }

// ---------------------------------------------------------------------------
// Normal distribution

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

double bivariate_normal_cdf(double h, double k, double rho) {
    if (std::isnan(h) || std::isnan(k) || std::isnan(rho))
        return std::numeric_limits<double>::quiet_NaN();
    if (std::abs(rho) > 1.0)
        throw std::invalid_argument("bivariate_normal_cdf: |rho| > 1");
    if (h == -std::numeric_limits<double>::infinity() ||
        k == -std::numeric_limits<double>::infinity())
        return 0.0;
    if (h == std::numeric_limits<double>::infinity()) return std_normal_cdf(k);
    if (k == std::numeric_limits<double>::infinity()) return std_normal_cdf(h);

    // Phi2(h,k;rho) = Phi(h)Phi(k) + (1/2pi) int_0^asin(rho) exp(-q(u)) du,
    // q(u) = ((h-k)^2 + 2hk(1-sin u)) / (2(1-sin u)(1+sin u)); the arcsine
    // substitution removes the endpoint singularity of the classical
    // integral over the correlation parameter.
    const double upper = std::asin(rho);
    const double hk2 = (h - k) * (h - k);
    const double mid = 0.5 * upper, half = 0.5 * upper;
    auto nodes = gauss_legendre_nodes64();
    auto weights = gauss_legendre_weights64();
    double integral = 0.0;
    for (size_t i = 0; i < nodes.size(); ++i) {
        const double u = mid + half * nodes[i];
        const double s = std::sin(u);
        const double one_minus = 1.0 - s, one_plus = 1.0 + s;
        const double q = (hk2 + 2.0 * h * k * one_minus) / (2.0 * one_minus * one_plus);
        integral += weights[i] * std::exp(-q);
    }
    integral *= half / (2.0 * kPi);
    const double result = std_normal_cdf(h) * std_normal_cdf(k) + integral;
    return std::clamp(result, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Chi-square via the regularized incomplete gamma function

namespace {

// Lower regularized gamma P(a, x) by series expansion (x < a + 1).
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 1000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma Q(a, x) by Lentz continued fraction (x >= a + 1).
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    return (x < a + 1.0) ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    return (x < a + 1.0) ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

double chisq_pdf(double x, int df) {
    if (x <= 0.0) return 0.0;
    const double a = 0.5 * df;
    return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a));
}

}  // namespace

double chisq_sf(double x, int df) {
    if (df < 1) throw std::invalid_argument("chisq_sf: df must be >= 1");
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (x < 0.0) throw std::invalid_argument("chisq_sf: x must be >= 0");
    return gamma_q(0.5 * df, 0.5 * x);
}

double chisq_cdf(double x, int df) {
    if (df < 1) throw std::invalid_argument("chisq_cdf: df must be >= 1");
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (x < 0.0) throw std::invalid_argument("chisq_cdf: x must be >= 0");
    return gamma_p(0.5 * df, 0.5 * x);
}

double chisq_quantile(double p, int df) {
    if (df < 1) throw std::invalid_argument("chisq_quantile: df must be >= 1");
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("chisq_quantile: p must lie in (0,1)");

    // Standard normal quantile by Newton, for the Wilson-Hilferty start.
    double zp = 0.0;
    for (int it = 0; it < 60; ++it) {
        const double d = std_normal_pdf(zp);
        if (d <= 0.0) break;
        const double step = (std_normal_cdf(zp) - p) / d;
        zp -= step;
        if (std::abs(step) < 1e-14) break;
    }
    double x = df * std::pow(1.0 - 2.0 / (9.0 * df) + zp * std::sqrt(2.0 / (9.0 * df)), 3);
    if (!(x > 0.0)) x = 0.5 * df;

    double lo = 0.0, hi = std::max(4.0 * x, 10.0 * df + 50.0);
    while (chisq_cdf(hi, df) < p) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double f = chisq_cdf(x, df) - p;
        if (f > 0.0) hi = x; else lo = x;
        const double d = chisq_pdf(x, df);
        double next = (d > 0.0) ? x - f / d : 0.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-12 * (1.0 + x)) { x = next; break; }
        x = next;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)

EigenDecomp sym_eigen(const SymMatrix& m) {
    if (!all_finite(m.data()))
        throw std::invalid_argument("sym_eigen: non-finite matrix entries");
    const int n = m.dim();
    std::vector<double> a(m.data().begin(), m.data().end());
    // Eigenvectors as rows while iterating (contiguous rotations), transposed
    // at the end.
    std::vector<double> v(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;

    auto A = [&](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };

    double norm = 0.0;
    for (double x : m.data()) norm += x * x;
    norm = std::sqrt(norm);
    const double tol = 1e-15 * std::max(norm, 1e-300);

    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        off = std::sqrt(2.0 * off);
        if (off <= tol) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                const double app = A(p, p), aqq = A(q, q);
                A(p, p) = app - t * apq;
                A(q, q) = aqq + t * apq;
                A(p, q) = 0.0;
                A(q, p) = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (i == p || i == q) continue;
                    const double aip = A(i, p), aiq = A(i, q);
                    A(i, p) = aip - s * (aiq + tau * aip);
                    A(i, q) = aiq + s * (aip - tau * aiq);
                    A(p, i) = A(i, p);
                    A(q, i) = A(i, q);
                }
                double* vp = &v[static_cast<size_t>(p) * n];
                double* vq = &v[static_cast<size_t>(q) * n];
                for (int i = 0; i < n; ++i) {
                    const double xp = vp[i], xq = vq[i];
                    vp[i] = xp - s * (xq + tau * xp);
                    vq[i] = xq + s * (xp - tau * xq);
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return A(i, i) > A(j, j); });

    EigenDecomp dec;
    dec.values.resize(n);
    dec.vectors = Matrix(n, n);
    for (int j = 0; j < n; ++j) {
        dec.values[j] = A(order[j], order[j]);
        const double* row = &v[static_cast<size_t>(order[j]) * n];
        for (int i = 0; i < n; ++i) dec.vectors(i, j) = row[i];
    }
    return dec;
}

// ---------------------------------------------------------------------------
// SPD solve / inverse (Cholesky)

namespace {

// Lower-triangular Cholesky factor; returns false when a pivot drops below
// the scale-relative tolerance.
bool cholesky(const SymMatrix& m, std::vector<double>& l, double* min_pivot) {
    const int n = m.dim();
    const double tol = 1e-10 * std::max(m.trace(), 0.0) / std::max(n, 1);
    l.assign(static_cast<size_t>(n) * n, 0.0);
    auto L = [&](int i, int j) -> double& { return l[static_cast<size_t>(i) * n + j]; };
    *min_pivot = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
        double d = m(j, j);
        for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        *min_pivot = std::min(*min_pivot, d);
        if (!(d > tol)) return false;
        L(j, j) = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / L(j, j);
        }
    }
    return true;
}

[[noreturn]] void throw_not_spd(const SymMatrix& m) {
    // Report the actual smallest eigenvalue; this path is cold.
    double smallest = std::numeric_limits<double>::quiet_NaN();
    if (all_finite(m.data())) {
        const EigenDecomp dec = sym_eigen(m);
        smallest = dec.values.back();
    }
    throw singular_matrix_error(
        "matrix is not positive definite within tolerance (smallest eigenvalue " +
            std::to_string(smallest) + ")",
        smallest);
}

std::vector<double> cholesky_solve_one(const std::vector<double>& l, int n,
                                       std::span<const double> rhs) {
    auto L = [&](int i, int j) { return l[static_cast<size_t>(i) * n + j]; };
    std::vector<double> y(n), x(n);
    for (int i = 0; i < n; ++i) {
        double s = rhs[i];
        for (int k = 0; k < i; ++k) s -= L(i, k) * y[k];
        y[i] = s / L(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < n; ++k) s -= L(k, i) * x[k];
        x[i] = s / L(i, i);
    }
    return x;
}

}  // namespace

std::vector<double> spd_solve(const SymMatrix& m, std::span<const double> rhs) {
    if (!all_finite(m.data()))
        throw std::invalid_argument("spd_solve: non-finite matrix entries");
    std::vector<double> l;
    double min_pivot = 0.0;
    if (!cholesky(m, l, &min_pivot)) throw_not_spd(m);
    return cholesky_solve_one(l, m.dim(), rhs);
}

Matrix spd_solve(const SymMatrix& m, const Matrix& rhs) {
    if (!all_finite(m.data()))
        throw std::invalid_argument("spd_solve: non-finite matrix entries");
    std::vector<double> l;
    double min_pivot = 0.0;
    if (!cholesky(m, l, &min_pivot)) throw_not_spd(m);
    const int n = m.dim();
    Matrix x(n, rhs.cols());
    std::vector<double> col(n);
    for (int j = 0; j < rhs.cols(); ++j) {
        for (int i = 0; i < n; ++i) col[i] = rhs(i, j);
        const std::vector<double> sol = cholesky_solve_one(l, n, col);
        for (int i = 0; i < n; ++i) x(i, j) = sol[i];
    }
    return x;
}

SymMatrix spd_inverse(const SymMatrix& m) {
    const Matrix inv = spd_solve(m, Matrix::identity(m.dim()));
    return SymMatrix::from_matrix(inv);
}

}  // namespace taildep

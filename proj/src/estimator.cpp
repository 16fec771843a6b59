#include "taildep/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace taildep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int positive_count(std::span<const double> x) {
    int c = 0;
    for (double v : x)
        if (v > 0.0) ++c;
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Point sets

void PointSet::validate() const {
    if (d < 2) throw config_error("point set: dimension must be >= 2");
    if (points.empty()) throw config_error("point set: no points");
    for (const auto& c : points) {
        if (static_cast<int>(c.size()) != d)
            throw config_error("point set: inconsistent point dimension");
        for (double v : c)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw config_error("point set: coordinates must be finite and >= 0");
        if (positive_count(c) < 2)
            throw config_error("point set: every point needs >= 2 positive coordinates");
    }
}

PointSet grid_point_set(int d, std::span<const double> levels,
                        std::span<const int> nonzero_counts) {
    if (d < 2) throw config_error("grid_point_set: d must be >= 2");
    std::vector<double> lv(levels.begin(), levels.end());
    std::sort(lv.begin(), lv.end());
    lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
    std::vector<int> counts(nonzero_counts.begin(), nonzero_counts.end());
    for (int c : counts)
        if (c < 2 || c > d)
            throw config_error("grid_point_set: nonzero counts must lie in 2..d");

    PointSet ps;
    ps.d = d;
    std::vector<double> point(d, lv.front());
    std::vector<int> idx(d, 0);
    // Odometer over levels^d, lexicographic in the level indices.
    while (true) {
        for (int j = 0; j < d; ++j) point[j] = lv[idx[j]];
        const int nz = positive_count(point);
        if (std::find(counts.begin(), counts.end(), nz) != counts.end())
            ps.points.push_back(point);
        int j = d - 1;
        while (j >= 0 && idx[j] == static_cast<int>(lv.size()) - 1) idx[j--] = 0;
        if (j < 0) break;
        ++idx[j];
    }
    if (ps.points.empty())
        throw config_error("grid_point_set: configuration yields no points");
    ps.validate();
    return ps;
}

PointSet extremal_coeff_point_set(int d, int a) {
    if (a < 2 || a > d)
        throw config_error("extremal_coeff_point_set: need 2 <= a <= d");
    PointSet ps;
    ps.d = d;
    std::vector<int> comb(a);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
        std::vector<double> point(d, 0.0);
        for (int j : comb) point[j] = 1.0;
        ps.points.push_back(std::move(point));
        int i = a - 1;
        while (i >= 0 && comb[i] == d - a + i) --i;
        if (i < 0) break;
        ++comb[i];
        for (int j = i + 1; j < a; ++j) comb[j] = comb[j - 1] + 1;
    }
    return ps;
}

PointSet neighbour_pairs(const GridLocations& locs, double maxdist) {
    if (!(maxdist > 0.0)) throw config_error("neighbour_pairs: maxdist must be > 0");
    locs.validate();
    const int d = locs.size();
    PointSet ps;
    ps.d = d;
    const double limit = maxdist * (1.0 + 1e-12);
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            if (locs.distance(i, j) <= limit) {
                std::vector<double> point(d, 0.0);
                point[i] = point[j] = 1.0;
                ps.points.push_back(std::move(point));
            }
        }
    }
    if (ps.points.empty())
        throw config_error("neighbour_pairs: no pairs within maxdist");
    return ps;
}

// ---------------------------------------------------------------------------
// Policies and estimator kinds

WeightPolicy WeightPolicy::tikhonov(std::optional<double> c) {
    if (c && !(*c > 0.0))
        throw config_error("tikhonov constant must be > 0");
    return {WeightKind::tikhonov, c};
}

std::string WeightPolicy::name() const {
    switch (kind) {
        case WeightKind::identity: return "identity";
        case WeightKind::inverse_sigma: return "inverse_sigma";
        case WeightKind::tikhonov: return "tikhonov";
    }
    return "?";
}

double EstimatorKind::sigma_scale() const {
    if (tag == EstimatorKindTag::kernel || tag == EstimatorKindTag::bias_corrected) {
        const double f = variance_factor(tau);
        return f * f;
    }
    return 1.0;
}

std::string EstimatorKind::name() const {
    switch (tag) {
        case EstimatorKindTag::shifted: return "shifted";
        case EstimatorKindTag::raw: return "raw";
        case EstimatorKindTag::kernel: return "kernel";
        case EstimatorKindTag::bias_corrected: return "biascorr";
    }
    return "?";
}

std::vector<double> initial_estimates(const RankMatrix& ranks, const TailFraction& tf,
                                      const PointSet& points, const EstimatorKind& kind) {
    points.validate();
    if (points.d != ranks.d())
        throw config_error("initial_estimates: point set dimension != data dimension");
    std::vector<double> lhat;
    lhat.reserve(points.points.size());
    for (const auto& c : points.points) {
        switch (kind.tag) {
            case EstimatorKindTag::shifted:
                lhat.push_back(empirical_stdf(ranks, tf, c, true).value);
                break;
            case EstimatorKindTag::raw:
                lhat.push_back(empirical_stdf(ranks, tf, c, false).value);
                break;
            case EstimatorKindTag::kernel:
                lhat.push_back(kernel_stdf(ranks, tf, c, kind.tau).value);
                break;
            case EstimatorKindTag::bias_corrected: {
                TailFraction full = tf;
                if (!full.k1) full.k1 = kind.k1;
                lhat.push_back(bias_corrected_stdf(ranks, full, c, kind.tau).value);
                break;
            }
        }
    }
    return lhat;
}

FitInput FitInput::from_ranks(const RankMatrix& ranks, const TailFraction& tf,
                              const PointSet& points, const EstimatorKind& kind) {
    return {initial_estimates(ranks, tf, points, kind), tf.k, kind.sigma_scale(),
            kind.name()};
}

// ---------------------------------------------------------------------------
// Discrepancy, Sigma, weights, objective

std::vector<double> discrepancy(std::span<const double> lhat, const TailModel& model,
                                std::span<const double> theta, const PointSet& points) {
    if (static_cast<int>(lhat.size()) != points.q())
        throw config_error("discrepancy: lhat size != number of points");
    std::vector<double> d(points.q());
    for (int m = 0; m < points.q(); ++m)
        d[m] = lhat[m] - model.eval(points.points[m], theta);
    return d;
}

SymMatrix sigma_matrix(const TailModel& model, std::span<const double> theta,
                       const PointSet& points, double scale) {
    const int q = points.q();
    const int d = points.d;

    auto ell = [&](std::span<const double> x) { return model.eval(x, theta); };

    std::vector<double> lvals(q);
    std::vector<std::vector<double>> grads(q);
    try {
        for (int i = 0; i < q; ++i) {
            lvals[i] = ell(points.points[i]);
            grads[i] = stdf_gradient_x(model, theta, points.points[i]);
        }
    } catch (const infeasible_parameter_error&) {
        throw;
    } catch (const std::exception& e) {
        throw estimation_error(std::string("sigma_matrix: derivative evaluation failed (") +
                               e.what() + "); consider the tikhonov weight policy");
    }

    // r(x, y) = l(x) + l(y) - l(x v y); the marginal points c_{ia} e_a have
    // l = c_{ia} exactly.
    std::vector<double> join(d);
    auto r_pp = [&](int i, int j) {
        for (int t = 0; t < d; ++t)
            join[t] = std::max(points.points[i][t], points.points[j][t]);
        return lvals[i] + lvals[j] - ell(join);
    };
    auto r_pm = [&](int i, int b, double cb) {
        // r(c_i, cb e_b)
        if (points.points[i][b] >= cb) return cb;  // join equals c_i
        std::copy(points.points[i].begin(), points.points[i].end(), join.begin());
        join[b] = cb;
        return lvals[i] + cb - ell(join);
    };
    auto r_mm = [&](int a, double ca, int b, double cb) {
        if (a == b) return std::min(ca, cb);
        std::fill(join.begin(), join.end(), 0.0);
        join[a] = ca;
        join[b] = cb;
        return ca + cb - ell(join);
    };

    SymMatrix sigma(q);
    for (int i = 0; i < q; ++i) {
        const auto& ci = points.points[i];
        for (int j = i; j < q; ++j) {
            const auto& cj = points.points[j];
            double v = r_pp(i, j);
            for (int b = 0; b < d; ++b) {
                if (cj[b] > 0.0 && grads[j][b] != 0.0)
                    v -= grads[j][b] * r_pm(i, b, cj[b]);
            }
            for (int a = 0; a < d; ++a) {
                if (!(ci[a] > 0.0) || grads[i][a] == 0.0) continue;
                v -= grads[i][a] * r_pm(j, a, ci[a]);
                for (int b = 0; b < d; ++b) {
                    if (cj[b] > 0.0 && grads[j][b] != 0.0)
                        v += grads[i][a] * grads[j][b] * r_mm(a, ci[a], b, cj[b]);
                }
            }
            sigma.set(i, j, scale * v);
        }
    }
    return sigma;
}

namespace {

double tikhonov_constant(const WeightPolicy& policy, const SymMatrix& sigma) {
    if (policy.tikhonov_c) return *policy.tikhonov_c;
    const double c = 0.01 * sigma.trace() / sigma.dim();
    return (c > 0.0) ? c : 1e-12;
}

}  // namespace

SymMatrix weight_matrix(const WeightPolicy& policy, const TailModel& model,
                        std::span<const double> theta, const PointSet& points,
                        double sigma_scale) {
    if (policy.kind == WeightKind::identity) return SymMatrix::identity(points.q());
    SymMatrix sigma = sigma_matrix(model, theta, points, sigma_scale);
    if (policy.kind == WeightKind::inverse_sigma) {
        try {
            return spd_inverse(sigma);
        } catch (const singular_matrix_error& e) {
            throw singular_matrix_error(
                std::string(e.what()) + "; use the tikhonov weight policy",
                e.smallest_eigenvalue());
        }
    }
    const double c = tikhonov_constant(policy, sigma);
    for (int i = 0; i < sigma.dim(); ++i) sigma.add(i, i, c);
    return spd_inverse(sigma);
}

double objective(std::span<const double> lhat, const TailModel& model,
                 std::span<const double> theta, const PointSet& points,
                 const WeightPolicy& policy, double sigma_scale) {
    try {
        const std::vector<double> d = discrepancy(lhat, model, theta, points);
        if (policy.kind == WeightKind::identity) {
            double f = 0.0;
            for (double v : d) f += v * v;
            return f;
        }
        SymMatrix sigma = sigma_matrix(model, theta, points, sigma_scale);
        if (policy.kind == WeightKind::tikhonov) {
            const double c = tikhonov_constant(policy, sigma);
            for (int i = 0; i < sigma.dim(); ++i) sigma.add(i, i, c);
        }
        const std::vector<double> x = spd_solve(sigma, d);
        double f = 0.0;
        for (size_t i = 0; i < d.size(); ++i) f += d[i] * x[i];
        return std::max(f, 0.0);
    } catch (const infeasible_parameter_error&) {
        return kInf;
    } catch (const singular_matrix_error&) {
        return kInf;
    }
}

// ---------------------------------------------------------------------------
// Box reparameterization and Nelder-Mead

namespace {

struct BoxTransform {
    std::vector<ParamBound> box;

    std::vector<double> to_theta(std::span<const double> z) const {
        std::vector<double> theta(z.size());
        for (size_t j = 0; j < z.size(); ++j) {
            const ParamBound& b = box[j];
            if (std::isfinite(b.hi)) {
                theta[j] = b.lo + (b.hi - b.lo) / (1.0 + std::exp(-z[j]));
            } else {
                theta[j] = b.lo + std::exp(z[j]);
            }
        }
        return theta;
    }

    std::vector<double> to_z(std::span<const double> theta) const {
        std::vector<double> z(theta.size());
        for (size_t j = 0; j < theta.size(); ++j) {
            const ParamBound& b = box[j];
            if (std::isfinite(b.hi)) {
                double u = (theta[j] - b.lo) / (b.hi - b.lo);
                u = std::clamp(u, 1e-12, 1.0 - 1e-12);
                z[j] = std::log(u / (1.0 - u));
            } else {
                z[j] = std::log(std::max(theta[j] - b.lo, 1e-12));
            }
        }
        return z;
    }
};

struct NelderMeadResult {
    std::vector<double> z;
    double f = kInf;
    int iterations = 0;
    bool converged = false;
};

template <typename F>
NelderMeadResult nelder_mead(F&& func, std::span<const double> z0, int max_iter,
                             double simplex_tol, double f_tol) {
    const int p = static_cast<int>(z0.size());
    std::vector<std::vector<double>> simplex(p + 1, std::vector<double>(z0.begin(), z0.end()));
    std::vector<double> fv(p + 1);
    for (int j = 0; j < p; ++j) simplex[j + 1][j] += 0.5;
    for (int i = 0; i <= p; ++i) fv[i] = func(simplex[i]);

    NelderMeadResult res;
    std::vector<double> centroid(p), xr(p), xe(p), xc(p);
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        std::vector<int> order(p + 1);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        {
            std::vector<std::vector<double>> s2(p + 1);
            std::vector<double> f2(p + 1);
            for (int i = 0; i <= p; ++i) {
                s2[i] = simplex[order[i]];
                f2[i] = fv[order[i]];
            }
            simplex.swap(s2);
            fv.swap(f2);
        }

        double diameter = 0.0;
        for (int i = 1; i <= p; ++i) {
            double dist = 0.0;
            for (int j = 0; j < p; ++j) {
                const double dz = simplex[i][j] - simplex[0][j];
                dist += dz * dz;
            }
            diameter = std::max(diameter, std::sqrt(dist));
        }
        const double spread = fv[p] - fv[0];
        if (diameter < simplex_tol && spread < f_tol && std::isfinite(fv[0])) {
            res.converged = true;
            break;
        }

        for (int j = 0; j < p; ++j) {
            double s = 0.0;
            for (int i = 0; i < p; ++i) s += simplex[i][j];
            centroid[j] = s / p;
        }
        auto blend = [&](std::vector<double>& out, double coef) {
            for (int j = 0; j < p; ++j)
                out[j] = centroid[j] + coef * (centroid[j] - simplex[p][j]);
        };

        blend(xr, 1.0);
        const double fr = func(xr);
        if (fr < fv[0]) {
            blend(xe, 2.0);
            const double fe = func(xe);
            if (fe < fr) {
                simplex[p] = xe;
                fv[p] = fe;
            } else {
                simplex[p] = xr;
                fv[p] = fr;
            }
        } else if (fr < fv[p - 1]) {
            simplex[p] = xr;
            fv[p] = fr;
        } else {
            if (fr < fv[p]) {
                blend(xc, 0.5);  // outside contraction
            } else {
                for (int j = 0; j < p; ++j)
                    xc[j] = centroid[j] - 0.5 * (centroid[j] - simplex[p][j]);
            }
            const double fc = func(xc);
            if (fc < std::min(fr, fv[p])) {
                simplex[p] = xc;
                fv[p] = fc;
            } else {
                for (int i = 1; i <= p; ++i) {
                    for (int j = 0; j < p; ++j)
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    fv[i] = func(simplex[i]);
                }
            }
        }
    }
    res.iterations = iter;
    int best = 0;
    for (int i = 1; i <= p; ++i)
        if (fv[i] < fv[best]) best = i;
    res.z = simplex[best];
    res.f = fv[best];
    return res;
}

// Latin-hypercube starting points in the transformed space, deterministic
// given the seed.
std::vector<std::vector<double>> lhs_starts(int count, int p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<double>> starts(count, std::vector<double>(p));
    for (int j = 0; j < p; ++j) {
        std::vector<int> perm(count);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int r = 0; r < count; ++r)
            starts[r][j] = -2.0 + 4.0 * (perm[r] + unif(rng)) / count;
    }
    return starts;
}

}  // namespace

FitReport fit(const FitInput& input, const TailModel& model, const PointSet& points,
              const WeightPolicy& policy, const OptimizerConfig& config) {
    points.validate();
    if (points.d != model.dim())
        throw config_error("fit: point set dimension != model dimension");
    const int p = model.param_dim();
    const int q = points.q();
    if (q < p) throw config_error("fit: q must be >= p");
    if (static_cast<int>(input.lhat.size()) != q)
        throw config_error("fit: initial estimator vector size != q");
    if (input.k < 1) throw config_error("fit: k must be >= 1");

    const BoxTransform box{model.param_box()};
    long long evaluations = 0;
    auto func = [&](std::span<const double> z) {
        ++evaluations;
        const std::vector<double> theta = box.to_theta(z);
        return objective(input.lhat, model, theta, points, policy, input.sigma_scale);
    };

    const int max_iter = config.max_iter > 0 ? config.max_iter : 2000 + 600 * p;
    const int restarts = std::max(1, config.restarts);
    std::vector<std::vector<double>> starts = lhs_starts(restarts, p, config.seed);
    if (!config.init.empty()) {
        if (static_cast<int>(config.init.size()) != p)
            throw config_error("fit: initial point has wrong dimension");
        starts[0] = box.to_z(config.init);
    }

    NelderMeadResult best;
    int iterations = 0;
    bool any_converged = false;
    for (int r = 0; r < restarts; ++r) {
        NelderMeadResult res =
            nelder_mead(func, starts[r], max_iter, config.simplex_tol, config.f_tol);
        iterations += res.iterations;
        any_converged = any_converged || res.converged;
        if (res.f < best.f) best = res;
    }

    if (!std::isfinite(best.f))
        throw estimation_error(
            "fit: objective not finite at any evaluated parameter; the model may be "
            "infeasible on this point set or Sigma singular (try tikhonov)");
    if (!any_converged)
        throw estimation_error("fit: optimizer did not converge in " +
                               std::to_string(iterations) + " iterations over " +
                               std::to_string(restarts) + " restarts");

    FitReport report;
    report.theta = box.to_theta(best.z);
    report.objective_min = best.f;
    report.diagnostics.iterations = iterations;
    report.diagnostics.restarts = restarts;
    report.diagnostics.evaluations = evaluations;
    report.diagnostics.converged = any_converged;
    report.diagnostics.policy = policy.name();
    report.diagnostics.estimator = input.estimator_name;
    report.diagnostics.k = input.k;
    report.diagnostics.q = q;

    const Matrix jac = model_jacobian(model, report.theta, points, config.fd_step);
    if (jacobian_rank_deficient(jac))
        report.diagnostics.warnings.push_back(
            "model Jacobian is numerically rank deficient at the estimate; "
            "the point set may not identify the parameters");

    try {
        report.covariance = asymptotic_covariance(model, report.theta, points, policy,
                                                  input.sigma_scale, config.fd_step);
        report.std_errors.resize(p);
        for (int j = 0; j < p; ++j)
            report.std_errors[j] =
                std::sqrt(std::max(report.covariance(j, j), 0.0) / input.k);
    } catch (const std::exception& e) {
        report.covariance = SymMatrix(p);
        report.std_errors.assign(p, 0.0);
        report.diagnostics.warnings.push_back(
            std::string("asymptotic covariance unavailable: ") + e.what());
    }
    return report;
}

Matrix model_jacobian(const TailModel& model, std::span<const double> theta,
                      const PointSet& points, double fd_step) {
    const int p = model.param_dim();
    const int q = points.q();
    const std::vector<ParamBound> box = model.param_box();
    Matrix jac(q, p);
    std::vector<double> tp(theta.begin(), theta.end());
    std::vector<double> tm(theta.begin(), theta.end());
    for (int j = 0; j < p; ++j) {
        const double h = fd_step * std::max(std::abs(theta[j]), 1.0);
        double up = theta[j] + h, dn = theta[j] - h;
        if (up >= box[j].hi) up = theta[j];  // one-sided at the boundary
        if (dn <= box[j].lo) dn = theta[j];
        if (up == dn)
            throw estimation_error("model_jacobian: parameter interval too tight");
        tp[j] = up;
        tm[j] = dn;
        for (int m = 0; m < q; ++m) {
            const double fu = model.eval(points.points[m], tp);
            const double fd = model.eval(points.points[m], tm);
            jac(m, j) = (fu - fd) / (up - dn);
        }
        tp[j] = theta[j];
        tm[j] = theta[j];
    }
    return jac;
}

bool jacobian_rank_deficient(const Matrix& jac) {
    const Matrix jtj = transpose(jac) * jac;
    const EigenDecomp dec = sym_eigen(SymMatrix::from_matrix(jtj));
    const double largest = std::sqrt(std::max(dec.values.front(), 0.0));
    if (largest == 0.0) return true;
    const double smallest = std::sqrt(std::max(dec.values.back(), 0.0));
    return smallest < 1e-8 * largest;
}

SymMatrix asymptotic_covariance(const TailModel& model, std::span<const double> theta,
                                const PointSet& points, const WeightPolicy& policy,
                                double sigma_scale, double fd_step) {
    const Matrix jac = model_jacobian(model, theta, points, fd_step);
    const SymMatrix sigma = sigma_matrix(model, theta, points, sigma_scale);
    const SymMatrix omega = weight_matrix(policy, model, theta, points, sigma_scale);

    const Matrix w = omega.to_matrix() * jac;                        // q x p
    const SymMatrix g = SymMatrix::from_matrix(transpose(jac) * w);  // p x p
    const Matrix t = transpose(w) * (sigma.to_matrix() * w);         // p x p
    const Matrix ginv_t = spd_solve(g, t);
    const Matrix m = transpose(spd_solve(g, transpose(ginv_t)));
    return SymMatrix::from_matrix(m);
}

}  // namespace taildep

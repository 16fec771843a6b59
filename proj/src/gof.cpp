#include "taildep/gof.hpp"

#include <algorithm>
#include <cmath>

namespace taildep {

GofResult gof_optimal(const FitReport& fit) {
    if (fit.diagnostics.policy != "inverse_sigma")
        throw std::invalid_argument(
            "gof_optimal: the minimum-distance test requires the inverse_sigma policy");
    const int p = static_cast<int>(fit.theta.size());
    const int q = fit.diagnostics.q;
    if (q <= p)
        throw std::invalid_argument("gof_optimal: needs q > p degrees of freedom");
    GofResult res;
    res.method = "optimal";
    res.statistic = fit.diagnostics.k * fit.objective_min;
    res.df = q - p;
    res.p_value = chisq_sf(res.statistic, res.df);
    return res;
}

Matrix projection_matrix(const Matrix& jac, const SymMatrix& omega) {
    const Matrix w = omega.to_matrix() * jac;                        // q x p
    const SymMatrix g = SymMatrix::from_matrix(transpose(jac) * w);  // p x p
    const Matrix x = spd_solve(g, transpose(w));                     // p x q
    return jac * x;
}

GofResult gof_spectral(std::span<const double> discrepancy_at_fit, const SymMatrix& sigma,
                       const Matrix& projection, int p, int k, double eig_threshold) {
    const int q = sigma.dim();
    if (static_cast<int>(discrepancy_at_fit.size()) != q ||
        projection.rows() != q || projection.cols() != q)
        throw std::invalid_argument("gof_spectral: inconsistent dimensions");
    if (q <= p)
        throw std::invalid_argument("gof_spectral: needs q > p");

    const Matrix ip = Matrix::identity(q) - projection;
    const Matrix c = ip * sigma.to_matrix() * transpose(ip);
    const EigenDecomp dec = sym_eigen(SymMatrix::from_matrix(c));

    int s = 0;
    while (s < q - p && dec.values[s] > eig_threshold) ++s;
    if (s == 0)
        throw estimation_error(
            "gof_spectral: no eigenvalue above the threshold; the residual "
            "covariance carries no usable directions");

    // A = V_s D_s^-1 V_s^T applied to D.
    double stat = 0.0;
    for (int j = 0; j < s; ++j) {
        double proj = 0.0;
        for (int i = 0; i < q; ++i) proj += dec.vectors(i, j) * discrepancy_at_fit[i];
        stat += proj * proj / dec.values[j];
    }
    stat *= k;

    GofResult res;
    res.method = "spectral";
    res.statistic = stat;
    res.df = s;
    res.s = s;
    res.p_value = chisq_sf(stat, s);
    res.eigenvalues = dec.values;
    return res;
}

GofResult gof_spectral_at(std::span<const double> lhat, const TailModel& model,
                          std::span<const double> theta_hat, const PointSet& points,
                          const WeightPolicy& policy, int k, double eig_threshold,
                          double sigma_scale, double fd_step) {
    const std::vector<double> d = discrepancy(lhat, model, theta_hat, points);
    const SymMatrix sigma = sigma_matrix(model, theta_hat, points, sigma_scale);
    const SymMatrix omega = weight_matrix(policy, model, theta_hat, points, sigma_scale);
    const Matrix jac = model_jacobian(model, theta_hat, points, fd_step);
    const Matrix proj = projection_matrix(jac, omega);
    return gof_spectral(d, sigma, proj, model.param_dim(), k, eig_threshold);
}

double remark1_residual(const Matrix& jac, const SymMatrix& sigma) {
    const int q = sigma.dim();
    const int p = jac.cols();
    const SymMatrix sigma_inv = spd_inverse(sigma);
    const Matrix proj = projection_matrix(jac, sigma_inv);
    const Matrix ip = Matrix::identity(q) - proj;

    const Matrix c = ip * sigma.to_matrix() * transpose(ip);
    const EigenDecomp dec = sym_eigen(SymMatrix::from_matrix(c));
    const int s = q - p;

    Matrix a(q, q);
    for (int j = 0; j < s; ++j) {
        for (int i = 0; i < q; ++i)
            for (int l = 0; l < q; ++l)
                a(i, l) += dec.vectors(i, j) * dec.vectors(l, j) / dec.values[j];
    }
    const Matrix diff = sigma_inv.to_matrix() - a;
    const Matrix r = transpose(ip) * diff * ip;
    return max_abs(r);
}

}  // namespace taildep

#pragma once

#include <string>
#include <vector>

#include "taildep/estimator.hpp"

namespace taildep {

struct GofResult {
    std::string method;       // "optimal" | "spectral"
    double statistic = 0.0;
    int df = 0;               // q - p for the optimal test, s for the spectral one
    double p_value = 1.0;
    int s = 0;                        // spectral only
    std::vector<double> eigenvalues;  // spectral only, all q of them
};

// Minimum-distance test under the inverse-sigma policy: k times the
// minimized objective is asymptotically chi-square with q - p degrees of
// freedom.
GofResult gof_optimal(const FitReport& fit);

// P = Ldot (Ldot^T Omega Ldot)^-1 Ldot^T Omega; idempotent with rank p.
Matrix projection_matrix(const Matrix& jac, const SymMatrix& omega);

// Spectral test: eigendecompose (I-P) Sigma (I-P)^T, keep the s leading
// directions with eigenvalue above eig_threshold (s <= q - p), and form
// k D^T A D with A the truncated spectral pseudo-inverse.
GofResult gof_spectral(std::span<const double> discrepancy_at_fit, const SymMatrix& sigma,
                       const Matrix& projection, int p, int k, double eig_threshold);

// Convenience wrapper computing D, Sigma, Omega and P at theta_hat.
GofResult gof_spectral_at(std::span<const double> lhat, const TailModel& model,
                          std::span<const double> theta_hat, const PointSet& points,
                          const WeightPolicy& policy, int k, double eig_threshold,
                          double sigma_scale = 1.0, double fd_step = 1e-6);

// Max-entry norm of (I-P)^T (Sigma^-1 - A) (I-P) with Omega = Sigma^-1 and
// s = q - p; zero in exact arithmetic, which makes the optimal and spectral
// statistics coincide when Sigma is invertible.
double remark1_residual(const Matrix& jac, const SymMatrix& sigma);

}  // namespace taildep

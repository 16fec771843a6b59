#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taildep/models.hpp"
#include "taildep/numerics.hpp"
#include "taildep/stdf.hpp"

namespace taildep {

// Evaluation points c_1..c_q; every point needs at least two positive
// coordinates (single-coordinate points carry no dependence information).
struct PointSet {
    int d = 0;
    std::vector<std::vector<double>> points;

    int q() const { return static_cast<int>(points.size()); }
    void validate() const;
};

// All points of levels^d whose number of positive coordinates lies in
// nonzero_counts, in lexicographic order.
PointSet grid_point_set(int d, std::span<const double> levels,
                        std::span<const int> nonzero_counts);

// All indicator points e_J with |J| = a.
PointSet extremal_coeff_point_set(int d, int a);

// Indicator pair points e_{ij} for all location pairs within maxdist.
PointSet neighbour_pairs(const GridLocations& locs, double maxdist);

enum class WeightKind { identity, inverse_sigma, tikhonov };

struct WeightPolicy {
    WeightKind kind = WeightKind::identity;
    // Absolute Tikhonov constant; when absent the scale-relative default
    // 0.01 * trace(Sigma(theta)) / q is used at every theta.
    std::optional<double> tikhonov_c;

    static WeightPolicy identity() { return {WeightKind::identity, {}}; }
    static WeightPolicy inverse_sigma() { return {WeightKind::inverse_sigma, {}}; }
    static WeightPolicy tikhonov(std::optional<double> c = {});
    std::string name() const;
};

enum class EstimatorKindTag { shifted, raw, kernel, bias_corrected };

struct EstimatorKind {
    EstimatorKindTag tag = EstimatorKindTag::shifted;
    double tau = 5.0;        // power-kernel exponent
    std::optional<int> k1;   // bias-correction level

    // Squared variance factor applied to Sigma for the kernel-type
    // estimators; one for the raw/shifted ones.
    double sigma_scale() const;
    std::string name() const;
};

// Initial estimator evaluated at every point of the set.
std::vector<double> initial_estimates(const RankMatrix& ranks, const TailFraction& tf,
                                      const PointSet& points, const EstimatorKind& kind);

// D(theta) = Lhat - L(theta).
std::vector<double> discrepancy(std::span<const double> lhat, const TailModel& model,
                                std::span<const double> theta, const PointSet& points);

// Asymptotic covariance matrix of sqrt(k) (Lhat - L(theta0)) under the
// empirical initial estimator, from the bilinear expansion of
// E[B(c_i) B(c_j)] with kernel r(x,y) = l(x) + l(y) - l(x v y).
// `scale` multiplies the whole matrix (variance factor squared).
SymMatrix sigma_matrix(const TailModel& model, std::span<const double> theta,
                       const PointSet& points, double scale = 1.0);

// Omega(theta) for the given policy.
SymMatrix weight_matrix(const WeightPolicy& policy, const TailModel& model,
                        std::span<const double> theta, const PointSet& points,
                        double sigma_scale = 1.0);

// f(theta) = D(theta)^T Omega(theta) D(theta), with Omega re-evaluated at
// every call (continuous updating). Infeasible theta and non-invertible
// Sigma yield +infinity.
double objective(std::span<const double> lhat, const TailModel& model,
                 std::span<const double> theta, const PointSet& points,
                 const WeightPolicy& policy, double sigma_scale = 1.0);

struct OptimizerConfig {
    int max_iter = 0;          // per restart; 0 selects 2000 + 600 * p
    int restarts = 5;          // seeded Latin-hypercube multistarts
    double simplex_tol = 1e-8;
    double f_tol = 1e-12;
    double fd_step = 1e-6;     // relative step of the theta-Jacobian
    std::uint64_t seed = 20240915;
    std::vector<double> init;  // optional starting point in theta space
};

struct FitDiagnostics {
    int iterations = 0;
    int restarts = 0;
    long long evaluations = 0;
    bool converged = false;
    std::string policy;
    std::string estimator;
    int k = 0;
    int q = 0;
    std::vector<std::string> warnings;
};

struct FitReport {
    std::vector<double> theta;
    double objective_min = 0.0;
    SymMatrix covariance;            // plug-in asymptotic covariance M
    std::vector<double> std_errors;  // sqrt(M_jj / k)
    FitDiagnostics diagnostics;
};

struct FitInput {
    std::vector<double> lhat;
    int k = 0;
    double sigma_scale = 1.0;
    std::string estimator_name = "shifted";

    static FitInput from_ranks(const RankMatrix& ranks, const TailFraction& tf,
                               const PointSet& points, const EstimatorKind& kind);
};

// Continuous-updating weighted least-squares fit by Nelder-Mead on
// box-reparameterized coordinates with seeded multistarts.
FitReport fit(const FitInput& input, const TailModel& model, const PointSet& points,
              const WeightPolicy& policy, const OptimizerConfig& config = {});

// q x p Jacobian of theta -> L(theta) by central finite differences
// (one-sided at the parameter box boundary).
Matrix model_jacobian(const TailModel& model, std::span<const double> theta,
                      const PointSet& points, double fd_step = 1e-6);

// Smallest/largest singular value ratio below 1e-8 signals that the point
// set does not identify theta.
bool jacobian_rank_deficient(const Matrix& jac);

// Sandwich covariance (Ldot^T O Ldot)^-1 Ldot^T O Sigma O Ldot
// (Ldot^T O Ldot)^-1 at theta; reduces to (Ldot^T Sigma^-1 Ldot)^-1 under
// the inverse-sigma policy.
SymMatrix asymptotic_covariance(const TailModel& model, std::span<const double> theta,
                                const PointSet& points, const WeightPolicy& policy,
                                double sigma_scale = 1.0, double fd_step = 1e-6);

}  // namespace taildep

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "taildep/estimator.hpp"
#include "taildep/models.hpp"
#include "taildep/stdf.hpp"

namespace taildep {

// Deterministic stream of variates: identical (seed, stream) pairs produce
// bit-identical sequences. All transforms are implemented locally so the
// output does not depend on the standard library's distribution internals.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64() { return gen_(); }
    double uniform();      // (0,1)
    double exponential();  // rate 1
    double normal();       // N(0,1), Box-Muller
    double frechet();      // unit Frechet: -1/log U

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// One-sided positive stable variate with Laplace transform exp(-t^theta),
// theta in (0,1]; degenerate at 1 for theta = 1.
double sample_positive_stable(double theta, RngStream& rng);

// Max-stable logistic sample with unit Frechet margins: Z_j = (S / W_j)^theta.
DataMatrix sample_logistic(int n, int d, double theta, RngStream& rng);

// Y_j = max_t b_{jt} Z_t with independent unit Frechet factors.
DataMatrix sample_maxlinear(int n, const MaxLinearCoeffs& coeffs, RngStream& rng);

struct BrAccuracy {
    int max_points = 10000;  // cap on spectral functions per sample
};

struct BrSampleInfo {
    int cap_hits = 0;  // samples truncated at the cap before the stopping bound
};

// Truncated spectral construction of the Brown-Resnick process on the given
// locations: Y(s) = max_i xi_i exp(eps_i(s) - gamma(s)) with xi_i = 1/Gamma_i
// and Gaussian increments eps anchored at the origin. The truncation stops
// once xi_i exp(m + 6 sigma_max) drops below the running minimum over
// locations, or at the cap (approximate; cap hits are reported).
DataMatrix sample_brown_resnick(int n, const GridLocations& locs, double alpha,
                                double rho, RngStream& rng, const BrAccuracy& acc = {},
                                BrSampleInfo* info = nullptr);

// X_ij = Y_ij + |eps_ij| with eps ~ N(0, sd^2).
DataMatrix perturb_noise(const DataMatrix& data, double sd, RngStream& rng);

// Tagged data-generating process for the CLI and the study harness.
struct SampleSpec {
    std::string model = "logistic";  // logistic | br | maxlinear
    int n = 0;
    int d = 2;                     // logistic
    double theta = 0.5;            // logistic
    double alpha = 1.0;            // br
    double rho = 1.0;              // br
    int grid_rows = 0;             // br
    int grid_cols = 0;             // br
    std::optional<Dag> dag;        // maxlinear
    std::vector<double> dag_theta; // maxlinear
    bool noise = false;
    double noise_sd = 0.5;
    std::uint64_t seed = 0;

    int dim() const;
    void validate() const;
};

// Draws one dataset; the stream index makes replicates independent.
DataMatrix sample_dataset(const SampleSpec& spec, std::uint64_t stream = 0,
                          BrSampleInfo* info = nullptr);

// ---------------------------------------------------------------------------
// Monte Carlo study harness

struct StudyConfig {
    SampleSpec sample;
    const TailModel* model = nullptr;  // fitted family (not owned)
    PointSet points;
    std::vector<int> k_grid;
    EstimatorKind estimator;
    WeightPolicy policy;
    OptimizerConfig optimizer;
    std::vector<double> truth;  // theta_0, for bias
    int replicates = 0;
    int jobs = 0;               // 0 = hardware concurrency
    bool collect_gof = false;   // also record k f(theta_hat) per replicate
};

struct StudyRow {
    int k = 0;
    int param = 0;  // 0-based parameter index
    double bias = 0.0;
    double sd = 0.0;
    double rmse = 0.0;
};

struct ReplicateRecord {
    int replicate = 0;
    int k = 0;
    bool ok = false;
    std::string error;
    std::vector<double> estimate;
    double objective = 0.0;
    std::optional<double> gof_statistic;
};

struct StudyResult {
    std::vector<StudyRow> rows;              // one per (k, parameter)
    std::vector<ReplicateRecord> replicates; // one per (k, replicate)
    int failures = 0;
};

// Replicates run on independent streams and may execute in parallel; the
// result is deterministic given the seed regardless of scheduling.
StudyResult mc_study(const StudyConfig& config);

}  // namespace taildep

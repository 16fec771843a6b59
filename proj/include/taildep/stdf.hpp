#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "taildep/errors.hpp"

namespace taildep {

// n x d data matrix, rows are observations.
class DataMatrix {
public:
    DataMatrix() = default;
    DataMatrix(int n, int d)
        : n_(n), d_(d), a_(static_cast<size_t>(n) * d, 0.0) {}

    int n() const noexcept { return n_; }
    int d() const noexcept { return d_; }

    double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * d_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * d_ + j]; }

    std::span<const double> row(int i) const {
        return {a_.data() + static_cast<size_t>(i) * d_, static_cast<size_t>(d_)};
    }
    std::span<const double> data() const noexcept { return a_; }

private:
    int n_ = 0;
    int d_ = 0;
    std::vector<double> a_;
};

// Column-wise ranks in 1..n; ties broken by original row order.
class RankMatrix {
public:
    RankMatrix() = default;
    RankMatrix(int n, int d)
        : n_(n), d_(d), r_(static_cast<size_t>(n) * d, 0) {}

    int n() const noexcept { return n_; }
    int d() const noexcept { return d_; }

    int& operator()(int i, int j) { return r_[static_cast<size_t>(i) * d_ + j]; }
    int operator()(int i, int j) const { return r_[static_cast<size_t>(i) * d_ + j]; }

private:
    int n_ = 0;
    int d_ = 0;
    std::vector<int> r_;
};

// Tail fraction k (top order statistics per margin); k1 is the larger
// auxiliary level used by the bias-corrected estimator.
struct TailFraction {
    int k = 0;
    std::optional<int> k1;

    void validate(int n) const;
};

enum class StdfKind { raw, shifted, kernel, bias_corrected };

struct StdfEstimate {
    std::vector<double> point;
    double value = 0.0;
    StdfKind kind = StdfKind::shifted;
};

RankMatrix compute_ranks(const DataMatrix& data);

// Empirical stable tail dependence function at x >= 0. The shifted form
// counts ranks above n + 1/2 - k x_j; the raw form uses n + 1 - k x_j.
StdfEstimate empirical_stdf(const RankMatrix& ranks, const TailFraction& tf,
                            std::span<const double> x, bool shifted = true);

// Rescaled raw estimator a^{-1} l'_{n,k}(a x), the building block of the
// kernel aggregate.
double rescaled_raw_stdf(const RankMatrix& ranks, int k, double a,
                         std::span<const double> x);

// Kernel-aggregated estimator with power kernel K(t) = (tau+1) t^tau,
// averaging the rescaled raw estimator over a_j = j/(k+1).
StdfEstimate kernel_stdf(const RankMatrix& ranks, const TailFraction& tf,
                         std::span<const double> x, double tau);

// Second-order rate estimates feeding the bias correction.
struct RateEstimate {
    double alpha = 0.0;
    double beta = 0.0;
};

using RateEstimator = std::function<RateEstimate(
    const RankMatrix&, int k1, std::span<const double> x)>;

// Default rate estimator: least-squares fit of the empirical drift
// l~_{n,j}(x) - l~_{n,k1}(x) ~ A ((j/k1)^g - 1) over a mid-range of j,
// with g searched on a log-spaced grid and A profiled linearly. Returns
// alpha = A and beta = -g so that the plug-in correction reproduces the
// fitted drift at the levels k a_j. Not the estimator of the literature
// this construction is adapted from; pluggable for that reason.
RateEstimate default_rate_estimator(const RankMatrix& ranks, int k1,
                                    std::span<const double> x);

// Bias-corrected kernel estimator; requires k < k1 <= n.
StdfEstimate bias_corrected_stdf(const RankMatrix& ranks, const TailFraction& tf,
                                 std::span<const double> x, double tau,
                                 const RateEstimator& rate = default_rate_estimator);

// Integral of K(u) u^{-1/2} over (0,1) for the power kernel: the factor by
// which the limiting standard deviation of the kernel-type estimators
// exceeds the empirical one.
double variance_factor(double tau);

// Rank transform to the unit Pareto scale: n / (n + 1/2 - R_ij).
DataMatrix pareto_transform(const RankMatrix& ranks);

}  // namespace taildep

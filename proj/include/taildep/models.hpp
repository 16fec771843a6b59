#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "taildep/errors.hpp"
#include "taildep/numerics.hpp"

namespace taildep {

// Open-below parameter interval; hi may be +infinity.
struct ParamBound {
    double lo = 0.0;
    double hi = 1.0;
    std::string name;
};

// A parametric family of stable tail dependence functions. Evaluation is
// pure; instances are immutable after construction.
class TailModel {
public:
    virtual ~TailModel() = default;

    virtual int dim() const = 0;
    virtual int param_dim() const = 0;
    virtual std::vector<ParamBound> param_box() const = 0;
    virtual std::string label() const = 0;

    // l(x; theta) for x in [0,inf)^d and theta inside the parameter box.
    virtual double eval(std::span<const double> x,
                        std::span<const double> theta) const = 0;

    virtual bool has_analytic_gradient_x() const { return false; }
    virtual std::vector<double> analytic_gradient_x(std::span<const double> x,
                                                    std::span<const double> theta) const;
};

// Partial derivatives of x -> l(x;theta) at c, one entry per coordinate
// (zero where c_j = 0). Uses the model's analytic gradient when present,
// otherwise central finite differences with step 1e-5 * max(c_j, 1).
std::vector<double> stdf_gradient_x(const TailModel& model,
                                    std::span<const double> theta,
                                    std::span<const double> c);

// The finite-difference path, exposed so the analytic overrides can be
// cross-checked against it.
std::vector<double> finite_diff_gradient_x(const TailModel& model,
                                           std::span<const double> theta,
                                           std::span<const double> c);

// ---------------------------------------------------------------------------
// Logistic family

// (x_1^{1/theta} + ... + x_d^{1/theta})^theta for theta in (0,1].
double logistic_stdf(std::span<const double> x, double theta);

class LogisticModel : public TailModel {
public:
    explicit LogisticModel(int d);

    int dim() const override { return d_; }
    int param_dim() const override { return 1; }
    std::vector<ParamBound> param_box() const override;
    std::string label() const override { return "logistic"; }
    double eval(std::span<const double> x, std::span<const double> theta) const override;
    bool has_analytic_gradient_x() const override { return true; }
    std::vector<double> analytic_gradient_x(std::span<const double> x,
                                            std::span<const double> theta) const override;

private:
    int d_;
};

// ---------------------------------------------------------------------------
// Max-linear models

// d x r nonnegative factor loadings; rows sum to one.
struct MaxLinearCoeffs {
    int d = 0;
    int r = 0;
    Matrix b;

    double operator()(int j, int t) const { return b(j, t); }
    // Enforces the invariants: entries >= 0, row sums 1 within 1e-12, all
    // column sums positive.
    void validate() const;
};

// sum_t max_j b_{jt} x_j for x >= 0.
double maxlinear_stdf(std::span<const double> x, const MaxLinearCoeffs& coeffs);

struct DagEdge {
    int parent = 0;       // 0-based node ids
    int child = 0;
    int param_index = 0;  // position in the parameter vector
    std::string param_name;
};

// Directed acyclic graph of a recursive max-linear structural model.
struct Dag {
    int d = 0;
    std::vector<DagEdge> edges;

    int param_dim() const;
    // Kahn's algorithm; throws config_error when the graph has a cycle or
    // the parameter indices do not cover 0..p-1 exactly once per edge slot.
    std::vector<int> topological_order() const;
    void validate() const;
    std::vector<std::string> param_names() const;
};

// Instantiates the factor-loading matrix of the structural model: processing
// nodes in topological order, row j is the componentwise maximum of
// u_{kj} * row_k over the parents k, and the diagonal entry u_j makes the
// row sum equal to one. A negative implied u_j makes theta infeasible.
MaxLinearCoeffs dag_to_coeffs(const Dag& dag, std::span<const double> theta);

class MaxLinearDagModel : public TailModel {
public:
    explicit MaxLinearDagModel(Dag dag);

    int dim() const override { return dag_.d; }
    int param_dim() const override { return dag_.param_dim(); }
    std::vector<ParamBound> param_box() const override;
    std::string label() const override { return "max_linear_dag"; }
    double eval(std::span<const double> x, std::span<const double> theta) const override;
    const Dag& dag() const { return dag_; }

private:
    Dag dag_;
};

// ---------------------------------------------------------------------------
// Brown-Resnick / Huesler-Reiss family over planar locations

struct GridLocations {
    std::vector<std::array<double, 2>> s;

    // rows x cols unit-distance grid centred at its centroid, row-major ids.
    static GridLocations unit_grid(int rows, int cols);

    int size() const { return static_cast<int>(s.size()); }
    double distance(int i, int j) const;
    void validate() const;  // all locations distinct
};

// (|s| / rho)^alpha for alpha in (0,2], rho > 0.
double variogram(std::span<const double> s, double alpha, double rho);

// Extremal coefficient of the Brown-Resnick process for a location subset J
// (0-based indices) of size 2 or 3.
double br_extremal_coeff(std::span<const int> J, const GridLocations& locs,
                         double alpha, double rho);

// Bivariate Huesler-Reiss stdf with pair variogram value gamma:
// x1 Phi(a/2 + log(x1/x2)/a) + x2 Phi(a/2 + log(x2/x1)/a), a = sqrt(2 gamma).
double br_pair_stdf(double x1, double x2, double gamma);

class BrownResnickModel : public TailModel {
public:
    explicit BrownResnickModel(GridLocations locs);

    int dim() const override { return locs_.size(); }
    int param_dim() const override { return 2; }
    std::vector<ParamBound> param_box() const override;  // (alpha, rho)
    std::string label() const override { return "brown_resnick"; }
    // Supports points with up to four positive coordinates (the covariance
    // expansion over pair point sets never needs more).
    double eval(std::span<const double> x, std::span<const double> theta) const override;
    const GridLocations& locations() const { return locs_; }

private:
    GridLocations locs_;
};

}  // namespace taildep

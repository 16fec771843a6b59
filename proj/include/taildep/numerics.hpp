#pragma once

#include <span>
#include <vector>

#include "taildep/errors.hpp"

namespace taildep {

// Dense row-major matrix. Only the operations the estimation pipeline
// needs; no expression templates, no views.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols)
        : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, 0.0) {}

    static Matrix identity(int n);

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }

    double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    std::span<const double> data() const noexcept { return a_; }
    std::span<double> data() noexcept { return a_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
double max_abs(const Matrix& a);

// Symmetric dense matrix; set() writes both triangles so symmetry holds
// exactly by construction.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(int dim)
        : dim_(dim), a_(static_cast<size_t>(dim) * dim, 0.0) {}

    static SymMatrix identity(int n);
    // Symmetrizes a nearly-symmetric square matrix: (A + A^T)/2.
    static SymMatrix from_matrix(const Matrix& a);

    int dim() const noexcept { return dim_; }

    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * dim_ + j]; }
    void set(int i, int j, double v) {
        a_[static_cast<size_t>(i) * dim_ + j] = v;
        a_[static_cast<size_t>(j) * dim_ + i] = v;
    }
    void add(int i, int j, double v) { set(i, j, (*this)(i, j) + v); }

    double trace() const;
    Matrix to_matrix() const;
    std::span<const double> data() const noexcept { return a_; }

private:
    int dim_ = 0;
    std::vector<double> a_;
};

// Eigenvalues in non-increasing order; eigenvectors are the corresponding
// orthonormal columns of `vectors`.
struct EigenDecomp {
    std::vector<double> values;
    Matrix vectors;
};

// Standard normal distribution function, absolute error below 1e-12.
double std_normal_cdf(double x);
double std_normal_pdf(double x);

// P[X <= h, Y <= k] for a standard bivariate normal pair with correlation
// rho, via the single-integral identity over the correlation parameter
// (64-node Gauss-Legendre after an arcsine substitution).
double bivariate_normal_cdf(double h, double k, double rho);

// Chi-square upper tail, cdf and quantile via the regularized incomplete
// gamma function (series + continued fraction).
double chisq_sf(double x, int df);
double chisq_cdf(double x, int df);
double chisq_quantile(double p, int df);

// Cyclic Jacobi rotations; input must be symmetric with finite entries.
EigenDecomp sym_eigen(const SymMatrix& m);

// Cholesky-based solve/inverse for symmetric positive definite matrices.
// Throws singular_matrix_error (carrying the smallest eigenvalue) when m is
// not positive definite within tolerance 1e-10 * trace / dim.
std::vector<double> spd_solve(const SymMatrix& m, std::span<const double> rhs);
Matrix spd_solve(const SymMatrix& m, const Matrix& rhs);
SymMatrix spd_inverse(const SymMatrix& m);

// Nodes/weights of the 64-point Gauss-Legendre rule on [-1, 1].
std::span<const double> gauss_legendre_nodes64();
std::span<const double> gauss_legendre_weights64();

}  // namespace taildep

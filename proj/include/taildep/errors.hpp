#pragma once

#include <stdexcept>
#include <string>

namespace taildep {

// A symmetric matrix that was required to be positive definite is not,
// within the scale-relative tolerance 1e-10 * trace / dim.
class singular_matrix_error : public std::runtime_error {
public:
    singular_matrix_error(const std::string& what, double smallest_eigenvalue)
        : std::runtime_error(what), smallest_eigenvalue_(smallest_eigenvalue) {}

    double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

private:
    double smallest_eigenvalue_;
};

// Parameter vector outside the feasible set of a structural model
// (e.g. a DAG edge configuration forcing a negative innovation weight).
class infeasible_parameter_error : public std::runtime_error {
public:
    infeasible_parameter_error(const std::string& what, int node)
        : std::runtime_error(what), node_(node) {}

    // 1-based node index that failed, or 0 when not node-specific.
    int node() const noexcept { return node_; }

private:
    int node_;
};

// Failure of a statistical estimation step: degenerate rate-estimator
// regression, non-convergent fit, no usable spectral directions, ...
class estimation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid run configuration detected before any computation starts.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace taildep

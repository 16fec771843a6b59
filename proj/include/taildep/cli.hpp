#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taildep/estimator.hpp"

namespace taildep {

inline constexpr const char* kVersion = "0.1.0";

// Parsed command-line configuration; validated before any computation.
struct RunConfig {
    std::string command;  // simulate | fit | gof | study

    std::string input_path;
    std::string output_path;

    std::string model = "logistic";  // logistic | br | maxlinear
    std::string dag_path;
    int grid_rows = 0;
    int grid_cols = 0;

    std::string points_spec;  // grid:levels:counts | pairs:a | neighbours:maxdist | file:PATH

    int k = 0;
    std::vector<int> k_grid;
    std::string estimator = "shifted";  // shifted | raw | kernel | biascorr
    double tau = 5.0;
    int k1 = 0;
    std::string weight = "identity";  // identity | optimal | tikhonov[:c]
    std::string gof;                  // optimal | spectral[:thresh]

    std::uint64_t seed = 1;
    int reps = 0;
    int jobs = 0;
    bool dump_reps = false;

    // simulation / study truth parameters
    int n = 0;
    int d = 2;
    std::vector<double> theta;  // logistic scalar or DAG edge parameters
    double alpha = 1.0;
    double rho = 1.0;
    bool noise = false;
    double noise_sd = 0.5;

    OptimizerConfig optimizer;
};

struct RunResult {
    int exit_code = 0;
    std::string report_json;  // also written to the output path
};

// Exit codes: 0 success, 1 usage or validation failure, 2 runtime
// estimation failure.
RunResult run_simulate(const RunConfig& config);
RunResult run_fit(const RunConfig& config);
RunResult run_gof(const RunConfig& config);
RunResult run_study(const RunConfig& config);

// Full command-line entry point (argument parsing + dispatch).
int run_command(int argc, const char* const* argv);

}  // namespace taildep

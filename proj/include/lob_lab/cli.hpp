#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lob_lab/equilibrium_solver.hpp"
#include "lob_lab/exchange_sim.hpp"

namespace lob_lab::cli {

/// Process exit codes. 1 is reserved for unexpected internal errors.
enum ExitCode : int {
    kSuccess = 0,
    kInternalError = 1,
    kValidationError = 2,
    kNonConvergence = 3,
    kCheckFailed = 4,
};

struct RunConfig {
    std::string command;  ///< solve | sweep-spread | critical-alpha | verify | tails | proximity
    ModelParams params;
    SimConfig sim;
    std::optional<std::filesystem::path> output_path;  ///< stdout when absent
    std::string format;                                ///< csv | json; empty picks the command's default

    std::vector<int> n_list{10, 20, 50, 100, 200, 500, 1000};
    double tol = 1e-6;
    std::vector<double> s_list{1.0, -1.0, 2.0, -2.0};
    std::optional<std::filesystem::path> path_csv;
    std::string process;  ///< tails: brownian | perturbed; proximity: constant | stochastic-vol
    double eps = 0.01;
    double c1 = 1.0;
    std::vector<double> dt_list;
    int threads = 0;
};

/// Parses argv (flags override values read from --config). Throws
/// CLI::ParseError on malformed input.
RunConfig parse_args(int argc, const char* const* argv);

/// Dispatches one command. Result data goes to `out` (or the output file,
/// followed by a one-line summary on `out`); diagnostics go to `err`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// parse_args + run with exit-code mapping.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lob_lab::cli

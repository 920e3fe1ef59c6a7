#pragma once

// Experiment drivers behind the command-line subcommands. Each returns a
// process exit code: 0 success, 1 configuration or input error, 2 solver
// non-convergence. Messages go to `log`.

#include <iosfwd>
#include <string>
#include <vector>

#include "pdfevo/coefficients.hpp"
#include "pdfevo/config.hpp"
#include "pdfevo/csv_io.hpp"
#include "pdfevo/propagator.hpp"

namespace pdfevo::runs {

inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kNonConvergence = 2;

/// Artifact names for an output time, e.g. pdf_t2.0000.csv.
std::string pdf_file(double t);
std::string marginal_file(double t);

/// Writes pdf_t*.csv, marginal_t*.csv, moments.csv, diagnostics.csv and
/// summary.json into out_dir. Nothing is written when the configuration is
/// rejected.
int run_solve(const config::RunConfig& cfg, coefficients::Scheme scheme, const std::string& out_dir,
              std::ostream& log);

/// Same artifacts from a Monte Carlo run; moments carry standard errors.
int run_mc(const config::RunConfig& cfg, const std::string& out_dir, std::ostream& log);

/// Compares the pdf_t*.csv artifacts of two runs time by time and prints the
/// metrics as JSON to `out`; also writes compare.json when out_dir is set.
int run_compare(const std::string& dir_a, const std::string& dir_b, const std::string& out_dir, std::ostream& out,
                std::ostream& log);

struct BenchResult {
  std::vector<csv_io::BenchRow> rows;           // includes the rk4 reference rows
  std::vector<csv_io::BenchRow> constant_rows;  // errors against exp(t R0)
};

/// Phi[R](t; 0) by Peano-Baker (1..4 terms), Magnus (1..3) and RK4 at
/// t = step, 2 step, ..., t_end. Errors are Frobenius norms of the second
/// column against RK4, and against the exact exponential for the constant
/// matrix r.front().
BenchResult propagator_bench(const propagator::MatrixTrajectory& r, double t_end, double step, int rk4_steps);

/// R(t) of the configured model from a moments.csv file of a prior run.
/// Throws Error when the file lacks a needed functional or does not cover
/// [t0, t_end].
propagator::MatrixTrajectory mean_jacobian_history(const config::RunConfig& cfg, const std::string& moments_path,
                                                    double t_end);

/// Writes bench.csv, bench_constant.csv and summary.json.
int run_propagator_bench(const config::RunConfig& cfg, const std::string& out_dir, std::ostream& log);

}  // namespace pdfevo::runs

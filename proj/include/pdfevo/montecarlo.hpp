#pragma once

// Monte Carlo reference: response paths under sampled excitation paths.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdfevo/dynamics.hpp"
#include "pdfevo/excitation.hpp"
#include "pdfevo/grid.hpp"

namespace pdfevo::montecarlo {

struct McConfig {
  std::size_t n_paths = 100000;
  double dt = 0.005;              // integrator step
  double excitation_dt = 0.01;    // spacing of the sampled excitation
  std::vector<double> output_times;  // states are kept at these times
  std::vector<double> moment_times;  // moments are tracked here as well
  std::uint64_t seed = 1;
  double divergence_limit = 1e3;

  void validate() const;
};

struct McResult {
  std::vector<double> output_times;
  std::vector<Eigen::MatrixXd> states;  // per output time, N x (paths kept)
  std::vector<double> moment_times;     // union of output and moment times
  std::vector<dynamics::Monomial> functionals;
  Eigen::MatrixXd moment_values;        // time x functional
  Eigen::MatrixXd moment_errors;        // standard errors, same shape
  std::size_t n_paths = 0;
  std::size_t n_diverged = 0;
  long sampler_rank = 0;
};

/// First and second moments of a two-dimensional state, in this order:
/// x1, x2, x1^2, x1*x2, x2^2.
std::vector<dynamics::Monomial> default_functionals();

/// Colored noise: excitation paths from excitation::PathSampler (jointly with
/// the initial state), RK4 with linearly interpolated forcing. White noise:
/// Euler-Maruyama. Paths whose norm exceeds the divergence limit are dropped
/// and counted. Results do not depend on the number of worker threads.
McResult simulate(const dynamics::SystemModel& model, const excitation::ExcitationSpec& spec,
                  const excitation::GaussianLaw& initial, const McConfig& config);

struct DensityEstimate {
  grid::PdfField field;
  std::size_t outside = 0;      // samples that fell off the grid
  double outside_fraction = 0.0;
  bool smoothed = false;
  Eigen::Vector2d bandwidth = Eigen::Vector2d::Zero();
  std::string warning;          // set when more than 0.1% of samples fell outside
};

/// Histogram on the cells around each node (half cells on the boundary),
/// normalized to unit trapezoid mass over the samples inside the grid.
/// `smooth` adds Gaussian smoothing with Silverman's bandwidth.
DensityEstimate density_estimate(const Eigen::MatrixXd& samples, const grid::GridSpec& g, bool smooth = false);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Sample mean of the functional over the columns of `samples`, with
/// standard error sample-std / sqrt(n).
Estimate moment_estimate(const Eigen::MatrixXd& samples, const dynamics::Monomial& functional);

}  // namespace pdfevo::montecarlo

#pragma once

// Diffusion coefficients of the pdf-evolution models. Every colored-noise
// model has the form
//   D^{XiXi}(x,t) = \int_{t0}^{t} C(t,s) K(x,t,s) ds * mu mu^T,
//   D^{X0Xi}(x,t) = K(x,t,t0) c(t) mu^T,
// with mu the excitation mask, c(t) = cov(X0, Xi(t)), and K one of
//   SCT:    I + J^h(x,t)(t-s)
//   ngFPK:  exp(Delta(x,t)(t-s)) Phi[R](t;s),  Delta = J^h - R.

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdfevo/dynamics.hpp"
#include "pdfevo/excitation.hpp"
#include "pdfevo/grid.hpp"
#include "pdfevo/propagator.hpp"

namespace pdfevo::coefficients {

enum class Scheme { fpk, sct, ngfpk, linear_exact };

std::string to_string(Scheme s);
/// Accepts "fpk", "sct", "ngfpk", "linear-exact" and "linear_exact".
Scheme scheme_from_string(const std::string& name);

/// Mean-Jacobian history R(t) and the moments it was built from.
struct MomentHistory {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> r_matrices;
  std::vector<std::vector<double>> moments;

  void append(double t, Eigen::MatrixXd r, std::vector<double> m);
  void pop_back();
  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  bool covers(double s, double t) const;
  /// R samples from the last time at or before `from` through the newest one.
  /// Throws HistoryGapError naming the uncovered interval.
  propagator::MatrixTrajectory r_trajectory(double from, double to) const;
};

/// D(x,t) on a grid, stored once per class of nodes that share a value.
struct DiffusionField {
  int dim = 0;
  std::vector<int> node_class;
  std::vector<Eigen::MatrixXd> values;

  const Eigen::MatrixXd& at(int node) const { return values[static_cast<std::size_t>(node_class[node])]; }
  /// (D + D^T)/2, the only part the second-order operator sees.
  Eigen::MatrixXd symmetric(int node) const;
  static DiffusionField uniform(const grid::GridSpec& g, const Eigen::MatrixXd& d);
};

Eigen::MatrixXd sct_kernel(const dynamics::SystemModel& model, const Eigen::VectorXd& x, double t, double s);

/// Phi[R](t;s) by two-term Magnus on the history's R trajectory.
Eigen::MatrixXd ngfpk_kernel(const dynamics::SystemModel& model, const Eigen::VectorXd& x, double t, double s,
                             const MomentHistory& history);

using KernelFn = std::function<Eigen::MatrixXd(double s)>;
/// Matrix covariance C_{Xi_n Xi_m}(t, s) of the N-vector excitation.
using CovarianceFn = std::function<Eigen::MatrixXd(double t, double s)>;

/// Quadrature nodes for the s-integral at time t: history times in
/// [t - horizon, t) (starting at the last one at or before t - horizon), then
/// t itself, with the last interval split into `refine` pieces.
std::vector<double> convolution_nodes(std::span<const double> history_times, double t, double horizon,
                                      int refine = 4);

/// \int C(t,s) K(s) ds * mu mu^T, composite trapezoid on convolution_nodes.
Eigen::MatrixXd convolve_diffusion(const KernelFn& kernel, const excitation::ExcitationSpec& spec, double t,
                                   std::span<const double> history_grid);

/// \int K(s) C(t,s)^T ds on convolution_nodes, truncated at `horizon`.
Eigen::MatrixXd convolve_diffusion(const KernelFn& kernel, const CovarianceFn& cov, double t,
                                   std::span<const double> history_grid,
                                   double horizon = std::numeric_limits<double>::infinity());

struct LinearCoefficients {
  double d12 = 0.0;
  double d22 = 0.0;
};

/// Exact coefficients of the linear oscillator driven on its velocity equation.
LinearCoefficients linear_exact_coefficients(double zeta, double omega0, const excitation::ExcitationSpec& spec,
                                             double t);

/// White noise C = 2 D(t) delta(t - s): half of the delta mass falls inside
/// [t0, t], so the diffusion matrix is D(t) mu mu^T.
Eigen::MatrixXd white_noise_coefficients(const excitation::ExcitationSpec& spec, double t);
Eigen::MatrixXd white_noise_coefficients(double intensity, const std::vector<bool>& mask);

/// Initial-value/excitation cross term K(x,t,t0) c(t) mu^T.
Eigen::MatrixXd x0xi_coefficient(const dynamics::SystemModel& model, const excitation::ExcitationSpec& spec,
                                 const Eigen::VectorXd& x, double t, const MomentHistory& history, Scheme scheme);

/// D^{X0Xi} + D^{XiXi} on every grid node. The history must hold a sample at
/// t (the solver appends its predicted R before assembling).
DiffusionField assemble_diffusion_field(const dynamics::SystemModel& model, const excitation::ExcitationSpec& spec,
                                        const grid::GridSpec& g, double t, Scheme scheme,
                                        const MomentHistory& history, int refine = 4);

}  // namespace pdfevo::coefficients

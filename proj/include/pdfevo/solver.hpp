#pragma once

// Crank-Nicolson evolution of the response density on a 2D grid,
//   f_t + sum_n d_n[(h_n + m_n) f] = sum_{n,v} d_n d_v[D_{vn} f],
// in vertex-centered finite-volume form with zero-flux boundaries.

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pdfevo/coefficients.hpp"
#include "pdfevo/dynamics.hpp"
#include "pdfevo/excitation.hpp"
#include "pdfevo/grid.hpp"

namespace pdfevo::solver {

using Operator = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using coefficients::Scheme;

struct SolverConfig {
  double dt = 0.01;
  double t_end = 1.0;
  std::vector<double> output_times;  // t_end is always recorded
  double closure_tol = 1e-6;
  int max_closure_iterations = 10;
  int extrapolation_order = 2;
  /// Advection switches gradually to upwind above this cell Peclet number;
  /// <= 0 keeps central differences everywhere.
  double upwind_peclet = 2.0;
  bool renormalize = false;
  double linear_tol = 1e-10;
  int refine = 4;  // sub-steps of the newest interval in the memory integral

  void validate() const;
};

/// Default step: min(0.01, tau_cor / 20); 0.01 for white noise.
double default_time_step(const excitation::ExcitationSpec& spec);

/// Sparse L with df/dt = L f. Throws AssemblyError naming the node where a
/// drift or diffusion value is not finite.
Operator assemble_operator(const dynamics::SystemModel& model, const Eigen::VectorXd& excitation_mean, double t,
                           const coefficients::DiffusionField& diffusion, const grid::GridSpec& g,
                           double upwind_peclet = 2.0);

struct StepResult {
  grid::PdfField field;
  double clipped_mass = 0.0;  // mass of the negative part removed
  int linear_iterations = 0;
};

/// (I - dt/2 L_next) f' = (I + dt/2 L_now) f, negatives clipped to zero.
StepResult step(const grid::PdfField& f, const Operator& l_now, const Operator& l_next, double dt,
                double tol = 1e-10);

struct StepStats {
  double t = 0.0;
  int closure_iterations = 0;
  double closure_delta = 0.0;
  double mass = 0.0;
  double min_value = 0.0;
  double clipped_mass = 0.0;
  int linear_iterations = 0;
};

struct EvolveResult {
  std::vector<grid::PdfField> snapshots;
  coefficients::MomentHistory history;
  std::vector<StepStats> steps;
  double max_mass_drift = 0.0;
  double max_clipped_mass = 0.0;
  double max_boundary_ratio = 0.0;
  int max_closure_iterations = 0;
};

/// Closure variables of the model evaluated on a density: its moment basis,
/// or the flattened E[J^h] when the model has none.
std::vector<double> closure_state(const dynamics::SystemModel& model, const grid::PdfField& f);
Eigen::MatrixXd closure_jacobian(const dynamics::SystemModel& model, const std::vector<double>& state, double t);

/// Evolves f0 (at time f0.t) to config.t_end. ngFPK on nonlinear models
/// iterates each step until the closure variables settle; throws
/// NonConvergenceError otherwise.
EvolveResult evolve(const dynamics::SystemModel& model, const excitation::ExcitationSpec& spec,
                    const grid::PdfField& f0, const SolverConfig& config, Scheme scheme);

}  // namespace pdfevo::solver

#pragma once

// Closed-form reference solutions.

#include <Eigen/Dense>

#include "pdfevo/excitation.hpp"
#include "pdfevo/grid.hpp"

namespace pdfevo::analytic {

/// Transition matrix of x'' + 2 zeta omega0 x' + omega0^2 x = 0 over lag u.
Eigen::Matrix2d oscillator_transition(double zeta, double omega0, double u);

/// Exact Gaussian law at time t of the underdamped linear oscillator driven
/// on its velocity equation by `spec`, starting from `initial` at spec.t0().
excitation::GaussianLaw linear_gaussian_solution(double zeta, double omega0, const excitation::ExcitationSpec& spec,
                                                 const excitation::GaussianLaw& initial, double t);

/// Stationary density of the white-noise Duffing oscillator,
/// proportional to exp(-(2 zeta / D)(x2^2/2 + x1^4/4 - x1^2/2)), normalized on
/// the grid. Throws DomainError if stationary_residual exceeds 1e-8.
grid::PdfField duffing_white_noise_stationary(double zeta, double intensity, const grid::GridSpec& g);

/// Max-norm of the stationary FPK residual of that density at the grid nodes,
/// relative to the peak, from exact derivatives of the closed form.
double duffing_stationary_residual(double zeta, double intensity, const grid::GridSpec& g);

}  // namespace pdfevo::analytic

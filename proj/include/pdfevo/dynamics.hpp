#pragma once

// Dynamical systems X' = h(X, t) + Xi(t): drift, Jacobian and the moment
// functionals that determine the mean Jacobian R(t) = E[J^h(X(t), t)].

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pdfevo::dynamics {

/// x_1^{e_1} ... x_N^{e_N}
struct Monomial {
  std::vector<int> exponents;

  double operator()(std::span<const double> x) const;
  /// e.g. "x1^2", "x1*x2", "1"
  std::string name() const;
  bool operator==(const Monomial&) const = default;
};

struct SystemModel {
  using Drift = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;
  using Jacobian = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)>;
  /// states: N x B (one column per path); out gets the drift of every column.
  using BatchDrift = std::function<void(const Eigen::ArrayXXd& states, double t, Eigen::ArrayXXd& out)>;
  /// Mean Jacobian from the values of moment_basis (same order).
  using MeanJacobian = std::function<Eigen::MatrixXd(std::span<const double> moments, double t)>;

  std::string name;
  int dim = 0;
  Drift drift;
  Jacobian jacobian;
  BatchDrift batch_drift;
  std::vector<Monomial> moment_basis;
  MeanJacobian mean_jacobian_from_moments;  // empty: fall back to grid quadrature
  std::vector<bool> jacobian_depends_on;    // coordinates J^h varies with
  bool linear = false;
  std::map<std::string, double> parameters;
};

/// Nondimensional bistable Duffing oscillator x'' + 2 zeta x' - x + x^3 = Xi.
SystemModel duffing_model(double zeta);

/// Underdamped oscillator x'' + 2 zeta omega0 x' + omega0^2 x = Xi.
SystemModel linear_oscillator_model(double zeta, double omega0);

/// Dimensional Duffing oscillator m x'' + b x' + eta1 x + eta3 x^3 = xi0 Xi0.
struct DuffingParams {
  double mass = 1.0;
  double damping = 1.0;
  double eta1 = -1.0;
  double eta3 = 1.0;
  double xi0 = 1.0;
};

struct NondimensionalDuffing {
  double zeta = 0.0;
  double forcing = 0.0;      // Pi_Xi
  double time_scale = 1.0;   // t~ = t * time_scale
  double state_scale = 1.0;  // x~ = x * state_scale
};

NondimensionalDuffing nondimensionalize_duffing(const DuffingParams& params);

/// R = E[J^h] from the model's moment basis; for linear models the constant
/// Jacobian. Throws ParameterError naming the first missing functional.
Eigen::MatrixXd mean_jacobian(const SystemModel& model, std::span<const double> moments,
                              double t = 0.0);

/// Relaxation time of the associated unforced harmonic oscillator,
/// 1/(zeta omega0); omega0 = 1 for the nondimensional Duffing model.
double relaxation_time(const SystemModel& model);

/// Central-difference Jacobian of the drift, used to validate models.
Eigen::MatrixXd finite_difference_jacobian(const SystemModel& model, const Eigen::VectorXd& x,
                                           double t, double step = 1e-5);

}  // namespace pdfevo::dynamics

#pragma once

// State-transition matrices Phi[A](t; s) of Y' = A(u) Y, Y(s) = I.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pdfevo::propagator {

/// Samples of A(u) on a strictly increasing grid, linearly interpolated.
class MatrixTrajectory {
 public:
  MatrixTrajectory() = default;
  MatrixTrajectory(std::vector<double> times, std::vector<Eigen::MatrixXd> matrices);
  /// Constant A over [t0, t1].
  static MatrixTrajectory constant(const Eigen::MatrixXd& a, double t0, double t1);

  Eigen::MatrixXd at(double u) const;
  double front() const { return times_.front(); }
  double back() const { return times_.back(); }
  int dim() const { return static_cast<int>(matrices_.front().rows()); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Eigen::MatrixXd>& matrices() const { return matrices_; }
  bool covers(double s, double t) const;

 private:
  std::vector<double> times_;
  std::vector<Eigen::MatrixXd> matrices_;
};

enum class Method { peano, magnus, rk4, closed_form };

std::string to_string(Method m);

struct TransitionMatrix {
  Eigen::MatrixXd value;
  Method method = Method::closed_form;
  int order = 0;
  double s = 0.0;
  double t = 0.0;

  bool nonsingular() const;
};

/// I + sum_{k=1}^{n_terms} of the nested Peano-Baker integrals (n_terms <= 4),
/// composite trapezoid on the trajectory grid refined to at least
/// `min_subintervals` pieces over [s, t].
TransitionMatrix peano_baker(const MatrixTrajectory& a, double t, double s, int n_terms,
                             int min_subintervals = 64);

/// exp(Omega_1 + ... + Omega_n), n_terms in {1, 2, 3}.
TransitionMatrix magnus(const MatrixTrajectory& a, double t, double s, int n_terms,
                        int min_subintervals = 64);

/// Two-term Magnus approximations of Phi(nodes.back(); nodes[k]) for every k,
/// with `nodes` used directly as the quadrature grid. O(nodes) overall.
std::vector<Eigen::MatrixXd> magnus2_family(const MatrixTrajectory& a, std::span<const double> nodes);

/// Closed form for 2x2 inputs, scaling and squaring otherwise.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& m);
Eigen::Matrix2d matrix_exp(const Eigen::Matrix2d& m);

/// Classical RK4 on Y' = A(u) Y from s to t (t < s integrates backward).
TransitionMatrix rk4_transition(const MatrixTrajectory& a, double t, double s, int steps);

}  // namespace pdfevo::propagator

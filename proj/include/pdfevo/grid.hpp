#pragma once

// Uniform 2D tensor grids and densities sampled on their nodes. Quadrature is
// the trapezoid rule throughout; node k = i + n1 * j with x1 varying fastest.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pdfevo/dynamics.hpp"

namespace pdfevo::grid {

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int n = 41;

  double step() const { return (hi - lo) / (n - 1); }
  double node(int i) const { return lo + i * step(); }
  /// Trapezoid weight of node i (step, halved at the ends).
  double weight(int i) const { return (i == 0 || i == n - 1) ? 0.5 * step() : step(); }
  bool operator==(const Axis&) const = default;
};

class GridSpec {
 public:
  static constexpr int min_nodes = 41;

  GridSpec() = default;
  /// Throws ParameterError unless lo < hi and n >= min_nodes on both axes.
  GridSpec(Axis x1, Axis x2);

  const Axis& axis(int d) const { return d == 0 ? x1_ : x2_; }
  int n1() const { return x1_.n; }
  int n2() const { return x2_.n; }
  int size() const { return x1_.n * x2_.n; }
  int index(int i, int j) const { return i + x1_.n * j; }
  Eigen::Vector2d point(int k) const;
  double weight(int k) const;
  bool on_boundary(int k) const;
  bool operator==(const GridSpec&) const = default;

 private:
  Axis x1_{-1.0, 1.0, min_nodes};
  Axis x2_{-1.0, 1.0, min_nodes};
};

struct PdfField {
  GridSpec grid;
  Eigen::VectorXd values;
  double t = 0.0;
};

/// Bivariate normal density sampled on the grid (not renormalized).
PdfField gaussian_field(const GridSpec& grid, const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov,
                        double t = 0.0);

double mass(const PdfField& f);
double moment(const PdfField& f, const dynamics::Monomial& functional);
std::vector<double> moments(const PdfField& f, std::span<const dynamics::Monomial> functionals);
/// Mean and covariance of the density normalized by its own mass.
Eigen::Vector2d mean(const PdfField& f);
Eigen::Matrix2d covariance(const PdfField& f);
/// E[g(X)] for a matrix-valued g, by the same quadrature.
Eigen::MatrixXd expectation(const PdfField& f, const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& g);

/// Density of x_{axis+1} on that axis' nodes.
Eigen::VectorXd marginal(const PdfField& f, int axis);

double l1_distance(const PdfField& a, const PdfField& b);
/// Trapezoid L1 distance between two marginals on the same axis.
double l1_distance(const Axis& axis, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double integrate(const Axis& axis, const Eigen::VectorXd& values);

/// max over boundary nodes divided by the max over the grid.
double boundary_ratio(const PdfField& f);

}  // namespace pdfevo::grid

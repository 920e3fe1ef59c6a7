#include "pdfevo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pdfevo/errors.hpp"

namespace pdfevo::grid {

GridSpec::GridSpec(Axis x1, Axis x2) : x1_(x1), x2_(x2) {
  for (int d = 0; d < 2; ++d) {
    const Axis& a = axis(d);
    if (!(a.lo < a.hi)) throw ParameterError(fmt::format("grid axis x{}: need lo < hi", d + 1));
    if (a.n < min_nodes)
      throw ParameterError(fmt::format("grid axis x{}: {} nodes, at least {} required", d + 1, a.n, min_nodes));
  }
}

Eigen::Vector2d GridSpec::point(int k) const {
  return {x1_.node(k % x1_.n), x2_.node(k / x1_.n)};
}

double GridSpec::weight(int k) const { return x1_.weight(k % x1_.n) * x2_.weight(k / x1_.n); }

bool GridSpec::on_boundary(int k) const {
  const int i = k % x1_.n, j = k / x1_.n;
  return i == 0 || j == 0 || i == x1_.n - 1 || j == x2_.n - 1;
}

PdfField gaussian_field(const GridSpec& grid, const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov,
                        double t) {
  const double det = cov.determinant();
  if (!(det > 0) || !(cov(0, 0) > 0)) throw ParameterError("gaussian_field: covariance must be positive definite");
  const Eigen::Matrix2d inv = cov.inverse();
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
  PdfField f{grid, Eigen::VectorXd(grid.size()), t};
  for (int k = 0; k < grid.size(); ++k) {
    const Eigen::Vector2d d = grid.point(k) - mean;
    f.values[k] = norm * std::exp(-0.5 * d.dot(inv * d));
  }
  return f;
}

double mass(const PdfField& f) {
  double acc = 0.0;
  for (int k = 0; k < f.grid.size(); ++k) acc += f.grid.weight(k) * f.values[k];
  return acc;
}

double moment(const PdfField& f, const dynamics::Monomial& functional) {
  double acc = 0.0;
  for (int k = 0; k < f.grid.size(); ++k) {
    const Eigen::Vector2d x = f.grid.point(k);
    acc += f.grid.weight(k) * f.values[k] * functional(std::span<const double>(x.data(), 2));
  }
  return acc;
}

std::vector<double> moments(const PdfField& f, std::span<const dynamics::Monomial> functionals) {
  std::vector<double> out;
  out.reserve(functionals.size());
  for (const auto& m : functionals) out.push_back(moment(f, m));
  return out;
}

Eigen::Vector2d mean(const PdfField& f) {
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  double total = 0.0;
  for (int k = 0; k < f.grid.size(); ++k) {
    const double w = f.grid.weight(k) * f.values[k];
    acc += w * f.grid.point(k);
    total += w;
  }
  return acc / total;
}

Eigen::Matrix2d covariance(const PdfField& f) {
  const Eigen::Vector2d m = mean(f);
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  double total = 0.0;
  for (int k = 0; k < f.grid.size(); ++k) {
    const double w = f.grid.weight(k) * f.values[k];
    const Eigen::Vector2d d = f.grid.point(k) - m;
    acc += w * d * d.transpose();
    total += w;
  }
  return acc / total;
}

Eigen::MatrixXd expectation(const PdfField& f, const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& g) {
  Eigen::MatrixXd acc;
  for (int k = 0; k < f.grid.size(); ++k) {
    const Eigen::MatrixXd v = g(Eigen::VectorXd(f.grid.point(k))) * (f.grid.weight(k) * f.values[k]);
    if (k == 0)
      acc = v;
    else
      acc += v;
  }
  return acc;
}

Eigen::VectorXd marginal(const PdfField& f, int axis) {
  const GridSpec& g = f.grid;
  const int n = axis == 0 ? g.n1() : g.n2();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < g.n2(); ++j)
    for (int i = 0; i < g.n1(); ++i) {
      const double v = f.values[g.index(i, j)];
      if (axis == 0)
        out[i] += g.axis(1).weight(j) * v;
      else
        out[j] += g.axis(0).weight(i) * v;
    }
  return out;
}

double integrate(const Axis& axis, const Eigen::VectorXd& values) {
  double acc = 0.0;
  for (int i = 0; i < axis.n; ++i) acc += axis.weight(i) * values[i];
  return acc;
}

double l1_distance(const PdfField& a, const PdfField& b) {
  if (!(a.grid == b.grid)) throw GridMismatchError("l1_distance: fields live on different grids");
  double acc = 0.0;
  for (int k = 0; k < a.grid.size(); ++k) acc += a.grid.weight(k) * std::abs(a.values[k] - b.values[k]);
  return acc;
}

double l1_distance(const Axis& axis, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return integrate(axis, (a - b).cwiseAbs());
}

double boundary_ratio(const PdfField& f) {
  double edge = 0.0;
  for (int k = 0; k < f.grid.size(); ++k)
    if (f.grid.on_boundary(k)) edge = std::max(edge, std::abs(f.values[k]));
  const double peak = f.values.cwiseAbs().maxCoeff();
  return peak > 0 ? edge / peak : 0.0;
}

}  // namespace pdfevo::grid

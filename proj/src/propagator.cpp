#include "pdfevo/propagator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "pdfevo/errors.hpp"

namespace pdfevo::propagator {

namespace {

using Mat = Eigen::MatrixXd;

Mat commutator(const Mat& x, const Mat& y) { return x * y - y * x; }

// Cumulative trapezoid of g over nodes u; out[0] = 0.
std::vector<Mat> cumulative(std::span<const double> u, const std::vector<Mat>& g) {
  std::vector<Mat> out(g.size());
  out[0] = Mat::Zero(g[0].rows(), g[0].cols());
  for (std::size_t i = 1; i < g.size(); ++i)
    out[i] = out[i - 1] + 0.5 * (u[i] - u[i - 1]) * (g[i - 1] + g[i]);
  return out;
}

Mat trapezoid(std::span<const double> u, const std::vector<Mat>& g) {
  Mat acc = Mat::Zero(g[0].rows(), g[0].cols());
  for (std::size_t i = 1; i < g.size(); ++i) acc += 0.5 * (u[i] - u[i - 1]) * (g[i - 1] + g[i]);
  return acc;
}

// Quadrature nodes on [s, t]: trajectory nodes inside the interval, each piece
// split evenly so that the total count reaches min_subintervals.
std::vector<double> refined_nodes(const MatrixTrajectory& a, double s, double t, int min_subintervals) {
  std::vector<double> breaks{s};
  for (double u : a.times())
    if (u > s && u < t) breaks.push_back(u);
  breaks.push_back(t);
  const int pieces = static_cast<int>(breaks.size()) - 1;
  const int split = std::max(1, (min_subintervals + pieces - 1) / pieces);
  std::vector<double> nodes;
  nodes.reserve(static_cast<std::size_t>(pieces * split + 1));
  for (int p = 0; p < pieces; ++p)
    for (int k = 0; k < split; ++k)
      nodes.push_back(breaks[p] + (breaks[p + 1] - breaks[p]) * k / split);
  nodes.push_back(t);
  return nodes;
}

void check_interval(const MatrixTrajectory& a, double t, double s) {
  if (!a.covers(std::min(s, t), std::max(s, t)))
    throw DomainError(fmt::format("interval [{:g}, {:g}] outside trajectory [{:g}, {:g}]",
                                  std::min(s, t), std::max(s, t), a.front(), a.back()));
}

}  // namespace

MatrixTrajectory::MatrixTrajectory(std::vector<double> times, std::vector<Eigen::MatrixXd> matrices)
    : times_(std::move(times)), matrices_(std::move(matrices)) {
  if (times_.empty() || times_.size() != matrices_.size())
    throw ParameterError("trajectory needs one matrix per time");
  for (std::size_t i = 1; i < times_.size(); ++i)
    if (!(times_[i] > times_[i - 1])) throw ParameterError("trajectory times must be strictly increasing");
  for (const auto& m : matrices_)
    if (!m.allFinite()) throw ParameterError("trajectory matrix has non-finite entries");
}

MatrixTrajectory MatrixTrajectory::constant(const Eigen::MatrixXd& a, double t0, double t1) {
  return MatrixTrajectory({t0, t1}, {a, a});
}

bool MatrixTrajectory::covers(double s, double t) const {
  const double slack = 1e-12 * std::max(1.0, std::abs(back()));
  return s >= front() - slack && t <= back() + slack;
}

Eigen::MatrixXd MatrixTrajectory::at(double u) const {
  if (!covers(u, u))
    throw DomainError(fmt::format("time {:g} outside trajectory [{:g}, {:g}]", u, front(), back()));
  if (times_.size() == 1 || u <= times_.front()) return matrices_.front();
  if (u >= times_.back()) return matrices_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), u);
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  const std::size_t lo = hi - 1;
  const double w = (u - times_[lo]) / (times_[hi] - times_[lo]);
  return (1.0 - w) * matrices_[lo] + w * matrices_[hi];
}

std::string to_string(Method m) {
  switch (m) {
    case Method::peano:
      return "peano";
    case Method::magnus:
      return "magnus";
    case Method::rk4:
      return "rk4";
    case Method::closed_form:
      return "closed_form";
  }
  return "unknown";
}

bool TransitionMatrix::nonsingular() const {
  const double scale = std::pow(std::max(1.0, value.norm()), static_cast<double>(value.rows()));
  return std::abs(value.determinant()) > 1e-10 * scale;
}

TransitionMatrix peano_baker(const MatrixTrajectory& a, double t, double s, int n_terms,
                             int min_subintervals) {
  if (n_terms < 0 || n_terms > 4) throw UnsupportedError("peano_baker: n_terms must be in [0, 4]");
  if (s > t) throw DomainError("peano_baker: requires s <= t");
  check_interval(a, t, s);
  const int n = a.dim();
  TransitionMatrix out{Mat::Identity(n, n), Method::peano, n_terms, s, t};
  if (t == s || n_terms == 0) return out;

  const auto u = refined_nodes(a, s, t, min_subintervals);
  std::vector<Mat> am(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) am[i] = a.at(u[i]);

  // P_k(u) = \int_s^u A(v) P_{k-1}(v) dv, P_0 = I
  std::vector<Mat> prev(u.size(), Mat::Identity(n, n));
  std::vector<Mat> g(u.size());
  for (int k = 1; k <= n_terms; ++k) {
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = am[i] * prev[i];
    prev = cumulative(u, g);
    out.value += prev.back();
  }
  return out;
}

TransitionMatrix magnus(const MatrixTrajectory& a, double t, double s, int n_terms,
                        int min_subintervals) {
  if (n_terms < 1 || n_terms > 3)
    throw UnsupportedError(fmt::format("magnus: {} terms unsupported (Omega_1..Omega_3 only)", n_terms));
  if (s > t) throw DomainError("magnus: requires s <= t");
  check_interval(a, t, s);
  const int n = a.dim();
  TransitionMatrix out{Mat::Identity(n, n), Method::magnus, n_terms, s, t};
  if (t == s) return out;

  const auto u = refined_nodes(a, s, t, min_subintervals);
  const std::size_t m = u.size();
  std::vector<Mat> am(m);
  for (std::size_t i = 0; i < m; ++i) am[i] = a.at(u[i]);

  const std::vector<Mat> p1 = cumulative(u, am);  // \int_s^u A
  Mat omega = p1.back();

  if (n_terms >= 2) {
    std::vector<Mat> g(m);
    for (std::size_t i = 0; i < m; ++i) g[i] = commutator(am[i], p1[i]);
    omega += 0.5 * trapezoid(u, g);

    if (n_terms >= 3) {
      // [A1,[A2,A3]]: forward nesting u3 < u2 < u1
      const std::vector<Mat> inner = cumulative(u, g);
      std::vector<Mat> h(m);
      for (std::size_t i = 0; i < m; ++i) h[i] = commutator(am[i], inner[i]);
      const Mat first = trapezoid(u, h);

      // [A3,[A2,A1]]: outer variable u3, then u2 in [u3, t], u1 in [u2, t]
      std::vector<Mat> q(m);
      for (std::size_t i = 0; i < m; ++i) q[i] = commutator(am[i], p1.back() - p1[i]);
      const std::vector<Mat> qc = cumulative(u, q);
      for (std::size_t i = 0; i < m; ++i) h[i] = commutator(am[i], qc.back() - qc[i]);
      const Mat second = trapezoid(u, h);

      omega += (first + second) / 6.0;
    }
  }
  out.value = matrix_exp(omega);
  return out;
}

std::vector<Eigen::MatrixXd> magnus2_family(const MatrixTrajectory& a, std::span<const double> nodes) {
  const std::size_t m = nodes.size();
  std::vector<Mat> out(m);
  if (m == 0) return out;
  check_interval(a, nodes.back(), nodes.front());
  std::vector<Mat> am(m);
  for (std::size_t i = 0; i < m; ++i) am[i] = a.at(nodes[i]);
  const std::vector<Mat> p = cumulative(nodes, am);
  std::vector<Mat> g(m);
  for (std::size_t i = 0; i < m; ++i) g[i] = commutator(am[i], p[i]);
  const std::vector<Mat> w = cumulative(nodes, g);

  // Omega_1(t;s) = P(t) - P(s); Omega_2(t;s) = (W(t) - W(s) - [P(t), P(s)]) / 2
  const Mat& pt = p.back();
  const Mat& wt = w.back();
  for (std::size_t k = 0; k < m; ++k) {
    const Mat omega = pt - p[k] + 0.5 * (wt - w[k] - commutator(pt, p[k]));
    out[k] = matrix_exp(omega);
  }
  return out;
}

Eigen::Matrix2d matrix_exp(const Eigen::Matrix2d& m) {
  // exp(M) = e^mu [cosh(q) I + sinh(q)/q (M - mu I)], q^2 = ((a-d)/2)^2 + bc
  const double mu = 0.5 * (m(0, 0) + m(1, 1));
  const double half_diff = 0.5 * (m(0, 0) - m(1, 1));
  const double q2 = half_diff * half_diff + m(0, 1) * m(1, 0);
  double ch = 0.0, sh_q = 0.0;
  if (std::abs(q2) < 1e-4) {
    ch = 1.0 + q2 / 2.0 + q2 * q2 / 24.0 + q2 * q2 * q2 / 720.0 + q2 * q2 * q2 * q2 / 40320.0;
    sh_q = 1.0 + q2 / 6.0 + q2 * q2 / 120.0 + q2 * q2 * q2 / 5040.0 + q2 * q2 * q2 * q2 / 362880.0;
  } else if (q2 > 0) {
    const double q = std::sqrt(q2);
    ch = std::cosh(q);
    sh_q = std::sinh(q) / q;
  } else {
    const double g = std::sqrt(-q2);
    ch = std::cos(g);
    sh_q = std::sin(g) / g;
  }
  Eigen::Matrix2d n = m;
  n(0, 0) -= mu;
  n(1, 1) -= mu;
  return std::exp(mu) * (ch * Eigen::Matrix2d::Identity() + sh_q * n);
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& m) {
  if (m.rows() == 2 && m.cols() == 2) return matrix_exp(Eigen::Matrix2d(m));
  return m.exp();
}

TransitionMatrix rk4_transition(const MatrixTrajectory& a, double t, double s, int steps) {
  if (steps < 1) throw ParameterError("rk4_transition: steps must be >= 1");
  check_interval(a, t, s);
  const int n = a.dim();
  TransitionMatrix out{Mat::Identity(n, n), Method::rk4, 4, s, t};
  if (t == s) return out;
  const double h = (t - s) / steps;
  Mat y = Mat::Identity(n, n);
  for (int k = 0; k < steps; ++k) {
    const double u = s + k * h;
    const double u_end = (k + 1 == steps) ? t : u + h;
    const Mat a0 = a.at(u), a1 = a.at(u + 0.5 * h), a2 = a.at(u_end);
    const Mat k1 = a0 * y;
    const Mat k2 = a1 * (y + 0.5 * h * k1);
    const Mat k3 = a1 * (y + 0.5 * h * k2);
    const Mat k4 = a2 * (y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  out.value = y;
  return out;
}

}  // namespace pdfevo::propagator

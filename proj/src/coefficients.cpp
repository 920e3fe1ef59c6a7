#include "pdfevo/coefficients.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "pdfevo/errors.hpp"
#include "pdfevo/parallel.hpp"

namespace pdfevo::coefficients {

namespace {

using Mat = Eigen::MatrixXd;

std::vector<double> trapezoid_weights(std::span<const double> s) {
  std::vector<double> w(s.size(), 0.0);
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double h = 0.5 * (s[k] - s[k - 1]);
    w[k - 1] += h;
    w[k] += h;
  }
  return w;
}

// Transition matrix of the underdamped oscillator over a lag u.
Eigen::Matrix2d oscillator_transition(double zeta, double omega0, double u) {
  const double a = zeta * omega0;
  const double g = omega0 * std::sqrt(1.0 - zeta * zeta);
  const double e = std::exp(-a * u), c = std::cos(g * u), s = std::sin(g * u);
  Eigen::Matrix2d phi;
  phi << e * (c + a / g * s), e * s / g, -e * omega0 * omega0 / g * s, e * (c - a / g * s);
  return phi;
}

void require_linear_oscillator(const dynamics::SystemModel& model, const excitation::ExcitationSpec& spec) {
  if (!model.linear || !model.parameters.contains("omega0"))
    throw UnsupportedError("method linear-exact applies to the linear oscillator only");
  if (spec.dim() != 2 || spec.component_mask()[0] || !spec.component_mask()[1])
    throw UnsupportedError("method linear-exact expects the excitation on the velocity equation only");
}

// Classes of nodes whose Jacobian (hence kernel) coincides.
struct NodeClasses {
  std::vector<int> of_node;
  std::vector<Eigen::VectorXd> representative;
};

NodeClasses node_classes(const dynamics::SystemModel& model, const grid::GridSpec& g) {
  std::vector<bool> dep = model.jacobian_depends_on;
  if (dep.size() != 2) dep = {true, true};
  NodeClasses nc;
  nc.of_node.resize(static_cast<std::size_t>(g.size()));
  auto rep = [&](int k) { return Eigen::VectorXd(g.point(k)); };
  if (dep[0] && dep[1]) {
    for (int k = 0; k < g.size(); ++k) {
      nc.of_node[k] = k;
      nc.representative.push_back(rep(k));
    }
  } else if (dep[0]) {
    for (int i = 0; i < g.n1(); ++i) nc.representative.push_back(rep(g.index(i, 0)));
    for (int k = 0; k < g.size(); ++k) nc.of_node[k] = k % g.n1();
  } else if (dep[1]) {
    for (int j = 0; j < g.n2(); ++j) nc.representative.push_back(rep(g.index(0, j)));
    for (int k = 0; k < g.size(); ++k) nc.of_node[k] = k / g.n1();
  } else {
    nc.representative.push_back(rep(0));
    std::fill(nc.of_node.begin(), nc.of_node.end(), 0);
  }
  return nc;
}

template <class M>
M ngfpk_sum(const M& delta, std::span<const double> weights, std::span<const double> lags,
            const std::vector<M>& phi) {
  M acc = M::Zero(delta.rows(), delta.cols());
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (weights[k] == 0.0) continue;
    const M lagged = delta * lags[k];
    acc.noalias() += weights[k] * (propagator::matrix_exp(lagged) * phi[k]);
  }
  return acc;
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::fpk:
      return "fpk";
    case Scheme::sct:
      return "sct";
    case Scheme::ngfpk:
      return "ngfpk";
    case Scheme::linear_exact:
      return "linear-exact";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "fpk") return Scheme::fpk;
  if (name == "sct") return Scheme::sct;
  if (name == "ngfpk") return Scheme::ngfpk;
  if (name == "linear-exact" || name == "linear_exact") return Scheme::linear_exact;
  throw ParameterError(fmt::format("unknown method '{}' (fpk, sct, ngfpk, linear-exact)", name));
}

void MomentHistory::append(double t, Eigen::MatrixXd r, std::vector<double> m) {
  if (!times.empty() && !(t > times.back()))
    throw ParameterError(fmt::format("history append at t={:g} does not follow t={:g}", t, times.back()));
  times.push_back(t);
  r_matrices.push_back(std::move(r));
  moments.push_back(std::move(m));
}

void MomentHistory::pop_back() {
  times.pop_back();
  r_matrices.pop_back();
  moments.pop_back();
}

bool MomentHistory::covers(double s, double t) const {
  if (times.empty()) return false;
  const double slack = 1e-12 * std::max(1.0, std::abs(times.back()));
  return s >= times.front() - slack && t <= times.back() + slack;
}

propagator::MatrixTrajectory MomentHistory::r_trajectory(double from, double to) const {
  if (!covers(from, to)) {
    const std::string have = times.empty() ? "nothing" : fmt::format("[{:g}, {:g}]", times.front(), times.back());
    throw HistoryGapError(fmt::format("moment history covers {}, missing part of [{:g}, {:g}]", have, from, to));
  }
  auto lo = std::upper_bound(times.begin(), times.end(), from);
  if (lo != times.begin()) --lo;
  auto hi = std::lower_bound(times.begin(), times.end(), to);
  if (hi == times.end()) --hi;
  const auto a = static_cast<std::size_t>(lo - times.begin());
  const auto b = static_cast<std::size_t>(hi - times.begin()) + 1;
  return propagator::MatrixTrajectory(std::vector<double>(times.begin() + a, times.begin() + b),
                                      std::vector<Mat>(r_matrices.begin() + a, r_matrices.begin() + b));
}

Eigen::MatrixXd DiffusionField::symmetric(int node) const {
  const Mat& d = at(node);
  return 0.5 * (d + d.transpose());
}

DiffusionField DiffusionField::uniform(const grid::GridSpec& g, const Eigen::MatrixXd& d) {
  DiffusionField f;
  f.dim = static_cast<int>(d.rows());
  f.node_class.assign(static_cast<std::size_t>(g.size()), 0);
  f.values = {d};
  return f;
}

Eigen::MatrixXd sct_kernel(const dynamics::SystemModel& model, const Eigen::VectorXd& x, double t, double s) {
  if (s > t) throw DomainError("sct_kernel: requires s <= t");
  return Mat::Identity(model.dim, model.dim) + model.jacobian(x, t) * (t - s);
}

Eigen::MatrixXd ngfpk_kernel(const dynamics::SystemModel& model, const Eigen::VectorXd& x, double t, double s,
                             const MomentHistory& history) {
  if (s > t) throw DomainError("ngfpk_kernel: requires s <= t");
  const auto traj = history.r_trajectory(s, t);
  const Mat phi = propagator::magnus(traj, t, s, 2).value;
  const Mat delta = model.jacobian(x, t) - traj.at(t);
  return propagator::matrix_exp(Mat(delta * (t - s))) * phi;
}

std::vector<double> convolution_nodes(std::span<const double> history_times, double t, double horizon,
                                      int refine) {
  if (refine < 1) throw ParameterError("convolution_nodes: refine must be >= 1");
  const double slack = 1e-12 * std::max(1.0, std::abs(t));
  std::vector<double> past;
  for (double s : history_times)
    if (s < t - slack) past.push_back(s);
  if (past.empty()) return {t};
  // Keep one node at or before the cutoff so the truncated tail is covered.
  std::size_t first = 0;
  for (std::size_t k = 0; k < past.size(); ++k)
    if (past[k] <= t - horizon) first = k;
  std::vector<double> nodes(past.begin() + static_cast<std::ptrdiff_t>(first), past.end());
  const double last = nodes.back();
  for (int r = 1; r < refine; ++r) nodes.push_back(last + (t - last) * r / refine);
  nodes.push_back(t);
  return nodes;
}

Eigen::MatrixXd convolve_diffusion(const KernelFn& kernel, const CovarianceFn& cov, double t,
                                   std::span<const double> history_grid, double horizon) {
  const auto nodes = convolution_nodes(history_grid, t, horizon);
  const auto w = trapezoid_weights(nodes);
  Mat acc;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Mat term = w[k] * kernel(nodes[k]) * cov(t, nodes[k]).transpose();
    if (k == 0)
      acc = term;
    else
      acc += term;
  }
  return acc;
}

Eigen::MatrixXd convolve_diffusion(const KernelFn& kernel, const excitation::ExcitationSpec& spec, double t,
                                   std::span<const double> history_grid) {
  if (spec.is_white())
    throw DomainError("convolve_diffusion: white-noise excitation, use white_noise_coefficients");
  const Eigen::VectorXd mu = spec.mask_vector();
  const Mat p = mu * mu.transpose();
  auto cov = [&](double tt, double s) -> Mat { return spec.covariance(tt, s) * p; };
  return convolve_diffusion(kernel, cov, t, history_grid, spec.horizon());
}

LinearCoefficients linear_exact_coefficients(double zeta, double omega0, const excitation::ExcitationSpec& spec,
                                             double t) {
  if (!(zeta > 0)) throw ParameterError("linear_exact_coefficients: zeta must be > 0");
  if (zeta >= 1) throw UnsupportedError("linear_exact_coefficients: only the underdamped case (zeta < 1)");
  if (!(omega0 > 0)) throw ParameterError("linear_exact_coefficients: omega0 must be > 0");
  if (spec.is_white()) throw UnsupportedError("linear_exact_coefficients: white-noise excitation");
  const double a = zeta * omega0;
  const double g = omega0 * std::sqrt(1.0 - zeta * zeta);
  const double span = std::min(t - spec.t0(), spec.horizon());
  LinearCoefficients out;
  if (!(span > 0)) return out;

  using boost::math::quadrature::gauss_kronrod;
  auto f12 = [&](double u) { return spec.covariance(t, t - u) * std::exp(-a * u) * std::sin(g * u) / g; };
  auto f22 = [&](double u) {
    return spec.covariance(t, t - u) * std::exp(-a * u) * (g * std::cos(g * u) - a * std::sin(g * u)) / g;
  };
  const int pieces = static_cast<int>(std::ceil(span));
  for (int p = 0; p < pieces; ++p) {
    const double lo = span * p / pieces, hi = span * (p + 1) / pieces;
    out.d12 += gauss_kronrod<double, 31>::integrate(f12, lo, hi, 10, 1e-13);
    out.d22 += gauss_kronrod<double, 31>::integrate(f22, lo, hi, 10, 1e-13);
  }
  return out;
}

Eigen::MatrixXd white_noise_coefficients(double intensity, const std::vector<bool>& mask) {
  const auto n = static_cast<Eigen::Index>(mask.size());
  Mat d = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask[i] && mask[j]) d(i, j) = intensity;
  return d;
}

Eigen::MatrixXd white_noise_coefficients(const excitation::ExcitationSpec& spec, double t) {
  const auto* white = std::get_if<excitation::WhiteNoiseKernel>(&spec.kernel());
  if (!white) throw DomainError("white_noise_coefficients: excitation is not white");
  return white_noise_coefficients(white->intensity(t), spec.component_mask());
}

Eigen::MatrixXd x0xi_coefficient(const dynamics::SystemModel& model, const excitation::ExcitationSpec& spec,
                                 const Eigen::VectorXd& x, double t, const MomentHistory& history, Scheme scheme) {
  const int n = model.dim;
  if (!spec.has_cross_covariance() || spec.is_white()) return Mat::Zero(n, n);
  const Eigen::VectorXd c = spec.cross_covariance(t);
  const Eigen::VectorXd mu = spec.mask_vector();
  const double t0 = spec.t0();
  Mat k;
  switch (scheme) {
    case Scheme::fpk:
      return Mat::Zero(n, n);
    case Scheme::sct:
      k = sct_kernel(model, x, t, t0);
      break;
    case Scheme::ngfpk:
      k = ngfpk_kernel(model, x, t, t0, history);
      break;
    case Scheme::linear_exact:
      require_linear_oscillator(model, spec);
      k = oscillator_transition(model.parameters.at("zeta"), model.parameters.at("omega0"), t - t0);
      break;
  }
  return k * c * mu.transpose();
}

DiffusionField assemble_diffusion_field(const dynamics::SystemModel& model, const excitation::ExcitationSpec& spec,
                                        const grid::GridSpec& g, double t, Scheme scheme,
                                        const MomentHistory& history, int refine) {
  const int n = model.dim;
  if (spec.dim() != n) throw ParameterError("excitation dimension does not match the model");
  if (spec.is_white()) return DiffusionField::uniform(g, white_noise_coefficients(spec, t));
  if (scheme == Scheme::fpk) throw UnsupportedError("method fpk requires a white-noise excitation");

  const Eigen::VectorXd mu = spec.mask_vector();
  const Mat p = mu * mu.transpose();
  const bool cross = spec.has_cross_covariance();
  const Eigen::VectorXd c = spec.cross_covariance(t);
  const double t0 = spec.t0();

  if (scheme == Scheme::linear_exact) {
    require_linear_oscillator(model, spec);
    const double zeta = model.parameters.at("zeta"), omega0 = model.parameters.at("omega0");
    const auto lc = linear_exact_coefficients(zeta, omega0, spec, t);
    Mat d = Mat::Zero(2, 2);
    d(0, 1) = lc.d12;
    d(1, 1) = lc.d22;
    if (cross) d += oscillator_transition(zeta, omega0, t - t0) * c * mu.transpose();
    return DiffusionField::uniform(g, d);
  }

  const auto nodes = convolution_nodes(history.times, t, spec.horizon(), refine);
  const auto w = trapezoid_weights(nodes);
  std::vector<double> cw(nodes.size()), lag(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    lag[k] = t - nodes[k];
    cw[k] = w[k] * spec.covariance(t, nodes[k]);
  }

  const NodeClasses classes = node_classes(model, g);
  DiffusionField field;
  field.dim = n;
  field.node_class = classes.of_node;
  field.values.resize(classes.representative.size());

  if (scheme == Scheme::sct) {
    double w0 = 0.0, w1 = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      w0 += cw[k];
      w1 += cw[k] * lag[k];
    }
    parallel_for(classes.representative.size(), [&](std::size_t q) {
      const Mat j = model.jacobian(classes.representative[q], t);
      const Mat id = Mat::Identity(n, n);
      Mat d = (w0 * id + w1 * j) * p;
      if (cross) d += (id + j * (t - t0)) * c * mu.transpose();
      field.values[q] = d;
    });
    return field;
  }

  // ngFPK
  const auto traj = history.r_trajectory(nodes.front(), t);
  const std::vector<Mat> phi = propagator::magnus2_family(traj, nodes);
  const Mat r_now = traj.at(t);
  Mat phi0;
  if (cross) phi0 = propagator::magnus(history.r_trajectory(t0, t), t, t0, 2).value;

  std::vector<Eigen::Matrix2d> phi2;
  if (n == 2) phi2.assign(phi.begin(), phi.end());
  parallel_for(classes.representative.size(), [&](std::size_t q) {
    const Mat delta = model.jacobian(classes.representative[q], t) - r_now;
    Mat acc = n == 2 ? Mat(ngfpk_sum<Eigen::Matrix2d>(delta, cw, lag, phi2)) : ngfpk_sum<Mat>(delta, cw, lag, phi);
    Mat d = acc * p;
    if (cross) d += propagator::matrix_exp(Mat(delta * (t - t0))) * phi0 * c * mu.transpose();
    field.values[q] = d;
  });
  return field;
}

}  // namespace pdfevo::coefficients

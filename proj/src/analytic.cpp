#include "pdfevo/analytic.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include "pdfevo/errors.hpp"

namespace pdfevo::analytic {

namespace {

using Rule = boost::math::quadrature::gauss<double, 10>;
constexpr double kPanel = 0.25;

// Gauss-Legendre on panels of width <= kPanel covering [lo, hi].
template <class Fn>
void for_each_node(double lo, double hi, Fn&& fn) {
  if (!(hi > lo)) return;
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / kPanel)));
  const double width = (hi - lo) / panels;
  const auto& x = Rule::abscissa();
  const auto& w = Rule::weights();
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width, half = 0.5 * width;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x[k] == 0.0) {
        fn(mid, w[k] * half);
        continue;
      }
      fn(mid - half * x[k], w[k] * half);
      fn(mid + half * x[k], w[k] * half);
    }
  }
}

double stationary_log_density(double beta, double x1, double x2) {
  return -beta * (0.5 * x2 * x2 + 0.25 * x1 * x1 * x1 * x1 - 0.5 * x1 * x1);
}

}  // namespace

Eigen::Matrix2d oscillator_transition(double zeta, double omega0, double u) {
  const double a = zeta * omega0;
  const double gamma = omega0 * std::sqrt(1.0 - zeta * zeta);
  const double decay = std::exp(-a * u);
  const double c = std::cos(gamma * u), s = std::sin(gamma * u);
  Eigen::Matrix2d phi;
  phi(0, 0) = decay * (c + a * s / gamma);
  phi(0, 1) = decay * s / gamma;
  phi(1, 0) = -decay * omega0 * omega0 * s / gamma;
  phi(1, 1) = decay * (c - a * s / gamma);
  return phi;
}

excitation::GaussianLaw linear_gaussian_solution(double zeta, double omega0, const excitation::ExcitationSpec& spec,
                                                 const excitation::GaussianLaw& initial, double t) {
  if (!(zeta > 0) || !(omega0 > 0)) throw ParameterError("linear_gaussian_solution: zeta and omega0 must be > 0");
  if (zeta >= 1) throw UnsupportedError("linear_gaussian_solution: only the underdamped case (zeta < 1)");
  const double t0 = spec.t0();
  if (t < t0) throw DomainError("linear_gaussian_solution: t precedes the initial time");
  const Eigen::Vector2d mu = spec.mask_vector();
  // Response of the state at t to a unit impulse at s.
  auto g = [&](double s) -> Eigen::Vector2d { return oscillator_transition(zeta, omega0, t - s) * mu; };

  const Eigen::Matrix2d phi0 = oscillator_transition(zeta, omega0, t - t0);
  excitation::GaussianLaw out;
  Eigen::Vector2d mean = phi0 * initial.mean;
  for_each_node(t0, t, [&](double s, double w) { mean += w * spec.mean(s) * g(s); });
  out.mean = mean;

  Eigen::Matrix2d cov = phi0 * initial.cov * phi0.transpose();
  if (spec.is_white()) {
    const auto& white = std::get<excitation::WhiteNoiseKernel>(spec.kernel());
    for_each_node(t0, t, [&](double s, double w) {
      const Eigen::Vector2d gs = g(s);
      cov += w * 2.0 * white.intensity(s) * gs * gs.transpose();
    });
  } else {
    if (spec.has_cross_covariance()) {
      const Eigen::Vector2d coupling(spec.x0_coupling()[0], spec.x0_coupling()[1]);
      Eigen::Vector2d acc = Eigen::Vector2d::Zero();
      for_each_node(t0, t, [&](double s, double w) { acc += w * spec.covariance(s, t0) * g(s); });
      const Eigen::Matrix2d cross = phi0 * coupling * acc.transpose();
      cov += cross + cross.transpose();
    }
    // Split the square [t0,t]^2 along its diagonal; the kernel's decay bounds
    // the inner lag.
    const double horizon = spec.horizon();
    Eigen::Matrix2d half = Eigen::Matrix2d::Zero();
    for_each_node(t0, t, [&](double s1, double w1) {
      Eigen::Vector2d inner = Eigen::Vector2d::Zero();
      for_each_node(0.0, std::min(s1 - t0, horizon),
                    [&](double u, double w2) { inner += w2 * spec.covariance(s1, s1 - u) * g(s1 - u); });
      half += w1 * g(s1) * inner.transpose();
    });
    cov += half + half.transpose();
  }
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Eigen::Vector2d lambda = eig.eigenvalues().cwiseMax(0.0);
  out.cov = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  out.cov(1, 0) = out.cov(0, 1);
  return out;
}

double duffing_stationary_residual(double zeta, double intensity, const grid::GridSpec& g) {
  if (!(zeta > 0) || !(intensity > 0))
    throw ParameterError("duffing_stationary_residual: zeta and intensity must be > 0");
  const double beta = 2.0 * zeta / intensity;
  double peak = 0.0, worst = 0.0;
  for (int k = 0; k < g.size(); ++k) {
    const Eigen::Vector2d x = g.point(k);
    const double x1 = x[0], x2 = x[1];
    const double f = std::exp(stationary_log_density(beta, x1, x2));
    const double f1 = -beta * (x1 * x1 * x1 - x1) * f;  // d f / d x1
    const double f2 = -beta * x2 * f;
    const double f22 = (beta * beta * x2 * x2 - beta) * f;
    const double h2 = x1 - x1 * x1 * x1 - 2.0 * zeta * x2;
    // -d1(x2 f) - d2(h2 f) + D d2^2 f
    const double res = -x2 * f1 - (-2.0 * zeta * f + h2 * f2) + intensity * f22;
    peak = std::max(peak, f);
    worst = std::max(worst, std::abs(res));
  }
  return worst / peak;
}

grid::PdfField duffing_white_noise_stationary(double zeta, double intensity, const grid::GridSpec& g) {
  const double residual = duffing_stationary_residual(zeta, intensity, g);
  if (residual > 1e-8)
    throw DomainError(fmt::format("stationary density fails its residual check ({:g} > 1e-8)", residual));
  const double beta = 2.0 * zeta / intensity;
  grid::PdfField f{g, Eigen::VectorXd(g.size()), 0.0};
  for (int k = 0; k < g.size(); ++k) {
    const Eigen::Vector2d x = g.point(k);
    f.values[k] = std::exp(stationary_log_density(beta, x[0], x[1]));
  }
  f.values /= grid::mass(f);
  return f;
}

}  // namespace pdfevo::analytic

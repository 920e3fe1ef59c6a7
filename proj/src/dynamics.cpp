#include "pdfevo/dynamics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pdfevo/errors.hpp"

namespace pdfevo::dynamics {

double Monomial::operator()(std::span<const double> x) const {
  double v = 1.0;
  for (std::size_t i = 0; i < exponents.size(); ++i)
    for (int k = 0; k < exponents[i]; ++k) v *= x[i];
  return v;
}

std::string Monomial::name() const {
  std::string out;
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    if (exponents[i] == 0) continue;
    if (!out.empty()) out += "*";
    out += fmt::format("x{}", i + 1);
    if (exponents[i] > 1) out += fmt::format("^{}", exponents[i]);
  }
  return out.empty() ? "1" : out;
}

SystemModel duffing_model(double zeta) {
  if (!(zeta > 0)) throw ParameterError("duffing_model: zeta must be > 0");
  SystemModel m;
  m.name = "duffing";
  m.dim = 2;
  m.parameters = {{"zeta", zeta}};
  m.drift = [zeta](const Eigen::VectorXd& x, double) {
    Eigen::VectorXd h(2);
    h << x[1], -x[0] * x[0] * x[0] + x[0] - 2.0 * zeta * x[1];
    return h;
  };
  m.jacobian = [zeta](const Eigen::VectorXd& x, double) {
    Eigen::MatrixXd j(2, 2);
    j << 0.0, 1.0, 1.0 - 3.0 * x[0] * x[0], -2.0 * zeta;
    return j;
  };
  m.batch_drift = [zeta](const Eigen::ArrayXXd& s, double, Eigen::ArrayXXd& out) {
    out.resize(2, s.cols());
    out.row(0) = s.row(1);
    out.row(1) = s.row(0) - s.row(0).cube() - 2.0 * zeta * s.row(1);
  };
  m.moment_basis = {Monomial{{2, 0}}};
  m.mean_jacobian_from_moments = [zeta](std::span<const double> mom, double) {
    Eigen::MatrixXd r(2, 2);
    r << 0.0, 1.0, 1.0 - 3.0 * mom[0], -2.0 * zeta;
    return r;
  };
  m.jacobian_depends_on = {true, false};
  return m;
}

SystemModel linear_oscillator_model(double zeta, double omega0) {
  if (!(zeta > 0 && zeta < 1)) throw ParameterError("linear_oscillator_model: need 0 < zeta < 1");
  if (!(omega0 > 0)) throw ParameterError("linear_oscillator_model: omega0 must be > 0");
  Eigen::MatrixXd jac(2, 2);
  jac << 0.0, 1.0, -omega0 * omega0, -2.0 * zeta * omega0;

  SystemModel m;
  m.name = "linear_oscillator";
  m.dim = 2;
  m.linear = true;
  m.parameters = {{"zeta", zeta}, {"omega0", omega0}};
  m.drift = [jac](const Eigen::VectorXd& x, double) -> Eigen::VectorXd { return jac * x; };
  m.jacobian = [jac](const Eigen::VectorXd&, double) { return jac; };
  const double w2 = omega0 * omega0, c = 2.0 * zeta * omega0;
  m.batch_drift = [w2, c](const Eigen::ArrayXXd& s, double, Eigen::ArrayXXd& out) {
    out.resize(2, s.cols());
    out.row(0) = s.row(1);
    out.row(1) = -w2 * s.row(0) - c * s.row(1);
  };
  m.mean_jacobian_from_moments = [jac](std::span<const double>, double) { return jac; };
  m.jacobian_depends_on = {false, false};
  return m;
}

NondimensionalDuffing nondimensionalize_duffing(const DuffingParams& p) {
  if (!(p.mass > 0)) throw ParameterError("nondimensionalize_duffing: mass must be > 0");
  if (!(p.damping > 0)) throw ParameterError("nondimensionalize_duffing: damping must be > 0");
  if (!(p.xi0 >= 0)) throw ParameterError("nondimensionalize_duffing: xi0 must be >= 0");
  if (!(p.eta1 < 0)) throw ParameterError("nondimensionalize_duffing: eta1 must be < 0 (bistable)");
  if (!(p.eta3 > 0)) throw ParameterError("nondimensionalize_duffing: eta3 must be > 0");
  const double e1 = std::abs(p.eta1);
  NondimensionalDuffing out;
  out.zeta = p.damping / (2.0 * std::sqrt(p.mass * e1));
  out.forcing = p.xi0 * std::sqrt(p.eta3 / (e1 * e1 * e1));
  out.time_scale = std::sqrt(e1 / p.mass);
  out.state_scale = std::sqrt(p.eta3 / e1);
  return out;
}

Eigen::MatrixXd mean_jacobian(const SystemModel& model, std::span<const double> moments, double t) {
  if (!model.mean_jacobian_from_moments)
    throw UnsupportedError(fmt::format(
        "model '{}' has no moment closure for its mean Jacobian; use grid quadrature", model.name));
  if (moments.size() < model.moment_basis.size())
    throw ParameterError(fmt::format("mean_jacobian: missing moment E[{}]",
                                     model.moment_basis[moments.size()].name()));
  return model.mean_jacobian_from_moments(moments, t);
}

double relaxation_time(const SystemModel& model) {
  const double zeta = model.parameters.at("zeta");
  const auto it = model.parameters.find("omega0");
  const double omega0 = it == model.parameters.end() ? 1.0 : it->second;
  return 1.0 / (zeta * omega0);
}

Eigen::MatrixXd finite_difference_jacobian(const SystemModel& model, const Eigen::VectorXd& x,
                                           double t, double step) {
  const int n = model.dim;
  Eigen::MatrixXd j(n, n);
  for (int c = 0; c < n; ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp[c] += step;
    xm[c] -= step;
    j.col(c) = (model.drift(xp, t) - model.drift(xm, t)) / (2.0 * step);
  }
  return j;
}

}  // namespace pdfevo::dynamics

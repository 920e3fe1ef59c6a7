#include "pdfevo/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "pdfevo/errors.hpp"

namespace pdfevo::solver {

namespace {

constexpr double kTimeSlack = 1e-6;  // relative to dt

// 3x3 stencil per row; slot (di + 1) + 3 (dj + 1).
class StencilBuilder {
 public:
  explicit StencilBuilder(const grid::GridSpec& g) : g_(g), rows_(static_cast<std::size_t>(g.size())) {
    for (auto& r : rows_) r.fill(0.0);
  }

  void add(int row, int node, double value) {
    const int di = node % g_.n1() - row % g_.n1();
    const int dj = node / g_.n1() - row / g_.n1();
    rows_[static_cast<std::size_t>(row)][static_cast<std::size_t>((di + 1) + 3 * (dj + 1))] += value;
  }

  Operator build() const {
    const int n = g_.size();
    Operator m(n, n);
    m.reserve(Eigen::VectorXi::Constant(n, 9));
    for (int k = 0; k < n; ++k) {
      const int i = k % g_.n1(), j = k / g_.n1();
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const double v = rows_[static_cast<std::size_t>(k)][static_cast<std::size_t>((di + 1) + 3 * (dj + 1))];
          if (v == 0.0) continue;
          if (i + di < 0 || i + di >= g_.n1() || j + dj < 0 || j + dj >= g_.n2()) continue;
          m.insert(k, g_.index(i + di, j + dj)) = v;
        }
    }
    m.makeCompressed();
    return m;
  }

 private:
  const grid::GridSpec& g_;
  std::vector<std::array<double, 9>> rows_;
};

struct Term {
  int node;
  double coef;
};

// Face value of d_v(g) on the face between nodes a and b, where the face is
// normal to the other axis: average of the central differences at a and b,
// one-sided at the ends of the v axis.
void cross_derivative(const grid::GridSpec& g, int axis, int a, int b, const Eigen::VectorXd& coef, double scale,
                      std::vector<Term>& out) {
  const int stride = axis == 0 ? 1 : g.n1();
  const int n = axis == 0 ? g.n1() : g.n2();
  const double h = g.axis(axis).step();
  for (int node : {a, b}) {
    const int pos = axis == 0 ? node % g.n1() : node / g.n1();
    int lo = node - stride, hi = node + stride;
    double width = 2.0 * h;
    if (pos == 0) {
      lo = node;
      width = h;
    } else if (pos == n - 1) {
      hi = node;
      width = h;
    }
    out.push_back({hi, 0.5 * scale * coef[hi] / width});
    out.push_back({lo, -0.5 * scale * coef[lo] / width});
  }
}

double lagrange_extrapolate(std::span<const double> t, std::span<const double> y, double at) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double l = 1.0;
    for (std::size_t j = 0; j < t.size(); ++j)
      if (j != i) l *= (at - t[j]) / (t[i] - t[j]);
    acc += l * y[i];
  }
  return acc;
}

std::vector<double> extrapolate_state(const coefficients::MomentHistory& h, double t, int order) {
  const std::size_t n = std::min<std::size_t>(h.size(), static_cast<std::size_t>(order) + 1);
  const std::size_t first = h.size() - n;
  std::vector<double> ts(h.times.begin() + static_cast<std::ptrdiff_t>(first), h.times.end());
  std::vector<double> out(h.moments.back().size());
  std::vector<double> ys(n);
  for (std::size_t c = 0; c < out.size(); ++c) {
    for (std::size_t k = 0; k < n; ++k) ys[k] = h.moments[first + k][c];
    out[c] = lagrange_extrapolate(ts, ys, t);
  }
  return out;
}

// Uniform steps of dt, with output times and t_end inserted as extra stops.
std::vector<double> step_times(double t0, const SolverConfig& cfg) {
  const double eps = kTimeSlack * cfg.dt;
  std::vector<double> pts;
  for (long k = 1;; ++k) {
    const double t = t0 + static_cast<double>(k) * cfg.dt;
    if (t >= cfg.t_end - eps) break;
    pts.push_back(t);
  }
  std::vector<double> marks{cfg.t_end};
  for (double t : cfg.output_times)
    if (t > t0 + eps && t < cfg.t_end) marks.push_back(t);
  for (double m : marks) {
    auto it = std::lower_bound(pts.begin(), pts.end(), m - eps);
    if (it != pts.end() && std::abs(*it - m) <= eps)
      *it = m;
    else
      pts.insert(it, m);
  }
  return pts;
}

bool wanted(const SolverConfig& cfg, double t) {
  const double eps = kTimeSlack * cfg.dt;
  if (std::abs(t - cfg.t_end) <= eps) return true;
  return std::any_of(cfg.output_times.begin(), cfg.output_times.end(),
                     [&](double o) { return std::abs(o - t) <= eps; });
}

}  // namespace

void SolverConfig::validate() const {
  if (!(dt > 0)) throw ParameterError("solver: dt must be > 0");
  if (!(closure_tol > 0)) throw ParameterError("solver: closure tolerance must be > 0");
  if (max_closure_iterations < 1) throw ParameterError("solver: max closure iterations must be >= 1");
  if (extrapolation_order < 0 || extrapolation_order > 2)
    throw ParameterError("solver: extrapolation order must be 0, 1 or 2");
  if (!(linear_tol > 0)) throw ParameterError("solver: linear tolerance must be > 0");
  if (refine < 1) throw ParameterError("solver: refine must be >= 1");
}

double default_time_step(const excitation::ExcitationSpec& spec) {
  if (spec.is_white()) return 0.01;
  return std::min(0.01, excitation::correlation_time(spec) / 20.0);
}

Operator assemble_operator(const dynamics::SystemModel& model, const Eigen::VectorXd& excitation_mean, double t,
                           const coefficients::DiffusionField& diffusion, const grid::GridSpec& g,
                           double upwind_peclet) {
  if (model.dim != 2) throw UnsupportedError("assemble_operator: only two-dimensional models");
  const int n = g.size();
  Eigen::ArrayXXd x(2, n), v;
  for (int k = 0; k < n; ++k) x.col(k) = g.point(k).array();
  model.batch_drift(x, t, v);
  v.colwise() += excitation_mean.array();

  // Symmetric diffusion per node: s11, s12, s22
  std::array<Eigen::VectorXd, 3> s{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int k = 0; k < n; ++k) {
    const Eigen::MatrixXd& d = diffusion.at(k);
    s[0][k] = d(0, 0);
    s[1][k] = 0.5 * (d(0, 1) + d(1, 0));
    s[2][k] = d(1, 1);
    if (!std::isfinite(v(0, k)) || !std::isfinite(v(1, k)) || !d.allFinite()) {
      const Eigen::Vector2d p = g.point(k);
      throw AssemblyError(fmt::format("non-finite coefficient at node ({:g}, {:g}), t={:g}", p[0], p[1], t));
    }
  }

  StencilBuilder st(g);
  std::vector<Term> terms;
  for (int axis = 0; axis < 2; ++axis) {
    const int other = 1 - axis;
    const double h = g.axis(axis).step();
    const Eigen::VectorXd& snn = s[axis == 0 ? 0 : 2];
    const int ni = axis == 0 ? g.n1() - 1 : g.n1();
    const int nj = axis == 0 ? g.n2() : g.n2() - 1;
    for (int j = 0; j < nj; ++j)
      for (int i = 0; i < ni; ++i) {
        const int a = g.index(i, j);
        const int b = axis == 0 ? g.index(i + 1, j) : g.index(i, j + 1);
        terms.clear();

        // Advective flux: central, blended toward upwind at high Peclet number
        const double va = v(axis, a), vb = v(axis, b);
        const double vf = 0.5 * (va + vb);
        const double sf = 0.5 * (snn[a] + snn[b]);
        // Faces touching the boundary: upwind, no cross diffusion.
        const bool edge = g.on_boundary(a) || g.on_boundary(b);
        double theta = edge ? 1.0 : 0.0;
        if (!edge && upwind_peclet > 0 && sf > 0) {
          const double pe = std::abs(vf) * h / sf;
          if (pe > upwind_peclet) theta = 1.0 - upwind_peclet / pe;
        }
        terms.push_back({a, (1.0 - theta) * 0.5 * va});
        terms.push_back({b, (1.0 - theta) * 0.5 * vb});
        terms.push_back({vf > 0 ? a : b, theta * vf});

        // -d_axis(S_aa f) - d_other(S_ao f)
        terms.push_back({b, -snn[b] / h});
        terms.push_back({a, snn[a] / h});
        if (!edge) cross_derivative(g, other, a, b, s[1], -1.0, terms);

        const double wa = (axis == 0 ? g.axis(0).weight(i) : g.axis(1).weight(j));
        const double wb = (axis == 0 ? g.axis(0).weight(i + 1) : g.axis(1).weight(j + 1));
        for (const Term& term : terms) {
          st.add(a, term.node, -term.coef / wa);
          st.add(b, term.node, term.coef / wb);
        }
      }
  }
  return st.build();
}

StepResult step(const grid::PdfField& f, const Operator& l_now, const Operator& l_next, double dt, double tol) {
  const int n = f.grid.size();
  if (l_now.rows() != n || l_next.rows() != n) throw StepError("step: operator size does not match the grid");
  Operator id(n, n);
  id.setIdentity();
  const Operator a = id - (0.5 * dt) * l_next;
  const Eigen::VectorXd rhs = f.values + (0.5 * dt) * (l_now * f.values);

  StepResult out{f, 0.0, 0};
  out.field.t = f.t + dt;
  bool solved = false;
  {
    Eigen::BiCGSTAB<Operator, Eigen::DiagonalPreconditioner<double>> it;
    it.setTolerance(tol);
    it.setMaxIterations(500);
    it.compute(a);
    out.field.values = it.solveWithGuess(rhs, f.values);
    out.linear_iterations = static_cast<int>(it.iterations());
    solved = it.info() == Eigen::Success;
  }
  if (!solved) {
    Eigen::BiCGSTAB<Operator, Eigen::IncompleteLUT<double>> it;
    it.setTolerance(tol);
    it.setMaxIterations(500);
    it.compute(a);
    out.field.values = it.solveWithGuess(rhs, f.values);
    out.linear_iterations += static_cast<int>(it.iterations());
    solved = it.info() == Eigen::Success;
  }
  if (!solved) {
    Eigen::SparseMatrix<double> ac = a;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(ac);
    if (lu.info() != Eigen::Success) throw StepError(fmt::format("linear solve failed at t={:g}", out.field.t));
    out.field.values = lu.solve(rhs);
  }
  if (!out.field.values.allFinite()) throw StepError(fmt::format("non-finite density at t={:g}", out.field.t));

  for (int k = 0; k < n; ++k)
    if (out.field.values[k] < 0) {
      out.clipped_mass -= f.grid.weight(k) * out.field.values[k];
      out.field.values[k] = 0.0;
    }
  return out;
}

std::vector<double> closure_state(const dynamics::SystemModel& model, const grid::PdfField& f) {
  if (model.mean_jacobian_from_moments) return grid::moments(f, model.moment_basis);
  const double m = grid::mass(f);
  const Eigen::MatrixXd r = grid::expectation(f, [&](const Eigen::VectorXd& x) { return model.jacobian(x, f.t); }) / m;
  return {r.data(), r.data() + r.size()};
}

Eigen::MatrixXd closure_jacobian(const dynamics::SystemModel& model, const std::vector<double>& state, double t) {
  if (model.mean_jacobian_from_moments) return dynamics::mean_jacobian(model, state, t);
  return Eigen::Map<const Eigen::MatrixXd>(state.data(), model.dim, model.dim);
}

EvolveResult evolve(const dynamics::SystemModel& model, const excitation::ExcitationSpec& spec,
                    const grid::PdfField& f0, const SolverConfig& config, Scheme scheme) {
  config.validate();
  if (!(config.t_end > f0.t)) throw ParameterError("solver: t_end must exceed the initial time");
  if (spec.dim() != model.dim) throw ParameterError("solver: excitation dimension does not match the model");

  const bool closure = scheme == Scheme::ngfpk && !model.linear && !spec.is_white();
  const grid::GridSpec& g = f0.grid;
  const double mass0 = grid::mass(f0);

  EvolveResult res;
  auto& history = res.history;
  grid::PdfField f = f0;
  std::vector<double> state = closure_state(model, f);
  history.append(f.t, closure_jacobian(model, state, f.t), state);
  if (wanted(config, f.t)) res.snapshots.push_back(f);

  auto operator_at = [&](double t) {
    const auto d = coefficients::assemble_diffusion_field(model, spec, g, t, scheme, history, config.refine);
    return assemble_operator(model, spec.mean_vector(t), t, d, g, config.upwind_peclet);
  };
  // Assembles with a provisional history sample at t, then removes it.
  auto trial_operator = [&](double t, const std::vector<double>& st) {
    history.append(t, closure_jacobian(model, st, t), st);
    try {
      Operator l = operator_at(t);
      history.pop_back();
      return l;
    } catch (...) {
      history.pop_back();
      throw;
    }
  };

  Operator l_now = operator_at(f.t);
  for (double t_new : step_times(f.t, config)) {
    const double dt = t_new - f.t;
    StepStats stats;
    stats.t = t_new;
    StepResult sr;
    Operator l_new;
    std::vector<double> used;
    if (closure) {
      std::vector<double> guess = extrapolate_state(history, t_new, config.extrapolation_order);
      bool converged = false;
      double delta = 0.0;
      for (int it = 1; it <= config.max_closure_iterations; ++it) {
        l_new = trial_operator(t_new, guess);
        sr = step(f, l_now, l_new, dt, config.linear_tol);
        const std::vector<double> fresh = closure_state(model, sr.field);
        delta = 0.0;
        for (std::size_t c = 0; c < fresh.size(); ++c) delta = std::max(delta, std::abs(fresh[c] - guess[c]));
        stats.closure_iterations = it;
        stats.linear_iterations += sr.linear_iterations;
        if (delta < config.closure_tol) {
          converged = true;
          break;
        }
        guess = fresh;
      }
      stats.closure_delta = delta;
      if (!converged)
        throw NonConvergenceError(
            fmt::format("closure did not converge at t={:g} after {} iterations (last change {:g})", t_new,
                        config.max_closure_iterations, delta),
            delta);
      used = guess;
    } else {
      l_new = trial_operator(t_new, history.moments.back());
      sr = step(f, l_now, l_new, dt, config.linear_tol);
      stats.closure_iterations = 1;
      stats.linear_iterations = sr.linear_iterations;
      used = closure_state(model, sr.field);
    }

    f = std::move(sr.field);
    f.t = t_new;
    if (config.renormalize) f.values /= grid::mass(f);
    history.append(t_new, closure_jacobian(model, used, t_new), used);
    l_now = std::move(l_new);

    stats.mass = grid::mass(f);
    stats.min_value = f.values.minCoeff();
    stats.clipped_mass = sr.clipped_mass;
    res.steps.push_back(stats);
    res.max_mass_drift = std::max(res.max_mass_drift, std::abs(stats.mass - mass0));
    res.max_clipped_mass = std::max(res.max_clipped_mass, stats.clipped_mass);
    res.max_closure_iterations = std::max(res.max_closure_iterations, stats.closure_iterations);
    if (wanted(config, t_new)) {
      res.snapshots.push_back(f);
      res.max_boundary_ratio = std::max(res.max_boundary_ratio, grid::boundary_ratio(f));
    }
  }
  return res;
}

}  // namespace pdfevo::solver

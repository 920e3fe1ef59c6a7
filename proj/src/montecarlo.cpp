#include "pdfevo/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include <fmt/format.h>

#include "pdfevo/errors.hpp"
#include "pdfevo/parallel.hpp"

namespace pdfevo::montecarlo {

namespace {

using Array = Eigen::ArrayXXd;

struct Schedule {
  std::vector<double> stops;       // integrator stop times after t0
  std::vector<int> record_of_stop;  // index into record times, or -1
};

Schedule make_schedule(double t0, double dt, const std::vector<double>& records) {
  const double eps = 1e-6 * dt;
  Schedule s;
  const double t_end = records.back();
  for (long k = 1;; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    if (t >= t_end - eps) break;
    s.stops.push_back(t);
  }
  for (double r : records) {
    if (r <= t0 + eps) continue;
    auto it = std::lower_bound(s.stops.begin(), s.stops.end(), r - eps);
    if (it != s.stops.end() && std::abs(*it - r) <= eps)
      *it = r;
    else
      s.stops.insert(it, r);
  }
  s.record_of_stop.assign(s.stops.size(), -1);
  for (std::size_t r = 0; r < records.size(); ++r) {
    auto it = std::lower_bound(s.stops.begin(), s.stops.end(), records[r] - eps);
    if (it != s.stops.end() && std::abs(*it - records[r]) <= eps)
      s.record_of_stop[static_cast<std::size_t>(it - s.stops.begin())] = static_cast<int>(r);
  }
  return s;
}

std::mt19937_64 block_rng(std::uint64_t seed, std::size_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd covariance_root(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff()))
    throw NotPsdError("initial covariance is not positive semidefinite");
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

struct BlockResult {
  std::vector<Array> records;  // per record time, N x n
  std::vector<char> valid;
};

// Marks paths whose norm left the admissible region and parks them at 0.
void check_divergence(Array& s, std::vector<char>& valid, double limit) {
  for (Eigen::Index p = 0; p < s.cols(); ++p) {
    if (!valid[static_cast<std::size_t>(p)]) continue;
    const double norm = s.col(p).matrix().norm();
    if (!(norm <= limit)) {
      valid[static_cast<std::size_t>(p)] = 0;
      s.col(p).setZero();
    }
  }
}

}  // namespace

void McConfig::validate() const {
  if (n_paths < 1000) throw ParameterError("mc: at least 1000 paths required");
  if (!(dt > 0)) throw ParameterError("mc: dt must be > 0");
  if (!(excitation_dt > 0)) throw ParameterError("mc: excitation_dt must be > 0");
  if (output_times.empty() && moment_times.empty()) throw ParameterError("mc: no output or moment times");
  if (!(divergence_limit > 0)) throw ParameterError("mc: divergence limit must be > 0");
}

std::vector<dynamics::Monomial> default_functionals() {
  return {dynamics::Monomial{{1, 0}}, dynamics::Monomial{{0, 1}}, dynamics::Monomial{{2, 0}},
          dynamics::Monomial{{1, 1}}, dynamics::Monomial{{0, 2}}};
}

McResult simulate(const dynamics::SystemModel& model, const excitation::ExcitationSpec& spec,
                  const excitation::GaussianLaw& initial, const McConfig& config) {
  config.validate();
  const int dim = model.dim;
  if (spec.dim() != dim) throw ParameterError("mc: excitation dimension does not match the model");
  if (initial.mean.size() != dim || initial.cov.rows() != dim)
    throw ParameterError("mc: initial law dimension does not match the model");
  const double t0 = spec.t0();

  std::vector<double> records = config.output_times;
  records.insert(records.end(), config.moment_times.begin(), config.moment_times.end());
  std::sort(records.begin(), records.end());
  records.erase(std::unique(records.begin(), records.end(),
                            [&](double a, double b) { return std::abs(a - b) <= 1e-6 * config.dt; }),
                records.end());
  if (records.front() < t0 - 1e-12) throw ParameterError("mc: record time before the initial time");
  const Schedule sched = make_schedule(t0, config.dt, records);
  const double t_end = records.back();

  const bool white = spec.is_white();
  std::vector<double> xi_grid;
  std::optional<excitation::PathSampler> sampler;
  Eigen::MatrixXd x0_root;
  if (white) {
    x0_root = covariance_root(initial.cov);
  } else {
    const int m = static_cast<int>(std::ceil((t_end - t0) / config.excitation_dt - 1e-9)) + 1;
    for (int k = 0; k < std::max(m, 2); ++k) xi_grid.push_back(t0 + k * config.excitation_dt);
    sampler.emplace(spec, xi_grid, initial);
  }
  const Eigen::VectorXd mu = spec.mask_vector();
  std::vector<int> forced;
  for (int c = 0; c < dim; ++c)
    if (mu[c] != 0.0) forced.push_back(c);

  const std::size_t block_size = excitation::PathSampler::block_size;
  const std::size_t n_blocks = (config.n_paths + block_size - 1) / block_size;

  auto run_block = [&](std::size_t b) {
    const std::size_t n = std::min(block_size, config.n_paths - b * block_size);
    const auto cols = static_cast<Eigen::Index>(n);
    BlockResult out;
    out.records.resize(records.size());
    out.valid.assign(n, 1);
    Array s(dim, cols), k1, k2, k3, k4, tmp;

    if (white) {
      auto rng = block_rng(config.seed, b);
      std::normal_distribution<double> normal;
      Eigen::MatrixXd z(dim, cols);
      for (Eigen::Index p = 0; p < cols; ++p)
        for (int c = 0; c < dim; ++c) z(c, p) = normal(rng);
      s = ((x0_root * z).colwise() + initial.mean).array();
      const auto& kernel = std::get<excitation::WhiteNoiseKernel>(spec.kernel());
      double t = t0;
      for (std::size_t r = 0; r < records.size(); ++r)
        if (std::abs(records[r] - t0) <= 1e-6 * config.dt) out.records[r] = s;
      Eigen::ArrayXd noise(cols);
      for (std::size_t k = 0; k < sched.stops.size(); ++k) {
        const double h = sched.stops[k] - t;
        model.batch_drift(s, t, k1);
        const double amp = std::sqrt(2.0 * kernel.intensity(t) * h);
        const double m = spec.mean(t);
        for (Eigen::Index p = 0; p < cols; ++p) noise[p] = normal(rng);
        for (int c : forced) {
          k1.row(c) += mu[c] * m;
          s.row(c) += mu[c] * amp * noise.transpose();
        }
        s += h * k1;
        t = sched.stops[k];
        check_divergence(s, out.valid, config.divergence_limit);
        if (sched.record_of_stop[k] >= 0) out.records[static_cast<std::size_t>(sched.record_of_stop[k])] = s;
      }
      return out;
    }

    Eigen::MatrixXd joint;
    sampler->sample_block(config.seed, b, n, joint);
    s = joint.topRows(dim).array();
    const Eigen::MatrixXd xi = joint.bottomRows(static_cast<Eigen::Index>(xi_grid.size())).transpose();
    const double edt = config.excitation_dt;
    const auto last = static_cast<Eigen::Index>(xi_grid.size()) - 2;
    Eigen::ArrayXd force(cols);
    auto forcing = [&](double u) {
      const double pos = (u - t0) / edt;
      const Eigen::Index k = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), 0, last);
      const double w = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
      force = (1.0 - w) * xi.col(k).array() + w * xi.col(k + 1).array();
    };
    auto deriv = [&](const Array& x, double u, Array& d) {
      model.batch_drift(x, u, d);
      forcing(u);
      for (int c : forced) d.row(c) += mu[c] * force.transpose();
    };

    for (std::size_t r = 0; r < records.size(); ++r)
      if (std::abs(records[r] - t0) <= 1e-6 * config.dt) out.records[r] = s;
    double t = t0;
    for (std::size_t k = 0; k < sched.stops.size(); ++k) {
      const double h = sched.stops[k] - t;
      deriv(s, t, k1);
      tmp = s + 0.5 * h * k1;
      deriv(tmp, t + 0.5 * h, k2);
      tmp = s + 0.5 * h * k2;
      deriv(tmp, t + 0.5 * h, k3);
      tmp = s + h * k3;
      deriv(tmp, sched.stops[k], k4);
      s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = sched.stops[k];
      check_divergence(s, out.valid, config.divergence_limit);
      if (sched.record_of_stop[k] >= 0) out.records[static_cast<std::size_t>(sched.record_of_stop[k])] = s;
    }
    return out;
  };

  McResult res;
  res.output_times = config.output_times;
  res.moment_times = records;
  res.functionals = default_functionals();
  res.n_paths = config.n_paths;
  res.sampler_rank = sampler ? static_cast<long>(sampler->rank()) : 0;
  const auto n_rec = static_cast<Eigen::Index>(records.size());
  const auto n_fun = static_cast<Eigen::Index>(res.functionals.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n_rec, n_fun), sum_sq = Eigen::MatrixXd::Zero(n_rec, n_fun);
  std::vector<std::vector<Eigen::VectorXd>> kept(config.output_times.size());
  std::vector<int> out_record(config.output_times.size());
  for (std::size_t o = 0; o < config.output_times.size(); ++o) {
    auto it = std::lower_bound(records.begin(), records.end(), config.output_times[o] - 1e-6 * config.dt);
    out_record[o] = static_cast<int>(it - records.begin());
  }

  std::size_t n_valid = 0;
  // Blocks run in waves; the merge follows block order.
  const std::size_t wave = std::max<std::size_t>(1, worker_count());
  std::vector<BlockResult> results;
  for (std::size_t first = 0; first < n_blocks; first += wave) {
    const std::size_t count = std::min(wave, n_blocks - first);
    results.assign(count, {});
    parallel_for(count, [&](std::size_t i) { results[i] = run_block(first + i); });
    for (const BlockResult& br : results) {
      for (std::size_t p = 0; p < br.valid.size(); ++p) {
        if (!br.valid[p]) {
          ++res.n_diverged;
          continue;
        }
        ++n_valid;
        for (Eigen::Index r = 0; r < n_rec; ++r) {
          const auto& rec = br.records[static_cast<std::size_t>(r)];
          const double x1 = rec(0, static_cast<Eigen::Index>(p));
          const double x2 = dim > 1 ? rec(1, static_cast<Eigen::Index>(p)) : 0.0;
          const double g[5] = {x1, x2, x1 * x1, x1 * x2, x2 * x2};
          for (Eigen::Index f = 0; f < n_fun; ++f) {
            sum(r, f) += g[f];
            sum_sq(r, f) += g[f] * g[f];
          }
        }
        for (std::size_t o = 0; o < kept.size(); ++o)
          kept[o].push_back(br.records[static_cast<std::size_t>(out_record[o])].col(static_cast<Eigen::Index>(p)));
      }
    }
  }
  if (n_valid < 2) throw DivergenceError("mc: fewer than two paths stayed bounded");

  const double n = static_cast<double>(n_valid);
  res.moment_values = sum / n;
  res.moment_errors =
      ((sum_sq / n - res.moment_values.cwiseAbs2()).cwiseMax(0.0) * (n / (n - 1.0)) / n).cwiseSqrt();
  res.states.resize(kept.size());
  for (std::size_t o = 0; o < kept.size(); ++o) {
    res.states[o].resize(dim, static_cast<Eigen::Index>(kept[o].size()));
    for (std::size_t p = 0; p < kept[o].size(); ++p) res.states[o].col(static_cast<Eigen::Index>(p)) = kept[o][p];
  }
  return res;
}

DensityEstimate density_estimate(const Eigen::MatrixXd& samples, const grid::GridSpec& g, bool smooth) {
  const Eigen::Index n = samples.cols();
  if (n < 1000) throw ParameterError("density_estimate: at least 1000 samples required");
  DensityEstimate est;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(g.size());
  const grid::Axis& a1 = g.axis(0);
  const grid::Axis& a2 = g.axis(1);
  std::size_t inside = 0;
  for (Eigen::Index p = 0; p < n; ++p) {
    const double x1 = samples(0, p), x2 = samples(1, p);
    if (!(x1 >= a1.lo && x1 <= a1.hi && x2 >= a2.lo && x2 <= a2.hi)) {
      ++est.outside;
      continue;
    }
    const int i = std::clamp(static_cast<int>(std::lround((x1 - a1.lo) / a1.step())), 0, a1.n - 1);
    const int j = std::clamp(static_cast<int>(std::lround((x2 - a2.lo) / a2.step())), 0, a2.n - 1);
    counts[g.index(i, j)] += 1.0;
    ++inside;
  }
  est.outside_fraction = static_cast<double>(est.outside) / static_cast<double>(n);
  if (est.outside_fraction > 1e-3)
    est.warning = fmt::format("{:.3f}% of samples fell outside the grid", 100.0 * est.outside_fraction);
  if (inside == 0) throw DomainError("density_estimate: no sample inside the grid");

  grid::PdfField f{g, Eigen::VectorXd(g.size()), 0.0};
  for (int k = 0; k < g.size(); ++k) f.values[k] = counts[k] / (static_cast<double>(inside) * g.weight(k));

  if (smooth) {
    // Silverman's rule for d = 2: h = sigma n^{-1/6}
    for (int d = 0; d < 2; ++d) {
      const double m = samples.row(d).mean();
      const double var = (samples.row(d).array() - m).square().sum() / static_cast<double>(n - 1);
      est.bandwidth[d] = std::sqrt(var) * std::pow(static_cast<double>(n), -1.0 / 6.0);
    }
    for (int d = 0; d < 2; ++d) {
      const grid::Axis& ax = g.axis(d);
      const int reach = static_cast<int>(std::ceil(4.0 * est.bandwidth[d] / ax.step()));
      Eigen::VectorXd kernel(2 * reach + 1);
      for (int q = -reach; q <= reach; ++q) {
        const double u = q * ax.step() / est.bandwidth[d];
        kernel[q + reach] = std::exp(-0.5 * u * u);
      }
      Eigen::VectorXd next = Eigen::VectorXd::Zero(g.size());
      for (int k = 0; k < g.size(); ++k) {
        const int i = k % g.n1(), j = k / g.n1();
        const int pos = d == 0 ? i : j;
        double acc = 0.0, norm = 0.0;
        for (int q = -reach; q <= reach; ++q) {
          const int at = pos + q;
          if (at < 0 || at >= ax.n) continue;
          const int node = d == 0 ? g.index(at, j) : g.index(i, at);
          acc += kernel[q + reach] * ax.weight(at) * f.values[node];
          norm += kernel[q + reach] * ax.weight(at);
        }
        next[k] = acc / norm;
      }
      f.values = next;
    }
    f.values /= grid::mass(f);
    est.smoothed = true;
  }
  est.field = std::move(f);
  return est;
}

Estimate moment_estimate(const Eigen::MatrixXd& samples, const dynamics::Monomial& functional) {
  const Eigen::Index n = samples.cols();
  if (n < 2) throw ParameterError("moment_estimate: at least two samples required");
  Eigen::VectorXd g(n);
  for (Eigen::Index p = 0; p < n; ++p) {
    const Eigen::VectorXd x = samples.col(p);
    g[p] = functional(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }
  Estimate e;
  e.value = g.mean();
  const double var = (g.array() - e.value).square().sum() / static_cast<double>(n - 1);
  e.std_error = std::sqrt(var / static_cast<double>(n));
  return e;
}

}  // namespace pdfevo::montecarlo

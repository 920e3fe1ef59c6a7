#include "pdfevo/excitation.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "pdfevo/errors.hpp"

namespace pdfevo::excitation {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr double kTailTolerance = 1e-8;
constexpr double kHorizonFactor = 1e3;
constexpr double kRankTol = 1e-14;      // modes below this fraction of the top eigenvalue are dropped
constexpr double kNegativeTol = 1e-8;   // tolerated rounding in negative eigenvalues

// Integrates |C| over [lo, hi] where C keeps a constant sign.
double integrate_abs(const Kernel& kernel, double lo, double hi) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double u) { return std::abs(kernel_lag(kernel, u)); };
  return gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-12);
}

}  // namespace

double TimeProfile::operator()(double t) const {
  switch (kind) {
    case Kind::constant:
      return level;
    case Kind::logistic: {
      // level * sigmoid(rate (t - center)), written to avoid overflow
      const double z = rate * (t - center);
      return z >= 0 ? level / (1.0 + std::exp(-z)) : level * std::exp(z) / (1.0 + std::exp(z));
    }
  }
  return 0.0;
}

double kernel_lag(const Kernel& kernel, double u) {
  return std::visit(
      overloaded{
          [u](const GaussianFilterKernel& k) {
            return k.variance * std::exp(-k.shape * k.shape * u * u) * std::cos(k.peak_freq * u);
          },
          [u](const OrnsteinUhlenbeckKernel& k) {
            return k.variance * std::exp(-std::abs(u) / k.timescale);
          },
          [](const WhiteNoiseKernel&) -> double {
            throw DomainError("white-noise kernel: pointwise evaluation undefined");
          }},
      kernel);
}

double kernel_envelope(const Kernel& kernel, double u) {
  return std::visit(
      overloaded{
          [u](const GaussianFilterKernel& k) {
            return std::abs(k.variance) * std::exp(-k.shape * k.shape * u * u);
          },
          [u](const OrnsteinUhlenbeckKernel& k) {
            return std::abs(k.variance) * std::exp(-std::abs(u) / k.timescale);
          },
          [](const WhiteNoiseKernel&) -> double {
            throw DomainError("white-noise kernel: pointwise evaluation undefined");
          }},
      kernel);
}

double decay_horizon(const Kernel& kernel, double rel_tol) {
  const double log_tol = -std::log(rel_tol);
  return std::visit(
      overloaded{[&](const GaussianFilterKernel& k) {
                   return k.shape > 0 ? std::sqrt(log_tol) / k.shape
                                      : std::numeric_limits<double>::infinity();
                 },
                 [&](const OrnsteinUhlenbeckKernel& k) {
                   return k.timescale > 0 && std::isfinite(k.timescale)
                              ? k.timescale * log_tol
                              : std::numeric_limits<double>::infinity();
                 },
                 [](const WhiteNoiseKernel&) { return 0.0; }},
      kernel);
}

bool is_white(const Kernel& kernel) { return std::holds_alternative<WhiteNoiseKernel>(kernel); }

ExcitationSpec::ExcitationSpec(Kernel kernel, TimeProfile mean, std::vector<bool> component_mask,
                               std::vector<double> x0_coupling, double t0)
    : kernel_(std::move(kernel)),
      mean_(mean),
      mask_(std::move(component_mask)),
      coupling_(std::move(x0_coupling)),
      t0_(t0) {
  std::visit(overloaded{[](const GaussianFilterKernel& k) {
                          if (!(k.variance >= 0)) throw ParameterError("kernel variance must be >= 0");
                          if (!(k.shape >= 0)) throw ParameterError("kernel shape must be >= 0");
                        },
                        [](const OrnsteinUhlenbeckKernel& k) {
                          if (!(k.variance >= 0)) throw ParameterError("kernel variance must be >= 0");
                          if (!(k.timescale > 0)) throw ParameterError("OU timescale must be > 0");
                        },
                        [](const WhiteNoiseKernel&) {}},
             kernel_);
  if (mask_.empty()) throw ParameterError("component mask must be non-empty");
  if (!coupling_.empty() && coupling_.size() != mask_.size())
    throw ParameterError("x0 coupling must have one entry per state component");
}

Eigen::VectorXd ExcitationSpec::mask_vector() const {
  Eigen::VectorXd v(dim());
  for (int i = 0; i < dim(); ++i) v[i] = mask_[i] ? 1.0 : 0.0;
  return v;
}

Eigen::VectorXd ExcitationSpec::mean_vector(double t) const { return mask_vector() * mean(t); }

double ExcitationSpec::variance() const { return is_white() ? 0.0 : kernel_lag(kernel_, 0.0); }

double ExcitationSpec::covariance(double t, double s) const { return kernel_lag(kernel_, t - s); }

bool ExcitationSpec::has_cross_covariance() const {
  for (double c : coupling_)
    if (c != 0.0) return true;
  return false;
}

Eigen::VectorXd ExcitationSpec::cross_covariance(double t) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim());
  if (!has_cross_covariance() || is_white()) return c;
  const double k = covariance(t, t0_);
  for (int i = 0; i < dim(); ++i) c[i] = coupling_[i] * k;
  return c;
}

double kernel_eval(const ExcitationSpec& spec, double t, double s) {
  if (spec.is_white()) throw DomainError("white-noise kernel: pointwise evaluation undefined");
  return spec.covariance(t, s);
}

double correlation_time(const Kernel& kernel) {
  if (is_white(kernel)) return 0.0;
  const double c0 = kernel_lag(kernel, 0.0);
  if (!(c0 > 0)) throw ParameterError("correlation time needs a positive kernel variance");

  double unit = 0.0;
  double zero_spacing = std::numeric_limits<double>::infinity();
  double first_zero = std::numeric_limits<double>::infinity();
  if (const auto* gf = std::get_if<GaussianFilterKernel>(&kernel)) {
    unit = gf->shape > 0 ? 1.0 / gf->shape : std::numeric_limits<double>::infinity();
    if (gf->peak_freq > 0) {
      zero_spacing = std::numbers::pi / gf->peak_freq;
      first_zero = 0.5 * zero_spacing;
    }
  } else {
    unit = std::get<OrnsteinUhlenbeckKernel>(kernel).timescale;
  }
  if (!std::isfinite(unit))
    throw DivergenceError("correlation time: kernel does not decay (infinite scale)");
  const double horizon = kHorizonFactor * unit;

  // March outward in chunks of one decay unit; chunk edges include the sign
  // changes of C so each quadrature piece is smooth.
  double total = 0.0;
  double lo = 0.0;
  double next_zero = first_zero;
  while (true) {
    const double chunk_end = lo + unit;
    double a = lo;
    while (next_zero < chunk_end) {
      total += integrate_abs(kernel, a, next_zero);
      a = next_zero;
      next_zero += zero_spacing;
    }
    total += integrate_abs(kernel, a, chunk_end);
    lo = chunk_end;
    if (kernel_envelope(kernel, lo) < kTailTolerance * c0) break;
    if (lo > horizon)
      throw DivergenceError(fmt::format(
          "correlation time: |C(u)| above {:g} * C(0) beyond horizon {:g}", kTailTolerance, horizon));
  }
  return total / c0;
}

double correlation_time(const ExcitationSpec& spec) { return correlation_time(spec.kernel()); }

double calibrate_shape(const GaussianFilterKernel& family, double target_tau) {
  if (!(target_tau > 0)) throw ParameterError("calibrate_shape: target correlation time must be > 0");
  auto tau_of = [&](double a) {
    GaussianFilterKernel k = family;
    k.shape = a;
    return correlation_time(Kernel{k});
  };
  double lo = 1e-3, hi = 1e3;
  const double f_lo = tau_of(lo) - target_tau;
  const double f_hi = tau_of(hi) - target_tau;
  if (f_lo * f_hi > 0)
    throw CalibrationError(fmt::format(
        "calibrate_shape: target {:g} not bracketed; tau(1e-3) = {:g}, tau(1e3) = {:g}", target_tau,
        f_lo + target_tau, f_hi + target_tau));
  // tau decreases with a; bisect in log space
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double f = tau_of(mid) - target_tau;
    if (std::abs(f) <= 1e-9 * target_tau || hi / lo < 1.0 + 1e-13) return mid;
    if ((f > 0) == (f_lo > 0))
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

PathSampler::PathSampler(const ExcitationSpec& spec, std::span<const double> grid,
                         std::optional<GaussianLaw> initial_law)
    : grid_(grid.begin(), grid.end()) {
  if (spec.is_white()) throw DomainError("path sampling requires a non-white kernel");
  for (std::size_t i = 1; i < grid_.size(); ++i)
    if (!(grid_[i] > grid_[i - 1])) throw ParameterError("sample grid must be strictly increasing");

  n_initial_ = initial_law ? static_cast<int>(initial_law->mean.size()) : 0;
  if (initial_law && n_initial_ != spec.dim() && spec.has_cross_covariance())
    throw ParameterError("initial law dimension does not match excitation cross-covariance");
  const int m = static_cast<int>(grid_.size());
  const int d = n_initial_ + m;

  mean_.resize(d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  if (initial_law) {
    mean_.head(n_initial_) = initial_law->mean;
    cov.topLeftCorner(n_initial_, n_initial_) = initial_law->cov;
  }
  for (int j = 0; j < m; ++j) {
    mean_[n_initial_ + j] = spec.mean(grid_[j]);
    for (int i = j; i < m; ++i) {
      const double c = spec.covariance(grid_[i], grid_[j]);
      cov(n_initial_ + i, n_initial_ + j) = c;
      cov(n_initial_ + j, n_initial_ + i) = c;
    }
    if (n_initial_ > 0 && spec.has_cross_covariance()) {
      const Eigen::VectorXd cx = spec.cross_covariance(grid_[j]);
      cov.block(0, n_initial_ + j, n_initial_, 1) = cx;
      cov.block(n_initial_ + j, 0, 1, n_initial_) = cx.transpose();
    }
  }

  // Deterministic components (zero variance) are left out of the factorization
  std::vector<int> active;
  for (int i = 0; i < d; ++i)
    if (cov(i, i) > 0) active.push_back(i);
  factor_ = Eigen::MatrixXd::Zero(d, d);
  if (active.empty()) return;

  const int na = static_cast<int>(active.size());
  Eigen::MatrixXd sub(na, na);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) sub(i, j) = cov(active[i], active[j]);

  // Smooth kernels on fine grids are numerically low rank; keep the modes
  // that carry variance and factor as V sqrt(Lambda).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub);
  if (eig.info() != Eigen::Success) throw NotPsdError("eigen-decomposition of joint covariance failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  if (lambda.minCoeff() < -kNegativeTol * top)
    throw NotPsdError(fmt::format("joint covariance of {} variables has eigenvalue {:g} (largest {:g})", na,
                                  lambda.minCoeff(), top));
  int first = 0;
  while (first < na && lambda[first] <= kRankTol * top) ++first;
  const int rank = na - first;
  factor_ = Eigen::MatrixXd::Zero(d, rank);
  for (int k = 0; k < rank; ++k) {
    const double scale = std::sqrt(lambda[first + k]);
    for (int i = 0; i < na; ++i) factor_(active[i], k) = eig.eigenvectors()(i, first + k) * scale;
  }
}

void PathSampler::sample_block(std::uint64_t seed, std::size_t block, std::size_t n,
                               Eigen::MatrixXd& out) const {
  const Eigen::Index r = factor_.cols();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(r, static_cast<Eigen::Index>(n));
  for (Eigen::Index p = 0; p < z.cols(); ++p)
    for (Eigen::Index i = 0; i < r; ++i) z(i, p) = normal(rng);
  out.noalias() = factor_ * z;
  out.colwise() += mean_;
}

PathEnsemble sample_paths(const ExcitationSpec& spec, std::span<const double> grid,
                          std::size_t n_paths, std::uint64_t seed,
                          std::optional<GaussianLaw> initial_law) {
  const PathSampler sampler(spec, grid, initial_law);
  PathEnsemble ens;
  ens.time_grid.assign(grid.begin(), grid.end());
  ens.seed = seed;
  const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
  const int n0 = sampler.n_initial();
  ens.values.resize(static_cast<Eigen::Index>(n_paths), m);
  if (n0 > 0) ens.initial_states.resize(static_cast<Eigen::Index>(n_paths), n0);

  const std::size_t blocks = (n_paths + PathSampler::block_size - 1) / PathSampler::block_size;
  Eigen::MatrixXd buf;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t first = b * PathSampler::block_size;
    const std::size_t n = std::min(PathSampler::block_size, n_paths - first);
    sampler.sample_block(seed, b, n, buf);
    const auto rows = static_cast<Eigen::Index>(first);
    const auto cnt = static_cast<Eigen::Index>(n);
    ens.values.middleRows(rows, cnt) = buf.bottomRows(m).transpose();
    if (n0 > 0) ens.initial_states.middleRows(rows, cnt) = buf.topRows(n0).transpose();
  }
  return ens;
}

}  // namespace pdfevo::excitation

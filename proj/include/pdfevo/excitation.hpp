#pragma once

// Gaussian excitation laws: mean profile, covariance kernel, cross-covariance
// with the initial state, correlation time, and exact path sampling.

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace pdfevo::excitation {

/// Scalar function of time used for excitation means and white-noise
/// intensities. Logistic: level * e^{rate (t - center)} / (1 + e^{rate (t - center)}).
struct TimeProfile {
  enum class Kind { constant, logistic };

  Kind kind = Kind::constant;
  double level = 0.0;
  double rate = 0.0;
  double center = 0.0;

  static TimeProfile constant(double value) { return {Kind::constant, value, 0.0, 0.0}; }
  static TimeProfile logistic(double level, double rate, double center) {
    return {Kind::logistic, level, rate, center};
  }

  double operator()(double t) const;
  bool operator==(const TimeProfile&) const = default;
};

/// C(u) = variance * exp(-shape^2 u^2) * cos(peak_freq u)
struct GaussianFilterKernel {
  double variance = 1.0;
  double shape = 1.0;
  double peak_freq = 0.0;
  bool operator==(const GaussianFilterKernel&) const = default;
};

/// C(u) = variance * exp(-|u| / timescale)
struct OrnsteinUhlenbeckKernel {
  double variance = 1.0;
  double timescale = 1.0;
  bool operator==(const OrnsteinUhlenbeckKernel&) const = default;
};

/// C(t,s) = 2 D(t) delta(t - s)
struct WhiteNoiseKernel {
  TimeProfile intensity = TimeProfile::constant(0.0);
  bool operator==(const WhiteNoiseKernel&) const = default;
};

using Kernel = std::variant<GaussianFilterKernel, OrnsteinUhlenbeckKernel, WhiteNoiseKernel>;

/// Stationary covariance at lag u. Throws DomainError for white noise.
double kernel_lag(const Kernel& kernel, double u);

/// Upper envelope of |C(u)|; used for tail truncation.
double kernel_envelope(const Kernel& kernel, double u);

/// Lag beyond which the envelope falls below rel_tol * C(0).
double decay_horizon(const Kernel& kernel, double rel_tol = 1e-8);

bool is_white(const Kernel& kernel);

/// Scalar Gaussian excitation acting on the state equations selected by
/// component_mask. Immutable once built.
class ExcitationSpec {
 public:
  /// x0_coupling (empty or size N) sets cov(X0_n, Xi(t)) = x0_coupling[n] * C(t, t0).
  ExcitationSpec(Kernel kernel, TimeProfile mean, std::vector<bool> component_mask,
                 std::vector<double> x0_coupling = {}, double t0 = 0.0);

  const Kernel& kernel() const { return kernel_; }
  const TimeProfile& mean_profile() const { return mean_; }
  const std::vector<bool>& component_mask() const { return mask_; }
  const std::vector<double>& x0_coupling() const { return coupling_; }
  double t0() const { return t0_; }
  int dim() const { return static_cast<int>(mask_.size()); }

  bool is_white() const { return excitation::is_white(kernel_); }
  double mean(double t) const { return mean_(t); }
  /// Mean of the N-vector excitation (mask * m(t)).
  Eigen::VectorXd mean_vector(double t) const;
  Eigen::VectorXd mask_vector() const;
  /// C(t, t); zero for white noise.
  double variance() const;
  double covariance(double t, double s) const;
  double horizon() const { return decay_horizon(kernel_); }
  bool has_cross_covariance() const;
  /// C_{X0 Xi}(t), length N.
  Eigen::VectorXd cross_covariance(double t) const;

 private:
  Kernel kernel_;
  TimeProfile mean_;
  std::vector<bool> mask_;
  std::vector<double> coupling_;
  double t0_;
};

/// Covariance C(t, s). Throws DomainError("pointwise evaluation undefined")
/// for white noise.
double kernel_eval(const ExcitationSpec& spec, double t, double s);

/// tau_cor = C(0)^{-1} \int_0^\infty |C(u)| du
double correlation_time(const Kernel& kernel);
double correlation_time(const ExcitationSpec& spec);

/// Shape parameter a of a Gaussian-filter family (variance and peak frequency
/// taken from `family`) whose correlation time equals target_tau.
double calibrate_shape(const GaussianFilterKernel& family, double target_tau);

struct GaussianLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct PathEnsemble {
  std::vector<double> time_grid;
  Eigen::MatrixXd values;          // n_paths x n_times
  Eigen::MatrixXd initial_states;  // n_paths x N, empty without an initial law
  std::uint64_t seed = 0;
};

/// Factorized joint law of (X0, Xi(t_1), ..., Xi(t_M)). Paths are produced in
/// fixed-size blocks, each with its own RNG stream seeded from (seed, block).
class PathSampler {
 public:
  static constexpr std::size_t block_size = 256;

  PathSampler(const ExcitationSpec& spec, std::span<const double> grid,
              std::optional<GaussianLaw> initial_law = std::nullopt);

  std::size_t n_times() const { return grid_.size(); }
  int n_initial() const { return n_initial_; }
  const std::vector<double>& grid() const { return grid_; }
  /// Number of retained covariance modes (normal draws per path).
  Eigen::Index rank() const { return factor_.cols(); }

  /// Fills `out` (joint dimension x n) with the paths of block `block`.
  /// Rows [0, n_initial) hold X0, the rest the excitation samples.
  void sample_block(std::uint64_t seed, std::size_t block, std::size_t n,
                    Eigen::MatrixXd& out) const;

 private:
  std::vector<double> grid_;
  int n_initial_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd factor_;  // joint dimension x retained rank
};

PathEnsemble sample_paths(const ExcitationSpec& spec, std::span<const double> grid,
                          std::size_t n_paths, std::uint64_t seed,
                          std::optional<GaussianLaw> initial_law = std::nullopt);

}  // namespace pdfevo::excitation

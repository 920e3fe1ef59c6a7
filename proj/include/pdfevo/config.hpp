#pragma once

// Run configuration: a flat INI file with one section per block.
//
//   seed = 7
//   [system]      type = duffing|linear, zeta, omega0, tau_relax
//   [excitation]  kernel = gaussian|ou|white, variance, peak_freq,
//                 exactly one of tau_rel | tau_cor | shape (gaussian),
//                 timescale (ou), intensity (white),
//                 mean = constant|logistic, mean_level, mean_rate, mean_center,
//                 x0_coupling = c1,c2
//   [initial]     mean = m1,m2   cov = c11,c12,c21,c22
//   [grid]        x1 = lo,hi,n   x2 = lo,hi,n
//   [solver]      dt, t0, t_end, closure_tol, max_iter, extrapolation_order,
//                 upwind_peclet, renormalize, refine
//   [mc]          paths, dt, excitation_dt, moment_dt, smooth
//   [output]      times = t1,t2,...   dir
//   [bench]       moments, t_end, step, rk4_steps

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdfevo/dynamics.hpp"
#include "pdfevo/excitation.hpp"
#include "pdfevo/grid.hpp"
#include "pdfevo/montecarlo.hpp"
#include "pdfevo/solver.hpp"

namespace pdfevo::config {

struct SystemBlock {
  std::string type = "duffing";
  double zeta = 0.5;
  double omega0 = 1.0;
  std::optional<double> tau_relax;
  bool operator==(const SystemBlock&) const = default;
};

struct ExcitationBlock {
  std::string kernel = "gaussian";
  double variance = 1.0;
  double peak_freq = 0.0;
  std::optional<double> tau_rel;
  std::optional<double> tau_cor;
  std::optional<double> shape;
  double timescale = 1.0;
  double intensity = 0.0;
  std::string mean = "constant";
  double mean_level = 0.0;
  double mean_rate = 0.0;
  double mean_center = 0.0;
  std::vector<double> x0_coupling;
  bool operator==(const ExcitationBlock&) const = default;
};

struct InitialBlock {
  std::vector<double> mean{0.0, 0.0};
  std::vector<double> cov{1.0, 0.0, 0.0, 1.0};
  bool operator==(const InitialBlock&) const = default;
};

struct SolverBlock {
  std::optional<double> dt;
  double t0 = 0.0;
  double t_end = 1.0;
  double closure_tol = 1e-6;
  int max_iter = 10;
  int extrapolation_order = 2;
  double upwind_peclet = 2.0;
  bool renormalize = false;
  int refine = 4;
  bool operator==(const SolverBlock&) const = default;
};

struct McBlock {
  std::size_t paths = 100000;
  double dt = 0.005;
  double excitation_dt = 0.01;
  std::optional<double> moment_dt;
  bool smooth = false;
  bool operator==(const McBlock&) const = default;
};

struct OutputBlock {
  std::vector<double> times;
  std::string dir = "out";
  bool operator==(const OutputBlock&) const = default;
};

struct BenchBlock {
  std::string moments;
  double t_end = 3.0;
  double step = 0.05;
  int rk4_steps = 3000;
  bool operator==(const BenchBlock&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  SystemBlock system;
  ExcitationBlock excitation;
  InitialBlock initial;
  grid::Axis x1{-3.0, 3.0, 121};
  grid::Axis x2{-3.0, 3.0, 121};
  SolverBlock solver;
  McBlock mc;
  OutputBlock output;
  BenchBlock bench;

  bool operator==(const RunConfig&) const = default;

  /// Throws ConfigError naming the offending key.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string serialize() const;
  void validate() const;

  dynamics::SystemModel model() const;
  double relaxation_time() const;
  /// Builds the excitation, converting tau_rel or tau_cor to a shape parameter.
  excitation::ExcitationSpec excitation_spec() const;
  excitation::GaussianLaw initial_law() const;
  grid::GridSpec grid_spec() const;
  solver::SolverConfig solver_config(const excitation::ExcitationSpec& spec) const;
  montecarlo::McConfig mc_config() const;
};

}  // namespace pdfevo::config

#include "pdfevo/runs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "pdfevo/errors.hpp"
#include "pdfevo/grid.hpp"
#include "pdfevo/montecarlo.hpp"
#include "pdfevo/solver.hpp"

namespace pdfevo::runs {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << j.dump(2) << "\n";
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(fmt::format("cannot create '{}': {}", dir, ec.message()));
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> mat(const Eigen::Matrix2d& m) { return {m(0, 0), m(0, 1), m(1, 0), m(1, 1)}; }

void write_snapshot(const std::string& dir, const grid::PdfField& f) {
  csv_io::write_pdf((fs::path(dir) / pdf_file(f.t)).string(), f);
  csv_io::write_marginal((fs::path(dir) / marginal_file(f.t)).string(), f);
}

// Everything a solve or mc run needs, built before any artifact is written.
struct Setup {
  excitation::ExcitationSpec spec;
  dynamics::SystemModel model;
  grid::GridSpec grid;
  excitation::GaussianLaw initial;
};

Setup prepare(const config::RunConfig& cfg) {
  cfg.validate();
  return {cfg.excitation_spec(), cfg.model(), cfg.grid_spec(), cfg.initial_law()};
}

}  // namespace

std::string pdf_file(double t) { return fmt::format("pdf_t{:.4f}.csv", t); }
std::string marginal_file(double t) { return fmt::format("marginal_t{:.4f}.csv", t); }

int run_solve(const config::RunConfig& cfg, coefficients::Scheme scheme, const std::string& out_dir,
              std::ostream& log) {
  using coefficients::Scheme;
  std::optional<Setup> setup;
  grid::PdfField f0;
  solver::SolverConfig scfg;
  try {
    setup.emplace(prepare(cfg));
    if (scheme == Scheme::fpk && !setup->spec.is_white())
      throw ConfigError("excitation.kernel", "method fpk needs white noise");
    if (scheme == Scheme::linear_exact && !setup->model.linear)
      throw ConfigError("system.type", "method linear-exact needs the linear oscillator");
    try {
      f0 = grid::gaussian_field(setup->grid, setup->initial.mean, setup->initial.cov, cfg.solver.t0);
    } catch (const ParameterError& e) {
      throw ConfigError("initial.cov", "the solver needs a positive definite initial covariance");
    }
    f0.values /= grid::mass(f0);
    scfg = cfg.solver_config(setup->spec);
    scfg.validate();
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }

  const auto start = Clock::now();
  solver::EvolveResult res;
  try {
    res = solver::evolve(setup->model, setup->spec, f0, scfg, scheme);
  } catch (const NonConvergenceError& e) {
    log << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const UnsupportedError& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const Error& e) {
    log << "error: solver failed: " << e.what() << "\n";
    return kNonConvergence;
  }
  const double wall = seconds_since(start);

  try {
    make_dir(out_dir);
    std::vector<csv_io::MomentRow> rows;
    const auto functionals = montecarlo::default_functionals();
    json times = json::array();
    for (const auto& f : res.snapshots) {
      write_snapshot(out_dir, f);
      const auto m = grid::moments(f, functionals);
      rows.push_back({f.t, "mass", grid::mass(f), std::nullopt});
      for (std::size_t i = 0; i < functionals.size(); ++i) rows.push_back({f.t, functionals[i].name(), m[i], {}});
      times.push_back(f.t);
    }
    csv_io::write_moments((fs::path(out_dir) / "moments.csv").string(), rows);
    csv_io::write_diagnostics((fs::path(out_dir) / "diagnostics.csv").string(), res.steps);

    int total_iterations = 0;
    for (const auto& s : res.steps) total_iterations += s.closure_iterations;
    json summary = {
        {"command", "solve"},
        {"method", coefficients::to_string(scheme)},
        {"output_times", times},
        {"dt", scfg.dt},
        {"steps", res.steps.size()},
        {"max_mass_drift", res.max_mass_drift},
        {"max_clipped_mass", res.max_clipped_mass},
        {"max_boundary_ratio", res.max_boundary_ratio},
        {"max_closure_iterations", res.max_closure_iterations},
        {"total_closure_iterations", total_iterations},
        {"wall_time_s", wall},
        {"timestamp", timestamp()},
        {"config", cfg.serialize()},
    };
    write_json(fs::path(out_dir) / "summary.json", summary);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
  if (res.max_boundary_ratio > 1e-3)
    log << fmt::format("warning: density reaches the grid boundary (ratio {:.3g}); widen the grid\n",
                       res.max_boundary_ratio);
  log << fmt::format("solve {}: {} steps in {:.1f} s, mass drift {:.2e}\n", coefficients::to_string(scheme),
                     res.steps.size(), wall, res.max_mass_drift);
  return kOk;
}

int run_mc(const config::RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  std::optional<Setup> setup;
  montecarlo::McConfig mcfg;
  try {
    setup.emplace(prepare(cfg));
    mcfg = cfg.mc_config();
    mcfg.validate();
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }

  const auto start = Clock::now();
  montecarlo::McResult res;
  try {
    res = montecarlo::simulate(setup->model, setup->spec, setup->initial, mcfg);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
  const double wall = seconds_since(start);

  try {
    make_dir(out_dir);
    json outside = json::array();
    for (std::size_t o = 0; o < res.output_times.size(); ++o) {
      auto est = montecarlo::density_estimate(res.states[o], setup->grid, cfg.mc.smooth);
      est.field.t = res.output_times[o];
      write_snapshot(out_dir, est.field);
      outside.push_back({{"t", res.output_times[o]}, {"fraction", est.outside_fraction}});
      if (!est.warning.empty()) log << fmt::format("warning at t = {}: {}\n", res.output_times[o], est.warning);
    }
    std::vector<csv_io::MomentRow> rows;
    for (std::size_t r = 0; r < res.moment_times.size(); ++r)
      for (std::size_t i = 0; i < res.functionals.size(); ++i) {
        const auto ri = static_cast<Eigen::Index>(r), ii = static_cast<Eigen::Index>(i);
        rows.push_back({res.moment_times[r], res.functionals[i].name(), res.moment_values(ri, ii),
                        res.moment_errors(ri, ii)});
      }
    csv_io::write_moments((fs::path(out_dir) / "moments.csv").string(), rows);
    json summary = {
        {"command", "mc"},
        {"output_times", res.output_times},
        {"paths", res.n_paths},
        {"diverged", res.n_diverged},
        {"sampler_rank", res.sampler_rank},
        {"seed", cfg.seed},
        {"outside_grid", outside},
        {"wall_time_s", wall},
        {"timestamp", timestamp()},
        {"config", cfg.serialize()},
    };
    write_json(fs::path(out_dir) / "summary.json", summary);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
  log << fmt::format("mc: {} paths ({} diverged) in {:.1f} s\n", res.n_paths, res.n_diverged, wall);
  return kOk;
}

namespace {

std::set<std::string> pdf_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(fmt::format("'{}' is not a directory", dir));
  std::set<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with("pdf_t") && name.ends_with(".csv")) out.insert(name);
  }
  return out;
}

json axis_metrics(const grid::PdfField& a, const grid::PdfField& b, int d) {
  const auto& axis = a.grid.axis(d);
  const Eigen::VectorXd ma = grid::marginal(a, d), mb = grid::marginal(b, d);
  Eigen::Index ia = 0, ib = 0;
  const double pa = ma.maxCoeff(&ia), pb = mb.maxCoeff(&ib);
  return {{"axis", fmt::format("x{}", d + 1)},
          {"l1", grid::l1_distance(axis, ma, mb)},
          {"peak_a", pa},
          {"peak_b", pb},
          {"peak_ratio", pb > 0 ? pa / pb : 0.0},
          {"argmax_a", axis.node(static_cast<int>(ia))},
          {"argmax_b", axis.node(static_cast<int>(ib))}};
}

}  // namespace

int run_compare(const std::string& dir_a, const std::string& dir_b, const std::string& out_dir, std::ostream& out,
                std::ostream& log) {
  json metrics = {{"a", dir_a}, {"b", dir_b}, {"times", json::array()}};
  try {
    const auto files_a = pdf_files(dir_a), files_b = pdf_files(dir_b);
    if (files_a.empty()) throw Error(fmt::format("no pdf_t*.csv files in '{}'", dir_a));
    if (files_a != files_b) throw Error("the two runs have different output times");
    std::vector<std::pair<double, json>> rows;
    for (const auto& name : files_a) {
      const auto a = csv_io::read_pdf((fs::path(dir_a) / name).string());
      const auto b = csv_io::read_pdf((fs::path(dir_b) / name).string());
      const double joint = grid::l1_distance(a, b);  // throws on grid mismatch
      Eigen::Index ka = 0, kb = 0;
      const double pa = a.values.maxCoeff(&ka), pb = b.values.maxCoeff(&kb);
      const Eigen::Vector2d mean_a = grid::mean(a), mean_b = grid::mean(b);
      const Eigen::Matrix2d cov_a = grid::covariance(a), cov_b = grid::covariance(b);
      rows.emplace_back(a.t, json{
          {"t", a.t},
          {"joint_l1", joint},
          {"marginals", {axis_metrics(a, b, 0), axis_metrics(a, b, 1)}},
          {"joint_peak_a", pa},
          {"joint_peak_b", pb},
          {"joint_argmax_a", vec(a.grid.point(static_cast<int>(ka)))},
          {"joint_argmax_b", vec(b.grid.point(static_cast<int>(kb)))},
          {"mean_a", vec(mean_a)},
          {"mean_b", vec(mean_b)},
          {"mean_diff", vec(mean_a - mean_b)},
          {"cov_a", mat(cov_a)},
          {"cov_b", mat(cov_b)},
          {"cov_diff", mat(cov_a - cov_b)},
      });
    }
    std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (auto& [t, row] : rows) metrics["times"].push_back(std::move(row));
    if (!out_dir.empty()) {
      make_dir(out_dir);
      write_json(fs::path(out_dir) / "compare.json", metrics);
    }
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
  out << metrics.dump(2) << "\n";
  return kOk;
}

BenchResult propagator_bench(const propagator::MatrixTrajectory& r, double t_end, double step, int rk4_steps) {
  using namespace propagator;
  const double s = r.front();
  const long n_points = std::lround((t_end - s) / step);
  if (n_points < 1) throw ParameterError("propagator bench: step exceeds the interval");
  const MatrixTrajectory constant = MatrixTrajectory::constant(r.matrices().front(), s, t_end);
  const Eigen::MatrixXd r0 = r.matrices().front();

  BenchResult out;
  auto add = [](std::vector<csv_io::BenchRow>& rows, double t, const std::string& method, int order,
                const Eigen::MatrixXd& phi, const Eigen::MatrixXd& ref) {
    rows.push_back({t, method, order, phi(0, 1), phi(1, 1), (phi.col(1) - ref.col(1)).norm()});
  };
  for (long k = 1; k <= n_points; ++k) {
    const double t = std::min(t_end, s + static_cast<double>(k) * step);
    const Eigen::MatrixXd ref = rk4_transition(r, t, s, rk4_steps).value;
    add(out.rows, t, "rk4", 4, ref, ref);
    for (int n = 1; n <= 4; ++n) add(out.rows, t, "peano", n, peano_baker(r, t, s, n).value, ref);
    for (int n = 1; n <= 3; ++n) add(out.rows, t, "magnus", n, magnus(r, t, s, n).value, ref);

    const Eigen::MatrixXd exact = matrix_exp(Eigen::MatrixXd(r0 * (t - s)));
    add(out.constant_rows, t, "rk4", 4, rk4_transition(constant, t, s, rk4_steps).value, exact);
    for (int n = 1; n <= 4; ++n) add(out.constant_rows, t, "peano", n, peano_baker(constant, t, s, n).value, exact);
    for (int n = 1; n <= 3; ++n) add(out.constant_rows, t, "magnus", n, magnus(constant, t, s, n).value, exact);
  }
  return out;
}

propagator::MatrixTrajectory mean_jacobian_history(const config::RunConfig& cfg, const std::string& moments_path,
                                                    double t_end) {
  const auto model = cfg.model();
  const double t0 = cfg.solver.t0;
  if (model.moment_basis.empty()) {
    const std::vector<double> none;
    return propagator::MatrixTrajectory::constant(dynamics::mean_jacobian(model, none, t0), t0, t_end);
  }
  const auto rows = csv_io::read_moments(moments_path);
  std::map<double, std::map<std::string, double>> by_time;
  for (const auto& row : rows) by_time[row.t][row.name] = row.value;

  std::vector<double> times;
  std::vector<Eigen::MatrixXd> mats;
  for (const auto& [t, values] : by_time) {
    if (t < t0 - 1e-9 || t > t_end + 1e-9) continue;
    std::vector<double> m;
    for (const auto& f : model.moment_basis) {
      const auto it = values.find(f.name());
      if (it == values.end()) throw Error(fmt::format("{}: no {} at t = {}", moments_path, f.name(), t));
      m.push_back(it->second);
    }
    times.push_back(t);
    mats.push_back(dynamics::mean_jacobian(model, m, t));
  }
  if (times.size() < 2 || times.front() > t0 + 1e-9 || times.back() < t_end - 1e-9)
    throw Error(fmt::format("{}: moment history does not cover [{}, {}]", moments_path, t0, t_end));
  return propagator::MatrixTrajectory(std::move(times), std::move(mats));
}

int run_propagator_bench(const config::RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  BenchResult res;
  const auto start = Clock::now();
  try {
    cfg.validate();
    if (cfg.bench.moments.empty() && !cfg.model().moment_basis.empty())
      throw ConfigError("bench.moments", "path to the moments.csv of a prior mc run is required");
    const auto r = mean_jacobian_history(cfg, cfg.bench.moments, cfg.solver.t0 + cfg.bench.t_end);
    res = propagator_bench(r, cfg.solver.t0 + cfg.bench.t_end, cfg.bench.step, cfg.bench.rk4_steps);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
  const double wall = seconds_since(start);

  auto max_errors = [](const std::vector<csv_io::BenchRow>& rows) {
    std::map<std::string, double> worst;
    for (const auto& row : rows) {
      auto& w = worst[fmt::format("{}({})", row.method, row.order)];
      w = std::max(w, row.frob_err);
    }
    return worst;
  };
  try {
    make_dir(out_dir);
    csv_io::write_bench((fs::path(out_dir) / "bench.csv").string(), res.rows);
    csv_io::write_bench((fs::path(out_dir) / "bench_constant.csv").string(), res.constant_rows);
    json summary = {{"command", "propagator-bench"},
                    {"max_error", max_errors(res.rows)},
                    {"max_error_constant", max_errors(res.constant_rows)},
                    {"wall_time_s", wall},
                    {"timestamp", timestamp()},
                    {"config", cfg.serialize()}};
    write_json(fs::path(out_dir) / "summary.json", summary);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
  for (const auto& [name, err] : max_errors(res.rows)) log << fmt::format("{:<10} max error {:.3e}\n", name, err);
  return kOk;
}

}  // namespace pdfevo::runs

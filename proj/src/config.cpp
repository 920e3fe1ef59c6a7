#include "pdfevo/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "pdfevo/errors.hpp"

namespace pdfevo::config {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>> kKeys = {
    {"system", {"type", "zeta", "omega0", "tau_relax"}},
    {"excitation",
     {"kernel", "variance", "peak_freq", "tau_rel", "tau_cor", "shape", "timescale", "intensity", "mean",
      "mean_level", "mean_rate", "mean_center", "x0_coupling"}},
    {"initial", {"mean", "cov"}},
    {"grid", {"x1", "x2"}},
    {"solver",
     {"dt", "t0", "t_end", "closure_tol", "max_iter", "extrapolation_order", "upwind_peclet", "renormalize",
      "refine"}},
    {"mc", {"paths", "dt", "excitation_dt", "moment_dt", "smooth"}},
    {"output", {"times", "dir"}},
    {"bench", {"moments", "t_end", "step", "rk4_steps"}},
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw ConfigError(key, fmt::format("expected a number, got '{}'", s));
  return v;
}

long long to_integer(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw ConfigError(key, fmt::format("expected an integer, got '{}'", s));
  return v;
}

bool to_bool(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key, fmt::format("expected true or false, got '{}'", s));
}

std::vector<double> to_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item, key));
  return out;
}

grid::Axis to_axis(const std::string& text, const std::string& key) {
  const auto v = to_list(text, key);
  if (v.size() != 3) throw ConfigError(key, "expected lo,hi,n");
  if (v[2] != std::floor(v[2])) throw ConfigError(key, "node count must be an integer");
  return {v[0], v[1], static_cast<int>(v[2])};
}

std::string num(double v) { return fmt::format("{}", v); }

std::string list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + num(v[i]);
  return out;
}

class Reader {
 public:
  Reader(const pt::ptree& tree, const std::string& section) : section_(section) {
    if (const auto child = tree.get_child_optional(section)) node_ = &*child;
  }

  std::optional<std::string> raw(const std::string& key) const {
    if (!node_) return std::nullopt;
    if (const auto v = node_->get_optional<std::string>(key)) return trim(*v);
    return std::nullopt;
  }
  std::string name(const std::string& key) const { return section_ + "." + key; }

  void read(const std::string& key, double& out) const {
    if (auto v = raw(key)) out = to_double(*v, name(key));
  }
  void read(const std::string& key, std::optional<double>& out) const {
    if (auto v = raw(key)) out = to_double(*v, name(key));
  }
  void read(const std::string& key, int& out) const {
    if (auto v = raw(key)) out = static_cast<int>(to_integer(*v, name(key)));
  }
  void read(const std::string& key, std::size_t& out) const {
    if (auto v = raw(key)) {
      const long long n = to_integer(*v, name(key));
      if (n < 0) throw ConfigError(name(key), "must be >= 0");
      out = static_cast<std::size_t>(n);
    }
  }
  void read(const std::string& key, bool& out) const {
    if (auto v = raw(key)) out = to_bool(*v, name(key));
  }
  void read(const std::string& key, std::string& out) const {
    if (auto v = raw(key)) out = *v;
  }
  void read(const std::string& key, std::vector<double>& out) const {
    if (auto v = raw(key)) out = to_list(*v, name(key));
  }
  void read(const std::string& key, grid::Axis& out) const {
    if (auto v = raw(key)) out = to_axis(*v, name(key));
  }

 private:
  std::string section_;
  const pt::ptree* node_ = nullptr;
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("(file)", fmt::format("line {}: {}", e.line(), e.message()));
  }

  RunConfig c;
  for (const auto& [name, child] : tree) {
    if (child.empty()) {
      if (name != "seed") throw ConfigError(name, "unknown top-level key");
      const long long seed = to_integer(child.data(), "seed");
      if (seed < 0) throw ConfigError("seed", "must be >= 0");
      c.seed = static_cast<std::uint64_t>(seed);
      continue;
    }
    const auto known = kKeys.find(name);
    if (known == kKeys.end()) throw ConfigError(name, "unknown section");
    for (const auto& [key, value] : child)
      if (!known->second.contains(key)) throw ConfigError(name + "." + key, "unknown key");
  }

  const Reader sys(tree, "system");
  sys.read("type", c.system.type);
  sys.read("zeta", c.system.zeta);
  sys.read("omega0", c.system.omega0);
  sys.read("tau_relax", c.system.tau_relax);

  const Reader ex(tree, "excitation");
  auto& e = c.excitation;
  ex.read("kernel", e.kernel);
  ex.read("variance", e.variance);
  ex.read("peak_freq", e.peak_freq);
  ex.read("tau_rel", e.tau_rel);
  ex.read("tau_cor", e.tau_cor);
  ex.read("shape", e.shape);
  ex.read("timescale", e.timescale);
  ex.read("intensity", e.intensity);
  ex.read("mean", e.mean);
  ex.read("mean_level", e.mean_level);
  ex.read("mean_rate", e.mean_rate);
  ex.read("mean_center", e.mean_center);
  ex.read("x0_coupling", e.x0_coupling);

  const Reader ini(tree, "initial");
  ini.read("mean", c.initial.mean);
  ini.read("cov", c.initial.cov);

  const Reader gr(tree, "grid");
  gr.read("x1", c.x1);
  gr.read("x2", c.x2);

  const Reader so(tree, "solver");
  so.read("dt", c.solver.dt);
  so.read("t0", c.solver.t0);
  so.read("t_end", c.solver.t_end);
  so.read("closure_tol", c.solver.closure_tol);
  so.read("max_iter", c.solver.max_iter);
  so.read("extrapolation_order", c.solver.extrapolation_order);
  so.read("upwind_peclet", c.solver.upwind_peclet);
  so.read("renormalize", c.solver.renormalize);
  so.read("refine", c.solver.refine);

  const Reader mc(tree, "mc");
  mc.read("paths", c.mc.paths);
  mc.read("dt", c.mc.dt);
  mc.read("excitation_dt", c.mc.excitation_dt);
  mc.read("moment_dt", c.mc.moment_dt);
  mc.read("smooth", c.mc.smooth);

  const Reader out(tree, "output");
  out.read("times", c.output.times);
  out.read("dir", c.output.dir);

  const Reader be(tree, "bench");
  be.read("moments", c.bench.moments);
  be.read("t_end", c.bench.t_end);
  be.read("step", c.bench.step);
  be.read("rk4_steps", c.bench.rk4_steps);

  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", fmt::format("cannot open '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::serialize() const {
  std::string s = fmt::format("seed = {}\n", seed);
  s += "\n[system]\n";
  s += fmt::format("type = {}\nzeta = {}\nomega0 = {}\n", system.type, num(system.zeta), num(system.omega0));
  if (system.tau_relax) s += fmt::format("tau_relax = {}\n", num(*system.tau_relax));

  const auto& e = excitation;
  s += "\n[excitation]\n";
  s += fmt::format("kernel = {}\nvariance = {}\npeak_freq = {}\n", e.kernel, num(e.variance), num(e.peak_freq));
  if (e.tau_rel) s += fmt::format("tau_rel = {}\n", num(*e.tau_rel));
  if (e.tau_cor) s += fmt::format("tau_cor = {}\n", num(*e.tau_cor));
  if (e.shape) s += fmt::format("shape = {}\n", num(*e.shape));
  s += fmt::format("timescale = {}\nintensity = {}\n", num(e.timescale), num(e.intensity));
  s += fmt::format("mean = {}\nmean_level = {}\nmean_rate = {}\nmean_center = {}\n", e.mean, num(e.mean_level),
                   num(e.mean_rate), num(e.mean_center));
  if (!e.x0_coupling.empty()) s += fmt::format("x0_coupling = {}\n", list(e.x0_coupling));

  s += fmt::format("\n[initial]\nmean = {}\ncov = {}\n", list(initial.mean), list(initial.cov));
  s += fmt::format("\n[grid]\nx1 = {},{},{}\nx2 = {},{},{}\n", num(x1.lo), num(x1.hi), x1.n, num(x2.lo), num(x2.hi),
                   x2.n);

  s += "\n[solver]\n";
  if (solver.dt) s += fmt::format("dt = {}\n", num(*solver.dt));
  s += fmt::format("t0 = {}\nt_end = {}\nclosure_tol = {}\nmax_iter = {}\nextrapolation_order = {}\n", num(solver.t0),
                   num(solver.t_end), num(solver.closure_tol), solver.max_iter, solver.extrapolation_order);
  s += fmt::format("upwind_peclet = {}\nrenormalize = {}\nrefine = {}\n", num(solver.upwind_peclet),
                   solver.renormalize ? "true" : "false", solver.refine);

  s += fmt::format("\n[mc]\npaths = {}\ndt = {}\nexcitation_dt = {}\n", mc.paths, num(mc.dt), num(mc.excitation_dt));
  if (mc.moment_dt) s += fmt::format("moment_dt = {}\n", num(*mc.moment_dt));
  s += fmt::format("smooth = {}\n", mc.smooth ? "true" : "false");

  s += "\n[output]\n";
  if (!output.times.empty()) s += fmt::format("times = {}\n", list(output.times));
  s += fmt::format("dir = {}\n", output.dir);

  s += "\n[bench]\n";
  if (!bench.moments.empty()) s += fmt::format("moments = {}\n", bench.moments);
  s += fmt::format("t_end = {}\nstep = {}\nrk4_steps = {}\n", num(bench.t_end), num(bench.step), bench.rk4_steps);
  return s;
}

void RunConfig::validate() const {
  require(system.type == "duffing" || system.type == "linear", "system.type", "must be duffing or linear");
  require(system.zeta > 0, "system.zeta", "must be > 0");
  require(system.omega0 > 0, "system.omega0", "must be > 0");
  if (system.type == "linear") require(system.zeta < 1, "system.zeta", "linear oscillator must be underdamped");
  if (system.tau_relax) require(*system.tau_relax > 0, "system.tau_relax", "must be > 0");

  const auto& e = excitation;
  if (e.kernel == "gaussian") {
    require(e.variance > 0, "excitation.variance", "must be > 0");
    require(e.peak_freq >= 0, "excitation.peak_freq", "must be >= 0");
    const int set = (e.tau_rel ? 1 : 0) + (e.tau_cor ? 1 : 0) + (e.shape ? 1 : 0);
    require(set == 1, "excitation.tau_rel", "give exactly one of tau_rel, tau_cor, shape");
    if (e.tau_rel) require(*e.tau_rel > 0, "excitation.tau_rel", "must be > 0");
    if (e.tau_cor) require(*e.tau_cor > 0, "excitation.tau_cor", "must be > 0");
    if (e.shape) require(*e.shape > 0, "excitation.shape", "must be > 0");
  } else if (e.kernel == "ou") {
    require(e.variance > 0, "excitation.variance", "must be > 0");
    require(e.timescale > 0, "excitation.timescale", "must be > 0");
  } else if (e.kernel == "white") {
    require(e.intensity >= 0, "excitation.intensity", "must be >= 0");
  } else {
    throw ConfigError("excitation.kernel", "must be gaussian, ou or white");
  }
  require(e.mean == "constant" || e.mean == "logistic", "excitation.mean", "must be constant or logistic");
  if (e.mean == "logistic") require(e.mean_rate >= 0, "excitation.mean_rate", "must be >= 0");
  require(e.x0_coupling.empty() || e.x0_coupling.size() == 2, "excitation.x0_coupling", "expected two values");

  require(initial.mean.size() == 2, "initial.mean", "expected two values");
  require(initial.cov.size() == 4, "initial.cov", "expected four values c11,c12,c21,c22");
  require(initial.cov[1] == initial.cov[2], "initial.cov", "must be symmetric");
  require(initial.cov[0] >= 0 && initial.cov[3] >= 0 &&
              initial.cov[0] * initial.cov[3] - initial.cov[1] * initial.cov[2] >= 0,
          "initial.cov", "must be positive semidefinite");

  for (const auto& [key, a] : {std::pair{"grid.x1", x1}, std::pair{"grid.x2", x2}}) {
    require(a.lo < a.hi, key, "need lo < hi");
    require(a.n >= grid::GridSpec::min_nodes, key, fmt::format("need at least {} nodes", grid::GridSpec::min_nodes));
  }

  if (solver.dt) require(*solver.dt > 0, "solver.dt", "must be > 0");
  require(solver.t_end > solver.t0, "solver.t_end", "must exceed solver.t0");
  require(solver.closure_tol > 0, "solver.closure_tol", "must be > 0");
  require(solver.max_iter >= 1, "solver.max_iter", "must be >= 1");
  require(solver.extrapolation_order >= 0 && solver.extrapolation_order <= 2, "solver.extrapolation_order",
          "must be 0, 1 or 2");
  require(solver.refine >= 1, "solver.refine", "must be >= 1");

  require(mc.paths >= 1000, "mc.paths", "must be >= 1000");
  require(mc.dt > 0, "mc.dt", "must be > 0");
  require(mc.excitation_dt > 0, "mc.excitation_dt", "must be > 0");
  if (mc.moment_dt) require(*mc.moment_dt > 0, "mc.moment_dt", "must be > 0");
  if (solver.dt) require(mc.dt <= 0.5 * *solver.dt * (1 + 1e-12), "mc.dt", "must not exceed half of solver.dt");

  for (double t : output.times)
    require(t >= solver.t0 && t <= solver.t_end, "output.times", "must lie in [solver.t0, solver.t_end]");
  require(!output.dir.empty(), "output.dir", "must not be empty");

  require(bench.t_end > 0, "bench.t_end", "must be > 0");
  require(bench.step > 0, "bench.step", "must be > 0");
  require(bench.rk4_steps >= 1, "bench.rk4_steps", "must be >= 1");
}

dynamics::SystemModel RunConfig::model() const {
  if (system.type == "linear") return dynamics::linear_oscillator_model(system.zeta, system.omega0);
  return dynamics::duffing_model(system.zeta);
}

double RunConfig::relaxation_time() const {
  return system.tau_relax ? *system.tau_relax : dynamics::relaxation_time(model());
}

excitation::ExcitationSpec RunConfig::excitation_spec() const {
  const auto& e = excitation;
  excitation::Kernel kernel;
  if (e.kernel == "gaussian") {
    excitation::GaussianFilterKernel k{e.variance, 1.0, e.peak_freq};
    try {
      if (e.shape)
        k.shape = *e.shape;
      else if (e.tau_cor)
        k.shape = excitation::calibrate_shape(k, *e.tau_cor);
      else
        k.shape = excitation::calibrate_shape(k, *e.tau_rel * relaxation_time());
    } catch (const CalibrationError& err) {
      throw ConfigError(e.tau_cor ? "excitation.tau_cor" : "excitation.tau_rel", err.what());
    }
    kernel = k;
  } else if (e.kernel == "ou") {
    kernel = excitation::OrnsteinUhlenbeckKernel{e.variance, e.timescale};
  } else {
    kernel = excitation::WhiteNoiseKernel{excitation::TimeProfile::constant(e.intensity)};
  }
  const auto mean = e.mean == "logistic" ? excitation::TimeProfile::logistic(e.mean_level, e.mean_rate, e.mean_center)
                                         : excitation::TimeProfile::constant(e.mean_level);
  return excitation::ExcitationSpec(kernel, mean, {false, true}, e.x0_coupling, solver.t0);
}

excitation::GaussianLaw RunConfig::initial_law() const {
  excitation::GaussianLaw law;
  law.mean = Eigen::Vector2d(initial.mean[0], initial.mean[1]);
  Eigen::Matrix2d cov;
  cov << initial.cov[0], initial.cov[1], initial.cov[2], initial.cov[3];
  law.cov = cov;
  return law;
}

grid::GridSpec RunConfig::grid_spec() const { return grid::GridSpec(x1, x2); }

solver::SolverConfig RunConfig::solver_config(const excitation::ExcitationSpec& spec) const {
  solver::SolverConfig s;
  s.dt = solver.dt ? *solver.dt : solver::default_time_step(spec);
  s.t_end = solver.t_end;
  s.output_times = output.times;
  s.closure_tol = solver.closure_tol;
  s.max_closure_iterations = solver.max_iter;
  s.extrapolation_order = solver.extrapolation_order;
  s.upwind_peclet = solver.upwind_peclet;
  s.renormalize = solver.renormalize;
  s.refine = solver.refine;
  return s;
}

montecarlo::McConfig RunConfig::mc_config() const {
  montecarlo::McConfig m;
  m.n_paths = mc.paths;
  m.dt = mc.dt;
  m.excitation_dt = mc.excitation_dt;
  m.seed = seed;
  m.output_times = output.times.empty() ? std::vector<double>{solver.t_end} : output.times;
  if (mc.moment_dt) {
    const long n = std::lround((solver.t_end - solver.t0) / *mc.moment_dt);
    for (long k = 0; k <= n; ++k) {
      const double t = solver.t0 + static_cast<double>(k) * *mc.moment_dt;
      if (t <= solver.t_end + 1e-12) m.moment_times.push_back(std::min(t, solver.t_end));
    }
  }
  return m;
}

}  // namespace pdfevo::config

// pdfevo: response-density experiments from a configuration file.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pdfevo/config.hpp"
#include "pdfevo/errors.hpp"
#include "pdfevo/runs.hpp"

namespace {

using pdfevo::config::RunConfig;

std::optional<RunConfig> load(const std::string& path, const std::optional<std::uint64_t>& seed,
                              const std::string& out) {
  try {
    RunConfig cfg = RunConfig::load(path);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.output.dir = out;
    return cfg;
  } catch (const pdfevo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return std::nullopt;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Response-density evolution for randomly excited oscillators"};
  app.require_subcommand(1);

  std::string config_path, out_dir, method;
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run configuration (INI)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
    cmd->add_option("--seed", seed, "RNG seed (overrides the config)");
  };

  auto* solve = app.add_subcommand("solve", "Evolve the density with a pdf-evolution equation");
  add_common(solve);
  solve->add_option("--method", method, "fpk, sct, ngfpk or linear-exact")
      ->required()
      ->check(CLI::IsMember({"fpk", "sct", "ngfpk", "linear-exact", "linear_exact"}));

  auto* mc = app.add_subcommand("mc", "Monte Carlo reference run");
  add_common(mc);

  auto* bench = app.add_subcommand("propagator-bench", "Transition-matrix approximations against RK4");
  add_common(bench);

  std::string dir_a, dir_b, compare_out;
  auto* compare = app.add_subcommand("compare", "Compare the densities of two runs");
  compare->add_option("a", dir_a, "First run directory")->required();
  compare->add_option("b", dir_b, "Second run directory")->required();
  compare->add_option("--out", compare_out, "Also write compare.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pdfevo::runs::kInputError;
  }

  if (*compare) return pdfevo::runs::run_compare(dir_a, dir_b, compare_out, std::cout, std::cerr);

  const auto cfg = load(config_path, seed, out_dir);
  if (!cfg) return pdfevo::runs::kInputError;
  const std::string dir = cfg->output.dir;
  if (*solve) return pdfevo::runs::run_solve(*cfg, pdfevo::coefficients::scheme_from_string(method), dir, std::cerr);
  if (*mc) return pdfevo::runs::run_mc(*cfg, dir, std::cerr);
  return pdfevo::runs::run_propagator_bench(*cfg, dir, std::cerr);
}

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "nocp/study.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  int jobs = 1;
  bool no_plot = false;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("config", opts.config, "JSON config file")->required();
  sub->add_option("--out", opts.out, "output directory (overrides config)");
  sub->add_option("--jobs", opts.jobs, "worker threads for study levels")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--no-plot", opts.no_plot, "skip the SVG plot");
}

int load_and_run(const CommonOpts& opts,
                 int (*runner)(const nocp::StudyConfig&)) {
  nocp::StudyConfig cfg;
  try {
    cfg = nocp::load_config(opts.config);
  } catch (const nocp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  if (!opts.out.empty()) cfg.out = opts.out;
  cfg.jobs = opts.jobs;
  cfg.plot = !opts.no_plot;
  if (const char* env = std::getenv("NEUMANN_OCP_SEED")) {
    try {
      cfg.seed = static_cast<unsigned>(std::stoul(env));
    } catch (const std::exception&) {
      std::cerr << "config error: invalid NEUMANN_OCP_SEED\n";
      return 1;
    }
  }
  return runner(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Neumann boundary control solver: P1 finite elements, variational "
      "discretization and multiscale (LOD) state spaces"};
  app.require_subcommand(1);

  CommonOpts solve_opts, study_opts, audit_opts;
  CLI::App* solve =
      app.add_subcommand("solve", "solve one configuration, write solve.csv");
  add_common(solve, solve_opts);
  CLI::App* study = app.add_subcommand(
      "study", "convergence study over levels, write study.csv/study.svg");
  add_common(study, study_opts);
  CLI::App* audit = app.add_subcommand(
      "audit-kkt", "solve and audit the KKT system, write audit.csv");
  add_common(audit, audit_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (solve->parsed()) return load_and_run(solve_opts, nocp::run_solve);
  if (study->parsed()) return load_and_run(study_opts, nocp::run_study);
  return load_and_run(audit_opts, nocp::run_audit);
}

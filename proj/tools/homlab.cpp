// homlab command line: run / plot / replay experiments.
#include <iostream>

#include "CLI11.hpp"
#include "homlab/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lattice cell-problem experiments for random surface tensions"};
  app.set_version_flag("--version", std::string(HOMLAB_VERSION));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  int workers = 0;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config, "Experiment config (JSON, schema 1)")->required();
  run->add_option("--workers,-j", workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  run->add_option("--out,-o", out, "Output directory (overrides the config)");
  bool quiet = false;
  run->add_flag("--quiet,-q", quiet, "Only print errors");

  std::string dir;
  auto* plot = app.add_subcommand("plot", "Render SVG figures from a results directory");
  plot->add_option("dir", dir, "Results directory")->required();

  std::string manifest;
  int replay_workers = 0;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare results");
  replay->add_option("manifest", manifest, "manifest.json of a previous run")->required();
  replay->add_option("--workers,-j", replay_workers, "Worker threads (0: as recorded)")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : homlab::kExitSchema;
  }

  if (*run) {
    homlab::RunOptions opts;
    opts.workers = workers;
    opts.quiet = quiet;
    if (!out.empty()) opts.out = out;
    return homlab::run_experiment(config, opts, quiet ? std::cerr : std::cout);
  }
  if (*plot) return homlab::plot_results(dir, std::cout);
  return homlab::replay_manifest(manifest, replay_workers, std::cout);
}

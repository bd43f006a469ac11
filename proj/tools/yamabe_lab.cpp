// Command line front door: `yamabe_lab run <config>` executes a single
// experiment config, `yamabe_lab suite <manifest>` runs a manifest of
// configs. Output directory precedence: --out, then YAMABE_LAB_OUT, then the
// current directory.

#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "yamabe/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for constant scalar curvature metrics"};
  app.require_subcommand(1);

  yamabe::RunOptions opt;
  if (const char* env = std::getenv("YAMABE_LAB_OUT")) opt.out_dir = env;
  app.add_option("--out", opt.out_dir, "output directory for reports");
  app.add_option("--threads", opt.threads, "worker threads for suite mode")
      ->check(CLI::PositiveNumber);
  app.add_flag("--check", opt.check, "enforce tolerances (exit 4 on failure)");

  std::string config_path, manifest_path;
  CLI::App* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("config", config_path, "JSON experiment config")->required();
  CLI::App* suite = app.add_subcommand("suite", "run a manifest of configs");
  suite->add_option("manifest", manifest_path, "JSON manifest")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return yamabe::run_experiment(config_path, opt);
  return yamabe::run_suite(manifest_path, opt);
}

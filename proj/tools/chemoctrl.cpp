// Command-line front end: one subcommand per experiment type.
#include <CLI11.hpp>

#include <iostream>
#include <utility>

#include "chemoctrl/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bilinear optimal control of a degenerate chemotaxis model"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 1;
  bool quiet = false;

  const std::pair<const char*, const char*> commands[] = {
      {"forward", "run the state equations and check bounds and mass"},
      {"adjoint", "forward run, dual states and the reduced gradient"},
      {"optimize", "projected gradient descent on the tracking cost"},
      {"gradcheck", "compare the adjoint gradient with finite differences"},
      {"sweep", "randomised maximum-principle and conservation sweep"},
      {"eoc", "temporal convergence order under step refinement"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides [output] dir)");
    sub->add_option("--seed", seed, "seed for randomized parts (overrides [run] seed)");
    sub->add_option("--workers", workers, "worker threads (overrides [run] workers)")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", quiet, "do not print progress and the report");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : chemoctrl::kExitConfig;
  }

  const CLI::App* sub = app.get_subcommands().front();
  chemoctrl::CommandOptions opts;
  if (sub->count("--out")) opts.out = out;
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--workers")) opts.workers = workers;
  if (!quiet) opts.log = &std::cout;
  return chemoctrl::run_command(sub->get_name(), config, opts);
}

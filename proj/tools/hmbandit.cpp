#include <CLI11.hpp>

#include "hmbandit/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hidden Markov restless bandit: value iteration, thresholds, Whittle index, simulation"};
  hmb::CliOptions opts;
  app.add_option("command", opts.command, "validate | solve | threshold | whittle | indexability | simulate | oracle-check")
      ->required()
      ->check(CLI::IsMember(hmb::cli_commands()));
  app.add_option("--config", opts.config, "JSON run configuration")->required();
  app.add_option("--out", opts.out, "output directory")->capture_default_str();
  app.add_option("--seed", opts.seed, "RNG seed (overrides the config)");
  app.add_option("--grid", opts.grid, "belief grid size (overrides the config)");
  app.add_option("--tol", opts.tol, "value iteration tolerance (overrides the config)");
  app.add_option("--arm", opts.arm, "arm used by single-arm commands")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hmb::kExitConfig;
  }
  return hmb::dispatch(opts);
}

#include <iostream>

#include <CLI11.hpp>

#include "boltzalbedo/orchestrator.hpp"

int main(int argc, char** argv) {
  using namespace boltzalbedo;
  CLI::App app{"Albedo-operator forward solves and kernel reconstruction"};
  app.require_subcommand(1);

  std::string config, out_dir, label;
  std::uint64_t seed = 0;
  int threads = 0;
  for (const char* name : {"forward", "albedo", "reconstruct", "roundtrip"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "Experiment config (JSON)")->required();
    sub->add_option("--out-dir", out_dir, "Output root; results go to <out-dir>/<label>")->required();
    sub->add_option("--seed", seed, "Noise seed (overrides config)");
    sub->add_option("--label", label, "Run label (overrides config)");
    sub->add_option("--threads", threads, "Worker threads (overrides config)")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code::config;
  }

  const CLI::App* sub = app.get_subcommands().front();
  RunOptions opt;
  opt.out_dir = out_dir;
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--label")) opt.label = label;
  if (sub->count("--threads")) opt.threads = threads;
  return run_cli(*parse_command(sub->get_name()), config, opt, std::cerr);
}

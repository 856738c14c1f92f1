// Command-line front end: cmfg run <config.json> --out <dir>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cmfg/cli_io.hpp"

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("cmfg");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  spdlog::cfg::load_env_levels();

  CLI::App app{"Cournot mean field game solver"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run a scenario");
  std::string config, out;
  std::uint64_t seed = 0;
  bool validate_only = false, plots = false;
  run->add_option("config", config, "scenario JSON")->required();
  run->add_option("--out", out, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override RNG seed");
  run->add_flag("--validate-only", validate_only, "check config and assumptions only");
  run->add_flag("--emit-plotscript", plots, "write a gnuplot script");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  cmfg::RunOptions ro;
  if (seed_opt->count() > 0) ro.seed = seed;
  ro.validate_only = validate_only;
  ro.emit_plotscript = plots;
  return cmfg::run(config, out, ro);
}

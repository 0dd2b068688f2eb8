#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "shrinkcoup/cli.hpp"

namespace sc = shrinkcoup::cli;

int main(int argc, char** argv) {
  CLI::App app{"Coupled Gibbs samplers for Half-t shrinkage regression"};
  app.set_version_flag("--version", sc::kVersion);
  app.require_subcommand(1, 1);

  std::string config_path, out = "-";
  std::vector<std::string> sets;
  std::uint64_t seed = 1;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  for (const char* name : {"sample", "couple", "tvbound", "mse", "trace-metrics", "synthetic"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI-style config file");
    sub->add_option("--set", sets, "Override a setting, e.g. prior.nu=2")->take_all();
    sub->add_option("--out", out, "Output CSV path ('-' for stdout); dataset path for synthetic");
    sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Master seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : sc::kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  std::string tmp;
  try {
    sc::ExperimentConfig cfg = sc::resolve_config(command, config_path, sets, seed, workers);
    cfg.out = out;
    const std::string target = command == "synthetic" ? out + ".beta_star.csv" : out;
    if (target == "-") return sc::run_command(cfg, std::cout);
    // Write to a side file first so a failed run leaves no partial CSV behind.
    tmp = target + ".partial";
    int rc;
    {
      std::ofstream f(tmp);
      if (!f) throw sc::ConfigError("cannot write '" + tmp + "'");
      rc = sc::run_command(cfg, f);
    }
    std::rename(tmp.c_str(), target.c_str());
    if (rc == sc::kAllCensored) std::cerr << "shrinkcoup: every replicate was censored\n";
    return rc;
  } catch (const std::exception& e) {
    if (!tmp.empty()) std::remove(tmp.c_str());
    std::cerr << "shrinkcoup: " << e.what() << '\n';
    return sc::exit_code_for(e);
  }
}

// Command-line front end: asymreg <predict|replica|vamp|experiment|spectrum> [options]

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asymreg/asymreg.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Asymptotic MSE of convex regularized regression under rotationally invariant designs"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::vector<std::string> sets;
  long long seed = -1;
  int jobs = 0;

  for (const char* name : {"predict", "replica", "vamp", "experiment", "spectrum"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override one key, KEY=VALUE (repeatable)");
    sub->add_option("--out", out, "output path prefix; writes PREFIX.json and PREFIX.csv");
    sub->add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : asymreg::kExitConfig;
  }

  std::string text;
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    std::ostringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  std::vector<std::string> overrides = sets;
  overrides.push_back("subcommand=" + app.get_subcommands().front()->get_name());
  if (!out.empty()) overrides.push_back("out=" + out);
  if (seed >= 0) overrides.push_back("seed=" + std::to_string(seed));
  if (jobs > 0) overrides.push_back("jobs=" + std::to_string(jobs));

  asymreg::RunConfig cfg;
  try {
    cfg = asymreg::parse_config(text, overrides);
  } catch (const asymreg::ConfigError& e) {
    for (const auto& msg : e.errors()) std::cerr << "config: " << msg << '\n';
    return asymreg::kExitConfig;
  }
  try {
    return asymreg::dispatch(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return asymreg::kExitConfig;
  }
}

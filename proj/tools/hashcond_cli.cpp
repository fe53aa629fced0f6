#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hashcond/harness/runners.hpp"

namespace {

struct CliOptions {
  std::string config;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("-c,--config", opt.config, "JSON spec file (defaults apply when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", opt.overrides,
                  "dotted-path override, e.g. --set condense.alpha=3 --set seeds=[0,1]");
  cmd->add_flag("-q,--quiet", opt.quiet, "suppress the JSON result on stdout");
}

int dispatch(const std::string& name, const CliOptions& opt) {
  hashcond::ExperimentSpec spec = hashcond::load_spec(opt.config, opt.overrides);
  hashcond::json result;
  if (name == "condense")
    result = hashcond::cmd_condense(spec);
  else if (name == "baseline")
    result = hashcond::cmd_baseline(spec);
  else if (name == "evaluate")
    result = hashcond::cmd_evaluate(spec);
  else if (name == "ablate")
    result = hashcond::cmd_ablate(spec);
  else if (name == "timing")
    result = hashcond::cmd_timing(spec);
  else if (name == "generalize")
    result = hashcond::cmd_generalize(spec);
  else
    result = hashcond::cmd_report(spec);
  if (!opt.quiet) std::cout << result.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dataset condensation for hashing retrieval"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"condense", "learn a synthetic archive per seed"},
      {"baseline", "materialize a random or herding coreset per seed"},
      {"evaluate", "train on each archive and rank query against database"},
      {"ablate", "run the 2x2 network/dataset augmentation grid"},
      {"timing", "condense under a clock and score wall-time checkpoints"},
      {"generalize", "re-train one archive under every hashing loss plugin"},
      {"report", "aggregate per-run reports into tables and charts"},
  };
  std::vector<CliOptions> opts(commands.size());
  for (size_t i = 0; i < commands.size(); ++i)
    add_common(app.add_subcommand(commands[i].first, commands[i].second), opts[i]);

  CLI11_PARSE(app, argc, argv);

  for (size_t i = 0; i < commands.size(); ++i) {
    if (!app.get_subcommand(commands[i].first)->parsed()) continue;
    try {
      return dispatch(commands[i].first, opts[i]);
    } catch (const hashcond::ValidationError& e) {
      std::cerr << "validation error: " << e.what() << "\n";
      return 1;
    } catch (const hashcond::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "runtime error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}

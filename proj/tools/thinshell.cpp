// thinshell: command-line front end for the surface-measure experiments.
//
//   thinshell bounds --config sweep.cfg --set n_list=50,100 --strict
//
// Output goes to standard output unless `output` is set; diagnostics go to
// standard error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thinshell/thinshell.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw thinshell::PreconditionError("cannot open config file " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thin-shell and equivalence-of-ensembles numerics"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string output;
  std::string batch;
  bool strict = false;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"analyze-f", "class-F membership scan for the configured Hamiltonian"},
      {"solve-c", "energy-matched inverse temperature and moments"},
      {"wn", "density of R_n on its grid, with closed-form columns when available"},
      {"clt-scan", "local CLT deviations and the constant C"},
      {"bounds", "KL/TV of projected surface densities against the bounds"},
      {"converse", "lower bound on the L1 distance for k proportional to n"},
      {"ensembles", "microcanonical vs canonical expectations"},
      {"sample", "draw a surface sample batch"},
      {"mixture", "TV bound for a mixture of surface densities"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "key=value configuration file");
    sub->add_option("-s,--set", overrides, "override one key, e.g. --set n_list=50,100")
        ->allow_extra_args(false);
    sub->add_option("-o,--output", output, "write the table here instead of stdout");
    sub->add_flag("--strict", strict, "exit nonzero when any check fails");
    if (name == "sample") sub->add_option("--batch", batch, "write the batch to this binary file");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  try {
    thinshell::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = thinshell::parse_config(slurp(config_path));
    for (const auto& kv : overrides) thinshell::apply_override(cfg, kv);
    if (!output.empty()) cfg.output = output;
    if (!batch.empty()) cfg.batch_path = batch;

    const auto report = thinshell::run(subcommand, cfg);
    if (cfg.output.empty()) {
      std::cout << report.body << std::flush;
    } else {
      std::ofstream os(cfg.output, std::ios::binary);
      if (!os) throw thinshell::PreconditionError("cannot write " + cfg.output);
      os << report.body;
    }
    if (report.has_checks && !report.all_pass) {
      std::cerr << "thinshell " << subcommand << ": at least one check failed\n";
      if (strict) return 3;
    }
    return 0;
  } catch (const thinshell::PreconditionError& e) {
    std::cerr << "thinshell " << subcommand << ": invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "thinshell " << subcommand << ": " << e.what() << '\n';
    return 1;
  }
}

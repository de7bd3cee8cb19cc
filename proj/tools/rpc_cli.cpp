#include "rpc/config.hpp"
#include "rpc/errors.hpp"
#include "rpc/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Flags {
  std::string config;
  std::map<std::string, std::string> values; // config key -> raw value
  std::vector<std::string> sets;             // key=value overrides
};

// Register one flag that maps onto a config key.
void flag(CLI::App &app, Flags &flags, const std::string &name,
          const std::string &key, const std::string &help) {
  app.add_option_function<std::string>(
      name, [&flags, key](const std::string &v) { flags.values[key] = v; }, help);
}

void add_common(CLI::App &app, Flags &flags) {
  app.add_option("--config", flags.config, "key = value configuration file");
  flag(app, flags, "--input", "input", "input CSV, trace or results path");
  flag(app, flags, "--out", "out", "output directory");
  flag(app, flags, "--seed", "seed", "base random seed");
  flag(app, flags, "--iterations", "iterations", "total sweeps");
  flag(app, flags, "--burn-in", "burn_in", "discarded sweeps");
  flag(app, flags, "--k", "k", "maximum clusters per level");
  flag(app, flags, "--family", "family", "categorical | gaussian");
  flag(app, flags, "--model", "model", "rpc | ofmm | lca4");
  flag(app, flags, "--threshold", "threshold", "nonempty cluster weight");
  flag(app, flags, "--beta-update", "beta_update", "on | off");
  flag(app, flags, "--threads", "threads", "parallel replicates");
  app.add_option("--set", flags.sets, "override any config key (key=value)");
}

rpc::RunConfig resolve(const Flags &flags) {
  rpc::RunConfig config;
  if (!flags.config.empty())
    config = rpc::load_config(flags.config);
  for (const auto &[k, v] : flags.values)
    config.set(k, v);
  for (const auto &kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Robust profile clustering: fit, simulate and report"};
  app.set_version_flag("--version", rpc::kVersion);
  app.require_subcommand(1);

  Flags fit_flags, sim_flags, report_flags;
  auto *fit = app.add_subcommand("fit", "fit a model to a CSV file");
  add_common(*fit, fit_flags);
  flag(*fit, fit_flags, "--subpop-column", "subpop_column",
       "name of the subpopulation column");
  flag(*fit, fit_flags, "--levels", "levels",
       "categories per item (0 infers from data)");

  auto *sim = app.add_subcommand("simulate", "simulate replicates, fit, score");
  add_common(*sim, sim_flags);
  std::string case_arg;
  sim->add_option("--case", case_arg, "simulation case 1-7 (7a, 7b, 7c)");
  flag(*sim, sim_flags, "--replicates", "replicates", "number of replicates");
  flag(*sim, sim_flags, "--cell-size", "cell_size",
       "subjects per design cell (0 = default)");

  auto *report = app.add_subcommand("report", "post-process traces, aggregate results");
  add_common(*report, report_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      rpc::run_fit(resolve(fit_flags));
    } else if (sim->parsed()) {
      if (!case_arg.empty()) {
        sim_flags.values["case"] = case_arg.substr(0, 1);
        if (case_arg.size() > 1)
          sim_flags.values["variant"] = case_arg.substr(1);
      }
      rpc::run_simulate(resolve(sim_flags));
    } else if (report->parsed()) {
      rpc::run_report(resolve(report_flags));
    }
  } catch (const rpc::IngestError &e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

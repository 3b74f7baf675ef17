#include <filesystem>
#include <iostream>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gpstc/commands.hpp"
#include "gpstc/csv.hpp"
#include "gpstc/errors.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string preset;
  std::vector<std::string> sets;
  std::optional<long long> seed;
  std::optional<int> horizon;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config file (key = value lines)");
  cmd->add_option("--preset", f.preset, "Start from a named preset (pendulum-paper)");
  cmd->add_option("--set", f.sets, "Override a config key, e.g. --set cost.M=1");
  cmd->add_option("--seed", f.seed, "Overrides loop.seed");
  cmd->add_option("--horizon", f.horizon, "Overrides simulate.horizon");
  cmd->add_option("--out", f.out, "Output directory (overrides out)");
}

gpstc::ExperimentConfig load(const CommonFlags& f) {
  std::map<std::string, std::string> raw;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw gpstc::IoError("cannot open config '" + f.config + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    raw = gpstc::parse_config_text(ss.str());
  }
  if (f.config.empty() && f.preset.empty()) throw gpstc::ValidationError({"either --config or --preset is required"});
  std::map<std::string, std::string> over;
  if (!f.preset.empty()) raw["preset"] = f.preset;
  std::vector<std::string> problems;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      problems.push_back("--set '" + s + "': expected key=value");
      continue;
    }
    over[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (!problems.empty()) throw gpstc::ValidationError(problems);
  if (f.seed) over["loop.seed"] = std::to_string(*f.seed);
  if (f.horizon) over["simulate.horizon"] = std::to_string(*f.horizon);
  if (!f.out.empty()) over["out"] = f.out;
  return gpstc::resolve_config(raw, over);
}

std::vector<double> parse_gammas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(gpstc::csv::parse_double(item, "--gammas"));
    } catch (const gpstc::IoError&) {
      throw gpstc::ValidationError({"--gammas: '" + item + "' is not a number"});
    }
  }
  return out;
}

void print_summary(const std::vector<gpstc::RolloutSummary>& rows) {
  for (const auto& s : rows)
    std::cout << s.label << ": communications=" << s.communications << " mean_m=" << s.mean_interval
              << " final_norm=" << s.final_norm << " cumulative_cost=" << s.cumulative_cost << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-triggered control learned from Gaussian-process dynamics models"};
  app.require_subcommand(1);

  CommonFlags train_f, sim_f, sweep_f, val_f;
  std::string policy;
  std::string gammas = "0,0.01,0.03";

  auto* train = app.add_subcommand("train", "Run the episodic learning loop and write artifacts");
  add_common(train, train_f);
  auto* simulate = app.add_subcommand("simulate", "Roll out a saved policy without exploration");
  add_common(simulate, sim_f);
  simulate->add_option("--policy", policy, "policy.json written by train")->required();
  auto* sweep = app.add_subcommand("sweep-gamma", "Train and simulate once per communication cost weight");
  add_common(sweep, sweep_f);
  sweep->add_option("--gammas", gammas, "Comma-separated gamma values");
  auto* validate = app.add_subcommand("validate-config", "Check a config and print its resolved form");
  add_common(validate, val_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) {
      const auto cfg = load(train_f);
      const auto result = gpstc::cmd_train(cfg);
      std::cout << "trained " << result.traces.size() << " episodes, " << result.dataset.size()
                << " samples; artifacts in " << cfg.out_dir.string() << '\n';
    } else if (simulate->parsed()) {
      const auto cfg = load(sim_f);
      print_summary(gpstc::cmd_simulate(policy, cfg));
    } else if (sweep->parsed()) {
      const auto cfg = load(sweep_f);
      const auto rows = gpstc::cmd_sweep_gamma(cfg, parse_gammas(gammas));
      std::cout << "gamma,mean_m,final_norm,cumulative_cost,comm_count\n";
      for (const auto& r : rows)
        std::cout << r.gamma << ',' << r.mean_m << ',' << r.final_norm << ',' << r.cumulative_cost << ','
                  << r.comm_count << '\n';
    } else if (validate->parsed()) {
      std::cout << gpstc::render_config(load(val_f));
    }
  } catch (const gpstc::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const gpstc::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const gpstc::Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

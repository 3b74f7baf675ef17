#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gpstc/config.hpp"
#include "gpstc/stc.hpp"

namespace gpstc {

struct RolloutSummary {
  std::string label;  // "x_init" or "random_<i>"
  Eigen::VectorXd x0;
  int communications = 0;  // over k in [0, horizon)
  double mean_interval = 0.0;
  double final_norm = 0.0;  // Euclidean norm of the state at k = horizon
  double cumulative_cost = 0.0;
};

RolloutSummary summarize(const std::string& label, const EpisodeTrace& trace, int horizon, const CostConfig& cfg);

/// Runs the learning loop and writes into cfg.out_dir:
/// episode_<e>.csv, policy.json, dataset.csv, manifest.json and resolved.cfg.
TrainResult cmd_train(const ExperimentConfig& cfg);

/// Rolls out a saved policy without exploration from x_init and `random_inits` extra
/// states drawn uniformly from the box x_init +- init_radius (seeded by loop.seed).
/// Writes trace_<label>.csv and summary.csv into cfg.out_dir.
std::vector<RolloutSummary> cmd_simulate(const std::filesystem::path& policy_path, const ExperimentConfig& cfg);

struct SweepRow {
  double gamma = 0.0;
  double mean_m = 0.0;
  double final_norm = 0.0;
  double cumulative_cost = 0.0;
  int comm_count = 0;

  bool operator==(const SweepRow&) const = default;
};

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

/// Train + simulate once per gamma with the configured seed, each run in out_dir/gamma_<i>;
/// the table goes to out_dir/sweep.csv. An empty list or a negative gamma is a ValidationError.
std::vector<SweepRow> cmd_sweep_gamma(const ExperimentConfig& cfg, const std::vector<double>& gammas);

}  // namespace gpstc

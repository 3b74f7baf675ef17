#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gpstc/costs.hpp"
#include "gpstc/errors.hpp"
#include "gpstc/gp.hpp"
#include "gpstc/plants.hpp"
#include "gpstc/vi.hpp"

namespace gpstc {

/// One plant step of a closed-loop run. `u` is absent only on the terminal row, which
/// records the state transmitted after the last round.
struct TraceStep {
  int k = 0;
  Eigen::VectorXd x;
  std::optional<Eigen::VectorXd> u;
  bool comm = false;
  std::optional<int> m;  // present at communication instants that start a round
  double stage_cost = 0.0;

  bool operator==(const TraceStep& o) const;
};

struct EpisodeTrace {
  std::vector<TraceStep> steps;

  /// Communication instants with k < horizon.
  int communications(int horizon) const;
  /// Mean of the recorded m over rounds starting before `horizon`.
  double mean_interval(int horizon) const;
  /// Sum over communication instants after k = 0 of C1(x) + gamma (M - m).
  double cumulative_cost(double gamma, int M) const;
  /// State at plant step k; throws ArgumentError when k is not in the trace.
  const Eigen::VectorXd& state_at(int k) const;
  int last_step() const { return steps.empty() ? -1 : steps.back().k; }

  bool operator==(const EpisodeTrace& o) const { return steps == o.steps; }
};

/// CSV columns: k, x1..x_nx, u1..u_nu, comm (0/1), m (blank unless a round starts), stage_cost.
void write_trace_csv(const EpisodeTrace& trace, Eigen::Index n_x, Eigen::Index n_u, const std::filesystem::path& path);
EpisodeTrace read_trace_csv(const std::filesystem::path& path);

struct Action {
  Eigen::VectorXd u;
  int m;
};

/// Self-triggered controller step: u = control_decision, m = comm_decision.
Action act(const PolicyPair& pair, const Eigen::VectorXd& x);

/// Deterministic closed-loop rollout (no exploration). Rounds start while k < horizon,
/// so the trace ends at the first communication instant at or after `horizon`.
EpisodeTrace rollout(const PlantSpec& plant, const PolicyPair& pair, const Eigen::VectorXd& x0, int horizon,
                     const CostConfig& cfg);

struct LearnerState {
  Dataset dataset;
  std::optional<MultiGpModel> model;
  PolicyPair pair;
  std::uint64_t rng_seed = 0;
  std::mt19937_64 rng;
  int episode_count = 0;

  /// Empty dataset, zero-weight policies (comm_decision == 1 everywhere).
  LearnerState(const PlantSpec& plant, const RepresentativeGrid& grid, double width, std::uint64_t seed);
};

/// Raised when the plant fails mid-episode; carries the steps recorded so far.
class EpisodeAborted : public NumericalError {
 public:
  EpisodeAborted(const std::string& what, EpisodeTrace partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const EpisodeTrace& partial_trace() const { return partial_; }

 private:
  EpisodeTrace partial_;
};

struct EpisodeResult {
  EpisodeTrace trace;
  Dataset samples;  // one-step transitions from rounds with m = 1
};

/// One exploration/exploitation episode of n_max decision rounds.
EpisodeResult run_episode(const PlantSpec& plant, LearnerState& learner, const CostConfig& cfg, double epsilon,
                          int n_max, const Eigen::VectorXd& x_init);

struct GpTrainOptions {
  std::vector<Hyperparams> init;  // one shared or one per state dimension
  GpFitOptions fit;
  std::size_t cap = 400;
};

struct LoopOptions {
  int episodes = 10;
  int rounds = 40;  // decision rounds per episode
  double epsilon = 0.3;
  std::optional<double> epsilon_final;  // linear decay target over the episodes
  std::uint64_t seed = 0;
};

struct TrainConfig {
  PlantSpec plant;
  RepresentativeGrid grid;
  CostConfig cost;
  GpTrainOptions gp;
  ViOptions vi;
  LoopOptions loop;
  Eigen::VectorXd x_init;

  double rbf_width() const { return vi.width_factor * grid.state_spacing; }
};

struct EpisodeReport {
  int episode;
  double epsilon;
  Eigen::Index dataset_size;
  std::vector<Hyperparams> hyper;
  std::vector<double> sweep_changes;
};

struct TrainResult {
  PolicyPair pair;
  std::vector<EpisodeTrace> traces;
  std::optional<MultiGpModel> model;
  Dataset dataset;
  std::vector<EpisodeReport> reports;
};

/// Epsilon used in a given (0-based) episode.
double episode_epsilon(const LoopOptions& loop, int episode);

/// Episodic learning loop: explore, grow the dataset, refit the GP, re-run value iteration.
/// `on_episode` (optional) observes each finished episode.
TrainResult train(const TrainConfig& config,
                  const std::function<void(const EpisodeReport&, const EpisodeTrace&)>& on_episode = {});

}  // namespace gpstc

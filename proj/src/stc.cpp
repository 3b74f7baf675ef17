#include "gpstc/stc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gpstc/csv.hpp"
#include "gpstc/errors.hpp"

namespace gpstc {

bool TraceStep::operator==(const TraceStep& o) const {
  if (k != o.k || comm != o.comm || m != o.m || stage_cost != o.stage_cost) return false;
  if (x.size() != o.x.size() || x != o.x) return false;
  if (u.has_value() != o.u.has_value()) return false;
  return !u || (u->size() == o.u->size() && *u == *o.u);
}

int EpisodeTrace::communications(int horizon) const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(),
                                        [horizon](const TraceStep& s) { return s.comm && s.k < horizon; }));
}

double EpisodeTrace::mean_interval(int horizon) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& s : steps)
    if (s.m && s.k < horizon) {
      sum += *s.m;
      ++n;
    }
  return n == 0 ? 0.0 : sum / n;
}

double EpisodeTrace::cumulative_cost(double gamma, int M) const {
  double total = 0.0;
  for (const auto& s : steps) {
    if (!s.comm || s.k == 0) continue;
    total += s.stage_cost;
    if (s.m) total += gamma * static_cast<double>(M - *s.m);
  }
  return total;
}

const Eigen::VectorXd& EpisodeTrace::state_at(int k) const {
  for (const auto& s : steps)
    if (s.k == k) return s.x;
  throw ArgumentError("trace has no step " + std::to_string(k));
}

void write_trace_csv(const EpisodeTrace& trace, Eigen::Index n_x, Eigen::Index n_u, const std::filesystem::path& path) {
  csv::Table t;
  t.header.push_back("k");
  for (Eigen::Index i = 0; i < n_x; ++i) t.header.push_back("x" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < n_u; ++i) t.header.push_back("u" + std::to_string(i + 1));
  t.header.insert(t.header.end(), {"comm", "m", "stage_cost"});
  for (const auto& s : trace.steps) {
    if (s.x.size() != n_x || (s.u && s.u->size() != n_u)) throw ShapeError("trace row has wrong dimensions");
    std::vector<std::string> row{std::to_string(s.k)};
    for (Eigen::Index i = 0; i < n_x; ++i) row.push_back(csv::format_double(s.x[i]));
    for (Eigen::Index i = 0; i < n_u; ++i) row.push_back(s.u ? csv::format_double((*s.u)[i]) : std::string());
    row.push_back(s.comm ? "1" : "0");
    row.push_back(s.m ? std::to_string(*s.m) : std::string());
    row.push_back(csv::format_double(s.stage_cost));
    t.rows.push_back(std::move(row));
  }
  csv::write(t, path);
}

EpisodeTrace read_trace_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  std::vector<std::size_t> xs, us;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const auto& h = t.header[c];
    if (h.size() > 1 && h[0] == 'x' && std::isdigit(static_cast<unsigned char>(h[1]))) xs.push_back(c);
    if (h.size() > 1 && h[0] == 'u' && std::isdigit(static_cast<unsigned char>(h[1]))) us.push_back(c);
  }
  const std::size_t ck = t.column("k"), cc = t.column("comm"), cm = t.column("m"), cs = t.column("stage_cost");
  EpisodeTrace trace;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path.string() + " row " + std::to_string(r + 1);
    TraceStep s;
    s.k = static_cast<int>(csv::parse_double(row[ck], ctx));
    s.x.resize(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) s.x[static_cast<Eigen::Index>(i)] = csv::parse_double(row[xs[i]], ctx);
    const auto blank = static_cast<std::size_t>(
        std::count_if(us.begin(), us.end(), [&row](std::size_t c) { return row[c].empty(); }));
    if (blank != 0 && blank != us.size()) throw IoError(ctx + ": partially blank input columns");
    const bool any_u = !us.empty() && blank == 0;
    if (any_u) {
      Eigen::VectorXd u(static_cast<Eigen::Index>(us.size()));
      for (std::size_t i = 0; i < us.size(); ++i) u[static_cast<Eigen::Index>(i)] = csv::parse_double(row[us[i]], ctx);
      s.u = std::move(u);
    }
    if (row[cc] != "0" && row[cc] != "1") throw IoError(ctx + ": comm must be 0 or 1");
    s.comm = row[cc] == "1";
    if (auto m = csv::parse_optional_double(row[cm], ctx)) s.m = static_cast<int>(*m);
    s.stage_cost = csv::parse_double(row[cs], ctx);
    trace.steps.push_back(std::move(s));
  }
  return trace;
}

Action act(const PolicyPair& pair, const Eigen::VectorXd& x) {
  return {control_decision(pair, x), comm_decision(pair, x)};
}

namespace {

// Applies u for m steps starting at (k, x); appends the rows and returns the new state.
Eigen::VectorXd apply_round(const PlantSpec& plant, const CostConfig& cfg, EpisodeTrace& trace, int& k,
                            Eigen::VectorXd x, const Eigen::VectorXd& u, int m) {
  for (int j = 0; j < m; ++j) {
    TraceStep s;
    s.k = k;
    s.x = x;
    s.u = u;
    s.comm = j == 0;
    if (j == 0) s.m = m;
    s.stage_cost = stage_cost(x, cfg);
    trace.steps.push_back(std::move(s));
    try {
      x = plant(x, u);
    } catch (const Error& e) {
      throw EpisodeAborted("plant step failed at k=" + std::to_string(k) + ": " + e.what(), trace);
    }
    ++k;
  }
  return x;
}

void push_terminal(EpisodeTrace& trace, int k, const Eigen::VectorXd& x, const CostConfig& cfg) {
  TraceStep s;
  s.k = k;
  s.x = x;
  s.comm = true;
  s.stage_cost = stage_cost(x, cfg);
  trace.steps.push_back(std::move(s));
}

}  // namespace

EpisodeTrace rollout(const PlantSpec& plant, const PolicyPair& pair, const Eigen::VectorXd& x0, int horizon,
                     const CostConfig& cfg) {
  if (x0.size() != plant.state_dim || pair.state_dim() != plant.state_dim || pair.input_dim() != plant.input_dim)
    throw ShapeError("policy, plant and initial state dimensions disagree");
  EpisodeTrace trace;
  Eigen::VectorXd x = x0;
  int k = 0;
  while (k < horizon) {
    const Action a = act(pair, x);
    x = apply_round(plant, cfg, trace, k, x, a.u, a.m);
  }
  push_terminal(trace, k, x, cfg);
  return trace;
}

LearnerState::LearnerState(const PlantSpec& plant, const RepresentativeGrid& grid, double width, std::uint64_t seed)
    : dataset(plant.state_dim, plant.input_dim),
      pair(PolicyPair::zeros(grid.states, width, grid.M, plant.input_lower, plant.input_upper)),
      rng_seed(seed),
      rng(seed) {}

EpisodeResult run_episode(const PlantSpec& plant, LearnerState& learner, const CostConfig& cfg, double epsilon,
                          int n_max, const Eigen::VectorXd& x_init) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must lie in [0, 1]");
  if (n_max < 1) throw ArgumentError("episode needs at least one decision round");
  if (x_init.size() != plant.state_dim) throw ShapeError("initial state has wrong dimension");

  EpisodeResult out{{}, Dataset(plant.state_dim, plant.input_dim)};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd x = x_init;
  int k = 0;
  for (int round = 0; round < n_max; ++round) {
    const double r = unit(learner.rng);
    Action a;
    if (r < epsilon) {
      a.m = 1;
      a.u.resize(plant.input_dim);
      for (Eigen::Index d = 0; d < plant.input_dim; ++d)
        a.u[d] = plant.input_lower[d] + (plant.input_upper[d] - plant.input_lower[d]) * unit(learner.rng);
    } else {
      a = act(learner.pair, x);
    }
    const Eigen::VectorXd start = x;
    x = apply_round(plant, cfg, out.trace, k, x, a.u, a.m);
    if (a.m == 1) out.samples.append(start, a.u, x);
  }
  push_terminal(out.trace, k, x, cfg);
  ++learner.episode_count;
  return out;
}

double episode_epsilon(const LoopOptions& loop, int episode) {
  if (!loop.epsilon_final || loop.episodes <= 1) return loop.epsilon;
  const double t = static_cast<double>(episode) / static_cast<double>(loop.episodes - 1);
  return loop.epsilon + t * (*loop.epsilon_final - loop.epsilon);
}

TrainResult train(const TrainConfig& config,
                  const std::function<void(const EpisodeReport&, const EpisodeTrace&)>& on_episode) {
  config.cost.validate();
  config.grid.validate(config.plant.input_lower, config.plant.input_upper);
  const double width = config.rbf_width();
  LearnerState learner(config.plant, config.grid, width, config.loop.seed);

  std::vector<Hyperparams> init = config.gp.init;
  if (init.empty()) {
    Hyperparams h;
    h.lengthscales = Eigen::VectorXd::Ones(config.plant.state_dim + config.plant.input_dim);
    init.push_back(h);
  }

  TrainResult result;
  for (int e = 0; e < config.loop.episodes; ++e) {
    const double eps = episode_epsilon(config.loop, e);
    EpisodeResult ep = run_episode(config.plant, learner, config.cost, eps, config.loop.rounds, config.x_init);
    learner.dataset.extend(ep.samples);
    learner.dataset.truncate_oldest(config.gp.cap);

    EpisodeReport report{e + 1, eps, learner.dataset.size(), {}, {}};
    if (!learner.dataset.empty()) {
      GpFitOptions fo = config.gp.fit;
      fo.seed = config.loop.seed * 1000003ULL + static_cast<std::uint64_t>(e);
      try {
        learner.model = fit(learner.dataset, init, fo);
      } catch (const Error& err) {
        throw NumericalError("episode " + std::to_string(e + 1) + ", GP learning phase: " + err.what());
      }
      for (const auto& m : learner.model->models()) report.hyper.push_back(m.hyper());

      const PolicyPair cold = PolicyPair::zeros(config.grid.states, width, config.cost.M, config.plant.input_lower,
                                                config.plant.input_upper);
      try {
        ViResult vi = value_iteration(*learner.model, config.grid, config.cost, config.vi, cold);
        for (const auto& s : vi.sweeps) report.sweep_changes.push_back(s.sup_change);
        learner.pair = std::move(vi.pair);
      } catch (const Error& err) {
        throw NumericalError("episode " + std::to_string(e + 1) + ", value iteration phase: " + err.what());
      }
    }
    if (on_episode) on_episode(report, ep.trace);
    result.traces.push_back(std::move(ep.trace));
    result.reports.push_back(std::move(report));
  }
  result.pair = learner.pair;
  result.model = learner.model;
  result.dataset = learner.dataset;
  return result;
}

}  // namespace gpstc

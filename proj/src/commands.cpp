#include "gpstc/commands.hpp"

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "gpstc/csv.hpp"
#include "gpstc/errors.hpp"

namespace gpstc {

namespace {

using nlohmann::json;

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json hyper_json(const Hyperparams& h) {
  return {{"signal_amplitude", h.signal_amplitude},
          {"lengthscales", to_vec(h.lengthscales)},
          {"noise_variance", h.noise_variance}};
}

}  // namespace

RolloutSummary summarize(const std::string& label, const EpisodeTrace& trace, int horizon, const CostConfig& cfg) {
  RolloutSummary s;
  s.label = label;
  s.x0 = trace.steps.front().x;
  s.communications = trace.communications(horizon);
  s.mean_interval = trace.mean_interval(horizon);
  s.final_norm = trace.state_at(horizon).norm();
  s.cumulative_cost = trace.cumulative_cost(cfg.gamma, cfg.M);
  return s;
}

TrainResult cmd_train(const ExperimentConfig& cfg) {
  const auto& tc = cfg.train;
  ensure_dir(cfg.out_dir);
  write_text(cfg.out_dir / "resolved.cfg", render_config(cfg));

  json episodes = json::array();
  auto on_episode = [&](const EpisodeReport& r, const EpisodeTrace& trace) {
    write_trace_csv(trace, tc.plant.state_dim, tc.plant.input_dim,
                    cfg.out_dir / ("episode_" + std::to_string(r.episode) + ".csv"));
    json hyper = json::array();
    for (const auto& h : r.hyper) hyper.push_back(hyper_json(h));
    episodes.push_back({{"episode", r.episode},
                        {"epsilon", r.epsilon},
                        {"dataset_size", r.dataset_size},
                        {"hyperparameters", hyper},
                        {"vi_sweep_changes", r.sweep_changes}});
  };
  TrainResult result = train(tc, on_episode);

  save_policy(result.pair, cfg.out_dir / "policy.json");
  write_dataset_csv(result.dataset, cfg.out_dir / "dataset.csv");
  json manifest = {{"config", cfg.values}, {"episodes", episodes}};
  write_text(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

std::vector<RolloutSummary> cmd_simulate(const std::filesystem::path& policy_path, const ExperimentConfig& cfg) {
  const auto& tc = cfg.train;
  const PolicyPair pair = load_policy(policy_path);
  if (pair.state_dim() != tc.plant.state_dim || pair.input_dim() != tc.plant.input_dim)
    throw IoError("policy '" + policy_path.string() + "' has dimensions (" + std::to_string(pair.state_dim()) + ", " +
                  std::to_string(pair.input_dim()) + ") but plant '" + tc.plant.name + "' needs (" +
                  std::to_string(tc.plant.state_dim) + ", " + std::to_string(tc.plant.input_dim) + ")");
  if (pair.M != tc.cost.M)
    throw IoError("policy '" + policy_path.string() + "' was trained with M=" + std::to_string(pair.M) +
                  " but the config has cost.M=" + std::to_string(tc.cost.M));

  std::vector<std::pair<std::string, Eigen::VectorXd>> starts{{"x_init", tc.x_init}};
  std::mt19937_64 rng(tc.loop.seed);
  std::uniform_real_distribution<double> offset(-cfg.init_radius, cfg.init_radius);
  for (int i = 0; i < cfg.random_inits; ++i) {
    Eigen::VectorXd x = tc.x_init;
    for (Eigen::Index d = 0; d < x.size(); ++d) x[d] += offset(rng);
    starts.emplace_back("random_" + std::to_string(i + 1), x);
  }

  ensure_dir(cfg.out_dir);
  std::vector<RolloutSummary> out;
  for (const auto& [label, x0] : starts) {
    const EpisodeTrace trace = rollout(tc.plant, pair, x0, cfg.horizon, tc.cost);
    write_trace_csv(trace, tc.plant.state_dim, tc.plant.input_dim, cfg.out_dir / ("trace_" + label + ".csv"));
    out.push_back(summarize(label, trace, cfg.horizon, tc.cost));
  }

  csv::Table t;
  t.header = {"label"};
  for (Eigen::Index d = 0; d < tc.plant.state_dim; ++d) t.header.push_back("x0_" + std::to_string(d + 1));
  t.header.insert(t.header.end(), {"communications", "mean_m", "final_norm", "cumulative_cost"});
  for (const auto& s : out) {
    std::vector<std::string> row{s.label};
    for (Eigen::Index d = 0; d < s.x0.size(); ++d) row.push_back(csv::format_double(s.x0[d]));
    row.push_back(std::to_string(s.communications));
    row.push_back(csv::format_double(s.mean_interval));
    row.push_back(csv::format_double(s.final_norm));
    row.push_back(csv::format_double(s.cumulative_cost));
    t.rows.push_back(std::move(row));
  }
  csv::write(t, cfg.out_dir / "summary.csv");
  return out;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"gamma", "mean_m", "final_norm", "cumulative_cost", "comm_count"};
  for (const auto& r : rows)
    t.rows.push_back({csv::format_double(r.gamma), csv::format_double(r.mean_m), csv::format_double(r.final_norm),
                      csv::format_double(r.cumulative_cost), std::to_string(r.comm_count)});
  csv::write(t, path);
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t cg = t.column("gamma"), cm = t.column("mean_m"), cf = t.column("final_norm"),
                    cc = t.column("cumulative_cost"), cn = t.column("comm_count");
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::string ctx = path.string() + " row " + std::to_string(i + 1);
    rows.push_back({csv::parse_double(r[cg], ctx), csv::parse_double(r[cm], ctx), csv::parse_double(r[cf], ctx),
                    csv::parse_double(r[cc], ctx), static_cast<int>(csv::parse_double(r[cn], ctx))});
  }
  return rows;
}

std::vector<SweepRow> cmd_sweep_gamma(const ExperimentConfig& cfg, const std::vector<double>& gammas) {
  std::vector<std::string> problems;
  if (gammas.empty()) problems.push_back("gamma list: must contain at least one value");
  for (double g : gammas)
    if (!(g >= 0.0)) problems.push_back("gamma list: " + csv::format_double(g) + " is negative");
  if (!problems.empty()) throw ValidationError(std::move(problems));

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    std::map<std::string, std::string> values = cfg.values;
    values["cost.gamma"] = csv::format_double(gammas[i]);
    values["out"] = (cfg.out_dir / ("gamma_" + std::to_string(i + 1))).string();
    ExperimentConfig run = resolve_config(values);
    run.random_inits = 0;
    cmd_train(run);
    const auto summaries = cmd_simulate(run.out_dir / "policy.json", run);
    const RolloutSummary& s = summaries.front();
    rows.push_back({gammas[i], s.mean_interval, s.final_norm, s.cumulative_cost, s.communications});
  }
  ensure_dir(cfg.out_dir);
  write_sweep_csv(rows, cfg.out_dir / "sweep.csv");
  return rows;
}

}  // namespace gpstc

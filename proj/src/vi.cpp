#include "gpstc/vi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gpstc/errors.hpp"
#include "gpstc/propagate.hpp"

namespace gpstc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Grid

std::vector<double> axis_points(double lower, double upper, double spacing) {
  if (!(spacing > 0.0)) throw ArgumentError("grid spacing must be positive");
  if (!(upper >= lower)) throw ArgumentError("grid upper bound is below its lower bound");
  const auto count = static_cast<long>(std::floor((upper - lower) / spacing + 1e-9)) + 1;
  std::vector<double> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    double v = lower + static_cast<double>(i) * spacing;
    if (std::abs(v) < 1e-9 * spacing) v = 0.0;
    pts.push_back(std::min(v, upper));
  }
  return pts;
}

namespace {

Eigen::MatrixXd tensor_grid(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, double spacing) {
  if (lower.size() != upper.size() || lower.size() == 0) throw ShapeError("grid bounds dimension mismatch");
  std::vector<std::vector<double>> axes;
  Eigen::Index total = 1;
  for (Eigen::Index d = 0; d < lower.size(); ++d) {
    axes.push_back(axis_points(lower[d], upper[d], spacing));
    total *= static_cast<Eigen::Index>(axes.back().size());
  }
  const Eigen::Index dims = lower.size();
  Eigen::MatrixXd pts(total, dims);
  // First coordinate varies slowest.
  for (Eigen::Index r = 0; r < total; ++r) {
    Eigen::Index rem = r;
    for (Eigen::Index d = dims - 1; d >= 0; --d) {
      const auto& ax = axes[static_cast<std::size_t>(d)];
      const auto n = static_cast<Eigen::Index>(ax.size());
      pts(r, d) = ax[static_cast<std::size_t>(rem % n)];
      rem /= n;
    }
  }
  return pts;
}

}  // namespace

RepresentativeGrid RepresentativeGrid::regular(const Eigen::VectorXd& state_lower, const Eigen::VectorXd& state_upper,
                                               double state_spacing, const Eigen::VectorXd& input_lower,
                                               const Eigen::VectorXd& input_upper, double input_spacing, int M) {
  RepresentativeGrid g;
  g.states = tensor_grid(state_lower, state_upper, state_spacing);
  g.inputs = tensor_grid(input_lower, input_upper, input_spacing);
  g.M = M;
  g.state_spacing = state_spacing;
  return g;
}

void RepresentativeGrid::validate(const Eigen::VectorXd& input_lower, const Eigen::VectorXd& input_upper) const {
  if (num_states() < 1 || num_inputs() < 1) throw ArgumentError("grid needs at least one state and one input");
  if (M < 1) throw ArgumentError("grid M must be at least 1");
  bool has_origin = false;
  for (Eigen::Index r = 0; r < num_states(); ++r) has_origin |= states.row(r).isZero(0.0);
  if (!has_origin) throw ArgumentError("representative states must contain the origin");
  if (inputs.cols() != input_lower.size()) throw ShapeError("grid inputs do not match the input dimension");
  for (Eigen::Index r = 0; r < num_inputs(); ++r)
    for (Eigen::Index d = 0; d < inputs.cols(); ++d)
      if (inputs(r, d) < input_lower[d] - 1e-12 || inputs(r, d) > input_upper[d] + 1e-12)
        throw ArgumentError("representative input lies outside the admissible input box");
}

// ---------------------------------------------------------------------------
// RBF approximators

RbfApproximator RbfApproximator::zeros(const Eigen::MatrixXd& centers, double width) {
  RbfApproximator a{centers, Eigen::VectorXd::Zero(centers.rows()), width};
  a.check();
  return a;
}

void RbfApproximator::check() const {
  if (weights.size() != centers.rows()) throw ShapeError("RBF weight count differs from center count");
  if (!(width > 0.0)) throw ArgumentError("RBF width must be positive");
}

double rbf_eval(const RbfApproximator& approx, const Eigen::VectorXd& x) {
  if (x.size() != approx.centers.cols()) throw ShapeError("rbf_eval: state dimension mismatch");
  const double inv = 1.0 / (2.0 * approx.width * approx.width);
  const Eigen::ArrayXd d2 = (approx.centers.rowwise() - x.transpose()).rowwise().squaredNorm().array();
  return approx.weights.dot((-d2 * inv).exp().matrix());
}

PolicyPair PolicyPair::zeros(const Eigen::MatrixXd& centers, double width, int M, const Eigen::VectorXd& input_lower,
                             const Eigen::VectorXd& input_upper) {
  PolicyPair p;
  p.j_star = RbfApproximator::zeros(centers, width);
  for (Eigen::Index d = 0; d < input_lower.size(); ++d) p.pi_inp.push_back(RbfApproximator::zeros(centers, width));
  p.pi_com_raw = RbfApproximator::zeros(centers, width);
  p.M = M;
  p.input_lower = input_lower;
  p.input_upper = input_upper;
  p.check();
  return p;
}

void PolicyPair::check() const {
  j_star.check();
  pi_com_raw.check();
  if (M < 1) throw ArgumentError("policy M must be at least 1");
  if (pi_inp.empty()) throw ShapeError("policy has no control approximators");
  if (input_lower.size() != input_dim() || input_upper.size() != input_dim())
    throw ShapeError("policy input bounds do not match its control approximators");
  auto same = [this](const RbfApproximator& a) {
    return a.centers.rows() == j_star.centers.rows() && a.centers.cols() == j_star.centers.cols() &&
           a.centers == j_star.centers;
  };
  if (!same(pi_com_raw)) throw ShapeError("policy approximators must share centers");
  for (const auto& a : pi_inp) {
    a.check();
    if (!same(a)) throw ShapeError("policy approximators must share centers");
  }
}

int comm_decision(const PolicyPair& pair, const Eigen::VectorXd& x) {
  const double raw = rbf_eval(pair.pi_com_raw, x);
  if (std::isnan(raw)) return 1;
  const double rounded = std::floor(raw + 0.5);
  if (rounded <= 1.0) return 1;
  if (rounded >= static_cast<double>(pair.M)) return pair.M;
  return static_cast<int>(rounded);
}

Eigen::VectorXd control_decision(const PolicyPair& pair, const Eigen::VectorXd& x) {
  Eigen::VectorXd u(pair.input_dim());
  for (Eigen::Index d = 0; d < u.size(); ++d) u[d] = rbf_eval(pair.pi_inp[static_cast<std::size_t>(d)], x);
  return u.cwiseMax(pair.input_lower).cwiseMin(pair.input_upper);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kPolicyFormat = "gpstc-policy";
constexpr int kPolicyVersion = 1;

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json approx_to_json(const RbfApproximator& a) {
  return {{"width", a.width}, {"weights", vec_to_json(a.weights)}};
}

RbfApproximator approx_from_json(const json& j, const Eigen::MatrixXd& centers) {
  RbfApproximator a{centers, vec_from_json(j.at("weights")), j.at("width").get<double>()};
  a.check();
  return a;
}

}  // namespace

void save_policy(const PolicyPair& pair, const std::filesystem::path& path) {
  pair.check();
  json centers = json::array();
  for (Eigen::Index r = 0; r < pair.j_star.centers.rows(); ++r)
    centers.push_back(vec_to_json(pair.j_star.centers.row(r).transpose()));
  json inp = json::array();
  for (const auto& a : pair.pi_inp) inp.push_back(approx_to_json(a));
  const json doc = {{"format", kPolicyFormat},
                    {"version", kPolicyVersion},
                    {"state_dim", pair.state_dim()},
                    {"input_dim", pair.input_dim()},
                    {"M", pair.M},
                    {"input_lower", vec_to_json(pair.input_lower)},
                    {"input_upper", vec_to_json(pair.input_upper)},
                    {"centers", centers},
                    {"j_star", approx_to_json(pair.j_star)},
                    {"pi_inp", inp},
                    {"pi_com_raw", approx_to_json(pair.pi_com_raw)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

PolicyPair load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open policy file '" + path.string() + "'");
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != kPolicyFormat) throw IoError("'" + path.string() + "' is not a policy file");
    if (doc.at("version").get<int>() != kPolicyVersion)
      throw IoError("unsupported policy version " + doc.at("version").dump());
    const auto nx = doc.at("state_dim").get<Eigen::Index>();
    const auto& jc = doc.at("centers");
    Eigen::MatrixXd centers(static_cast<Eigen::Index>(jc.size()), nx);
    for (std::size_t r = 0; r < jc.size(); ++r) {
      const Eigen::VectorXd c = vec_from_json(jc[r]);
      if (c.size() != nx) throw IoError("policy center has wrong dimension");
      centers.row(static_cast<Eigen::Index>(r)) = c.transpose();
    }
    PolicyPair p;
    p.M = doc.at("M").get<int>();
    p.input_lower = vec_from_json(doc.at("input_lower"));
    p.input_upper = vec_from_json(doc.at("input_upper"));
    p.j_star = approx_from_json(doc.at("j_star"), centers);
    for (const auto& a : doc.at("pi_inp")) p.pi_inp.push_back(approx_from_json(a, centers));
    p.pi_com_raw = approx_from_json(doc.at("pi_com_raw"), centers);
    if (p.input_dim() != doc.at("input_dim").get<Eigen::Index>()) throw IoError("policy input_dim mismatch");
    p.check();
    return p;
  } catch (const json::exception& e) {
    throw IoError("malformed policy file '" + path.string() + "': " + e.what());
  } catch (const ShapeError& e) {
    throw IoError("inconsistent policy file '" + path.string() + "': " + e.what());
  } catch (const ArgumentError& e) {
    throw IoError("inconsistent policy file '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Backups

namespace {

double expected_rbf_sum(const RbfApproximator& a, const GaussianBelief& b) {
  const ExpectedRbfKernel k(b, a.width);
  double s = 0.0;
  for (Eigen::Index n = 0; n < a.centers.rows(); ++n)
    if (a.weights[n] != 0.0) s += a.weights[n] * k(a.centers.row(n).transpose());
  return s;
}

}  // namespace

double bellman_backup(const Eigen::VectorXd& x, const Eigen::VectorXd& u, int m, const MultiGpModel& model,
                      const PolicyPair& pair, const CostConfig& cfg, double discount) {
  if (m < 1 || m > cfg.M)
    throw ArgumentError("bellman_backup: m=" + std::to_string(m) + " outside 1.." + std::to_string(cfg.M));
  const GaussianBelief b = propagate_m_steps(model, x, u, m).back();
  const double stage = expected_stage_cost(b, cfg);
  const double comm = cfg.gamma == 0.0 ? 0.0 : cfg.gamma * (static_cast<double>(cfg.M) - expected_rbf_sum(pair.pi_com_raw, b));
  return stage + comm + discount * expected_rbf_sum(pair.j_star, b);
}

Eigen::VectorXd fit_rbf_weights(const Eigen::MatrixXd& centers, const Eigen::VectorXd& targets, double width,
                                double ridge, double ridge_max) {
  if (targets.size() != centers.rows())
    throw ShapeError("fit_rbf_weights: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(centers.rows()) + " centers");
  if (!(width > 0.0)) throw ArgumentError("RBF width must be positive");
  if (!(ridge >= 0.0)) throw ArgumentError("ridge must be non-negative");
  if (!targets.allFinite()) throw NumericalError("fit_rbf_weights: non-finite targets");
  const Eigen::Index n = centers.rows();
  const Eigen::VectorXd sq = centers.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * centers * centers.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  Eigen::MatrixXd phi = (-d2.array().max(0.0) / (2.0 * width * width)).exp().matrix();
  phi.diagonal().setOnes();

  for (double r = ridge;;) {
    Eigen::MatrixXd a = phi;
    a.diagonal().array() += r;
    const Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd w = llt.solve(targets);
      if (w.allFinite()) return w;
    }
    if (r >= ridge_max) break;
    r = r == 0.0 ? std::min(1e-8, ridge_max) : std::min(r * 10.0, ridge_max);
  }
  throw NumericalError("RBF interpolation system (" + std::to_string(n) + " centers) is singular up to ridge " +
                       std::to_string(ridge_max));
}

std::size_t select_argmin(const std::vector<BackupCandidate>& candidates, double tie_tolerance) {
  if (candidates.empty()) throw ArgumentError("select_argmin: no candidates");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) best = std::min(best, c.value);
  std::size_t win = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.value > best + tie_tolerance) continue;
    if (win == candidates.size()) {
      win = i;
      continue;
    }
    const auto& w = candidates[win];
    if (c.m > w.m || (c.m == w.m && c.input_norm < w.input_norm - 1e-12)) win = i;
  }
  return win;
}

// ---------------------------------------------------------------------------
// Value iteration

namespace {

// Everything in a backup that does not depend on the approximator weights. Row
// index is (state * N_U + input) * M + (m - 1).
struct BackupTable {
  Eigen::VectorXd stage;
  Eigen::MatrixXd delta_j;  // rows x N_X, expected RBF features for the value width
  Eigen::MatrixXd delta_c;  // same for the communication width (may alias delta_j)
  bool shared = false;
};

BackupTable build_table(const MultiGpModel& model, const RepresentativeGrid& grid, const CostConfig& cfg,
                        const PolicyPair& pair) {
  const Eigen::Index ns = grid.num_states();
  const Eigen::Index nu = grid.num_inputs();
  const Eigen::Index rows = ns * nu * grid.M;
  const Eigen::MatrixXd& centers = pair.j_star.centers;
  BackupTable t;
  t.stage.resize(rows);
  t.delta_j.resize(rows, centers.rows());
  t.shared = pair.j_star.width == pair.pi_com_raw.width;
  const bool need_c = !t.shared && cfg.gamma != 0.0;
  if (need_c) t.delta_c.resize(rows, centers.rows());

  for (Eigen::Index s = 0; s < ns; ++s) {
    const Eigen::VectorXd x = grid.states.row(s).transpose();
    for (Eigen::Index i = 0; i < nu; ++i) {
      const Eigen::VectorXd u = grid.inputs.row(i).transpose();
      std::vector<GaussianBelief> chain;
      try {
        chain = propagate_m_steps(model, x, u, grid.M);
      } catch (const Error& e) {
        std::ostringstream msg;
        msg << "propagation failed at x=[" << x.transpose() << "] u=[" << u.transpose() << "]: " << e.what();
        throw NumericalError(msg.str());
      }
      for (int m = 1; m <= grid.M; ++m) {
        const Eigen::Index row = (s * nu + i) * grid.M + (m - 1);
        const GaussianBelief& b = chain[static_cast<std::size_t>(m - 1)];
        t.stage[row] = expected_stage_cost(b, cfg);
        const ExpectedRbfKernel kj(b, pair.j_star.width);
        for (Eigen::Index n = 0; n < centers.rows(); ++n) t.delta_j(row, n) = kj(centers.row(n).transpose());
        if (need_c) {
          const ExpectedRbfKernel kc(b, pair.pi_com_raw.width);
          for (Eigen::Index n = 0; n < centers.rows(); ++n) t.delta_c(row, n) = kc(centers.row(n).transpose());
        }
      }
    }
  }
  return t;
}

}  // namespace

ViResult value_iteration(const MultiGpModel& model, const RepresentativeGrid& grid, const CostConfig& cfg,
                         const ViOptions& opts, const PolicyPair& pair_init) {
  cfg.validate();
  pair_init.check();
  if (grid.M != cfg.M || pair_init.M != cfg.M) throw ArgumentError("grid, policy and cost M must agree");
  if (opts.n_ite < 0) throw ArgumentError("n_ite must be non-negative");
  if (pair_init.j_star.centers.rows() != grid.num_states() || pair_init.j_star.centers != grid.states)
    throw ArgumentError("policy centers must be the representative states");
  grid.validate(pair_init.input_lower, pair_init.input_upper);

  ViResult res;
  res.pair = pair_init;
  const Eigen::Index ns = grid.num_states();
  const Eigen::Index nu = grid.num_inputs();
  const Eigen::Index nin = grid.inputs.cols();
  res.d_star = Eigen::VectorXd::Zero(ns);
  res.u_star = Eigen::MatrixXd::Zero(ns, nin);
  res.m_star = Eigen::VectorXi::Ones(ns);
  if (opts.n_ite == 0) return res;

  const BackupTable table = build_table(model, grid, cfg, pair_init);
  const Eigen::MatrixXd& delta_c = (table.shared || cfg.gamma == 0.0) ? table.delta_j : table.delta_c;

  Eigen::VectorXd prev(ns);
  for (Eigen::Index s = 0; s < ns; ++s) prev[s] = rbf_eval(pair_init.j_star, grid.states.row(s).transpose());

  Eigen::VectorXd input_norms(nu);
  for (Eigen::Index i = 0; i < nu; ++i) input_norms[i] = grid.inputs.row(i).norm();

  std::vector<BackupCandidate> cands(static_cast<std::size_t>(nu * grid.M));
  for (int sweep = 0; sweep < opts.n_ite; ++sweep) {
    Eigen::VectorXd values = table.stage + opts.discount * (table.delta_j * res.pair.j_star.weights);
    if (cfg.gamma != 0.0)
      values += cfg.gamma * (static_cast<double>(cfg.M) - (delta_c * res.pair.pi_com_raw.weights).array()).matrix();

    for (Eigen::Index s = 0; s < ns; ++s) {
      for (Eigen::Index i = 0; i < nu; ++i)
        for (int m = 1; m <= grid.M; ++m) {
          const Eigen::Index row = (s * nu + i) * grid.M + (m - 1);
          if (!std::isfinite(values[row])) {
            std::ostringstream msg;
            msg << "non-finite backup at x=[" << grid.states.row(s) << "] u=[" << grid.inputs.row(i) << "] m=" << m;
            throw NumericalError(msg.str());
          }
          cands[static_cast<std::size_t>(i * grid.M + (m - 1))] = {values[row], i, m, input_norms[i]};
        }
      const auto& win = cands[select_argmin(cands, opts.tie_tolerance)];
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : cands) best = std::min(best, c.value);
      res.d_star[s] = best;
      res.u_star.row(s) = grid.inputs.row(win.input_index);
      res.m_star[s] = win.m;
    }

    const double change = (res.d_star - prev).cwiseAbs().maxCoeff();
    res.sweeps.push_back({change});
    prev = res.d_star;

    PolicyPair next = res.pair;
    next.j_star.weights = fit_rbf_weights(grid.states, res.d_star, next.j_star.width, opts.ridge, opts.ridge_max);
    for (Eigen::Index d = 0; d < nin; ++d) {
      auto& a = next.pi_inp[static_cast<std::size_t>(d)];
      a.weights = fit_rbf_weights(grid.states, res.u_star.col(d), a.width, opts.ridge, opts.ridge_max);
    }
    next.pi_com_raw.weights = fit_rbf_weights(grid.states, res.m_star.cast<double>(), next.pi_com_raw.width,
                                              opts.ridge, opts.ridge_max);
    res.pair = std::move(next);
    if (change < opts.tolerance) break;
  }
  return res;
}

}  // namespace gpstc

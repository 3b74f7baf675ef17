// Acceptance suite. Usage: gpstc_acceptance [A1 A2 ...]; no arguments runs everything.
// Prints one PASS/FAIL line per criterion, details indented below it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gpstc/commands.hpp"
#include "gpstc/config.hpp"
#include "gpstc/costs.hpp"
#include "gpstc/gp.hpp"
#include "gpstc/propagate.hpp"
#include "gpstc/stc.hpp"
#include "gpstc/vi.hpp"
#include "support/oracles.hpp"

using namespace gpstc;

namespace {

constexpr int kSeeds[] = {1, 2, 3, 4, 5};
constexpr int kHorizon = 100;
constexpr double kConvergedBound = 0.2;
constexpr int kConvergedFrom = 80;
constexpr int kCommBudget = 45;
constexpr long kSamples = 1000000;

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------- pendulum runs

struct PendulumRun {
  int communications = 0;
  double tail_max = 0.0;  // max |x_k|_inf over k in [80, 100]
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

PendulumRun pendulum_run(int seed, int M) {
  PendulumRun out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const ExperimentConfig cfg = resolve_config(
        {{"preset", "pendulum-paper"}, {"loop.seed", std::to_string(seed)}, {"cost.M", std::to_string(M)}});
    const TrainResult r = train(cfg.train);
    const EpisodeTrace t = rollout(cfg.train.plant, r.pair, cfg.train.x_init, kHorizon, cfg.train.cost);
    out.communications = t.communications(kHorizon);
    for (int k = kConvergedFrom; k <= kHorizon; ++k)
      out.tail_max = std::max(out.tail_max, t.state_at(k).cwiseAbs().maxCoeff());
  } catch (const Error& e) {
    out.failed = true;
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::map<std::pair<int, int>, PendulumRun> g_runs;

const PendulumRun& cached_run(int seed, int M) {
  auto it = g_runs.find({seed, M});
  if (it == g_runs.end()) it = g_runs.emplace(std::make_pair(seed, M), pendulum_run(seed, M)).first;
  return it->second;
}

bool converged(const PendulumRun& r) { return !r.failed && std::isfinite(r.tail_max) && r.tail_max <= kConvergedBound; }

Verdict check_a1() {
  Verdict v;
  int ok = 0;
  for (int s : kSeeds) {
    const PendulumRun& r = cached_run(s, 10);
    if (r.failed) v.note(fmt("seed %d: error: %s", s, r.error.c_str()));
    else v.note(fmt("seed %d: max |x_k|_inf for k>=%d = %.4g (%s), %.0f s", s, kConvergedFrom, r.tail_max,
                    converged(r) ? "ok" : "not converged", r.seconds));
    ok += converged(r);
  }
  v.pass = ok >= 3;
  v.note(fmt("%d of 5 seeds converged (need 3)", ok));
  return v;
}

Verdict check_a2() {
  Verdict v;
  int m1_exact = 0, m10_ok = 0;
  for (int s : kSeeds) {
    const PendulumRun& r1 = cached_run(s, 1);
    const PendulumRun& r10 = cached_run(s, 10);
    const bool a = !r1.failed && r1.communications == kHorizon;
    const bool b = converged(r10) && r10.communications <= kCommBudget;
    m1_exact += a;
    m10_ok += b;
    v.note(fmt("seed %d: M=1 comms %s, M=10 comms %s (max tail %.4g)", s,
               r1.failed ? "error" : std::to_string(r1.communications).c_str(),
               r10.failed ? "error" : std::to_string(r10.communications).c_str(), r10.tail_max));
  }
  v.note(fmt("M=1 exactly %d: %d of 5 seeds; M=10 <= %d and converged: %d of 5 seeds (need 3, as in A1)", kHorizon,
             m1_exact, kCommBudget, m10_ok));
  v.pass = m1_exact == 5 && m10_ok >= 3;
  return v;
}

// ---------------------------------------------------------------- moment matching

// Direct evaluation of the GP predictive used for sampling.
struct FastGp {
  struct Dim {
    Eigen::MatrixXd x;
    Eigen::VectorXd inv_l2, beta;
    Eigen::MatrixXd kinv;
    double a2, noise;
  };
  std::vector<Dim> dims;

  explicit FastGp(const MultiGpModel& m) {
    for (const auto& g : m.models())
      dims.push_back({g.inputs(), g.hyper().lengthscales.array().square().inverse().matrix(), g.beta(),
                      g.gram_inverse(), g.hyper().signal_amplitude * g.hyper().signal_amplitude,
                      g.hyper().noise_variance});
  }

  // Draws y ~ p(f(z) + eps).
  Eigen::VectorXd sample(const Eigen::VectorXd& z, std::mt19937_64& rng) const {
    std::normal_distribution<double> n01;
    Eigen::VectorXd y(static_cast<Eigen::Index>(dims.size()));
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const Dim& d = dims[i];
      const Eigen::VectorXd k =
          d.a2 * (-0.5 * ((d.x.rowwise() - z.transpose()).array().square().matrix() * d.inv_l2).array()).exp().matrix();
      const double mean = k.dot(d.beta);
      const double var = std::max(0.0, d.a2 - k.dot(d.kinv * k)) + d.noise;
      y[static_cast<Eigen::Index>(i)] = mean + std::sqrt(var) * n01(rng);
    }
    return y;
  }
};

oracle::MomentEstimate mc_step(const FastGp& gp, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                               const Eigen::VectorXd& u, std::uint64_t seed, long n) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd f = oracle::sqrt_factor(cov);
  Eigen::VectorXd z(mean.size() + u.size());
  z.tail(u.size()) = u;
  return oracle::estimate_moments(mean.size(), n, [&] {
    z.head(mean.size()) = oracle::sample_gaussian(mean, f, rng);
    return gp.sample(z, rng);
  });
}

// Two further Monte-Carlo steps with a Gaussian re-fit in between, run as independent chains
// sharing kSamples per step. Moments are chain averages; standard errors are between-chain.
oracle::MomentEstimate mc_chains(const FastGp& gp, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                 const Eigen::VectorXd& u, std::uint64_t seed) {
  constexpr int kChains = 50;
  const long per = kSamples / kChains;
  const Eigen::Index n = mean.size();
  std::vector<oracle::MomentEstimate> runs;
  for (int b = 0; b < kChains; ++b) {
    const std::uint64_t s = seed * 1000 + static_cast<std::uint64_t>(2 * b);
    const oracle::MomentEstimate mid = mc_step(gp, mean, cov, u, s, per);
    runs.push_back(mc_step(gp, mid.mean, 0.5 * (mid.cov + mid.cov.transpose()), u, s + 1, per));
  }
  oracle::MomentEstimate out{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n),
                             Eigen::MatrixXd::Zero(n, n)};
  for (const auto& r : runs) {
    out.mean += r.mean / kChains;
    out.cov += r.cov / kChains;
  }
  for (const auto& r : runs) {
    out.mean_se += (r.mean - out.mean).cwiseAbs2();
    out.cov_se += (r.cov - out.cov).cwiseAbs2();
  }
  const double scale = 1.0 / (kChains * (kChains - 1.0));
  out.mean_se = (out.mean_se * scale).cwiseSqrt();
  out.cov_se = (out.cov_se * scale).cwiseSqrt();
  return out;
}

struct Instance {
  MultiGpModel model;
  GaussianBelief belief;
  Eigen::VectorXd u;
};

Instance random_instance(Eigen::Index nx, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
  const Eigen::Index nu = 1;
  const int n = 8 + static_cast<int>(U(rng) * 8);
  Dataset d(nx, nu);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(nx), u(nu), y(nx);
    for (Eigen::Index j = 0; j < nx; ++j) x[j] = uni(-2, 2);
    u[0] = uni(-1, 1);
    for (Eigen::Index j = 0; j < nx; ++j) y[j] = std::sin(x[j] + 0.3 * j) + 0.5 * u[0] + (nx > 1 ? 0.3 * x[nx - 1 - j] : 0.0);
    d.append(x, u, y);
  }
  std::vector<Hyperparams> hs;
  for (Eigen::Index j = 0; j < nx; ++j) {
    Hyperparams h;
    h.signal_amplitude = uni(0.5, 2.0);
    h.lengthscales.resize(nx + nu);
    for (Eigen::Index k = 0; k < nx + nu; ++k) h.lengthscales[k] = uni(0.5, 2.0);
    h.noise_variance = std::pow(10.0, uni(-4, -2));
    hs.push_back(h);
  }
  Eigen::VectorXd mu(nx);
  for (Eigen::Index j = 0; j < nx; ++j) mu[j] = uni(-1.5, 1.5);
  Eigen::MatrixXd a(nx, nx);
  for (Eigen::Index j = 0; j < a.size(); ++j) a.data()[j] = uni(-0.5, 0.5);
  Eigen::MatrixXd cov = a * a.transpose();
  cov.diagonal().array() += uni(0.01, 0.2);
  return {fit(d, hs), GaussianBelief(mu, cov), Eigen::VectorXd::Constant(1, uni(-1, 1))};
}

// Largest |analytic - MC| / SE over all mean and covariance entries.
double worst_z(const GaussianBelief& b, const oracle::MomentEstimate& e) {
  double z = 0.0;
  for (Eigen::Index i = 0; i < b.dim(); ++i) {
    z = std::max(z, std::abs(b.mean()[i] - e.mean[i]) / e.mean_se[i]);
    for (Eigen::Index j = 0; j <= i; ++j) z = std::max(z, std::abs(b.cov()(i, j) - e.cov(i, j)) / e.cov_se(i, j));
  }
  return z;
}

Verdict check_a3() {
  Verdict v;
  std::mt19937_64 rng(20240303);
  std::uint64_t seed = 1;
  int bad1 = 0, bad_m = 0, count = 0;
  double zmax1 = 0.0, zmax_m = 0.0;
  for (Eigen::Index nx : {1, 2}) {
    const int n_inst = nx == 1 ? 50 : 20;
    for (int i = 0; i < n_inst; ++i, ++count) {
      const Instance inst = random_instance(nx, rng);
      const FastGp fast(inst.model);

      const GaussianBelief one = propagate_one_step(inst.model, inst.belief, inst.u);
      const double z1 = worst_z(one, mc_step(fast, inst.belief.mean(), inst.belief.cov(), inst.u, seed++, kSamples));
      zmax1 = std::max(zmax1, z1);
      if (z1 > 3.0) {
        ++bad1;
        v.note(fmt("%ld-D instance %d: one-step deviation %.2f SE", static_cast<long>(nx), i, z1));
      }

      // m-step from a point state. Step 1 is exactly the GP predictive, so m = 2 is a single
      // Monte-Carlo step. For m = 3 the intermediate Gaussian is itself estimated; the standard
      // error comes from the spread of independent chains so that it includes that noise.
      const Eigen::VectorXd x0 = inst.belief.mean();
      const auto steps = propagate_m_steps(inst.model, x0, inst.u, 3);
      const GaussianBelief p = inst.model.predict(x0, inst.u);
      Eigen::MatrixXd c1 = p.cov();
      for (Eigen::Index j = 0; j < nx; ++j) c1(j, j) += inst.model.model(j).hyper().noise_variance;

      const double z2 = worst_z(steps[1], mc_step(fast, p.mean(), c1, inst.u, seed++, kSamples));
      const oracle::MomentEstimate e3 = mc_chains(fast, p.mean(), c1, inst.u, seed++);
      const double z3 = worst_z(steps[2], e3);
      for (const auto& [m, z] : {std::pair{2, z2}, std::pair{3, z3}}) {
        zmax_m = std::max(zmax_m, z);
        if (z > 4.0) {
          ++bad_m;
          v.note(fmt("%ld-D instance %d: m=%d deviation %.2f SE", static_cast<long>(nx), i, m, z));
        }
      }
    }
  }
  v.note(fmt("%d instances, %ld samples per step; worst one-step %.2f SE (limit 3), worst m-step %.2f SE (limit 4)", count,
             kSamples, zmax1, zmax_m));
  v.pass = bad1 == 0 && bad_m == 0;
  return v;
}

// ---------------------------------------------------------------- analytic integrals

Verdict check_a5() {
  Verdict v;
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
  double zmax[3] = {0, 0, 0}, point_err = 0.0;
  int bad = 0;
  const char* names[3] = {"expected_exp_stage_cost", "expected_quad_stage_cost", "expected_rbf"};
  for (int inst = 0; inst < 100; ++inst) {
    const Eigen::Index n = 1 + inst % 2;
    Eigen::VectorXd mu(n), c(n);
    Eigen::MatrixXd a(n, n), qa(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      mu[j] = uni(-2, 2);
      c[j] = uni(-1.5, 1.5);
    }
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      a.data()[j] = uni(-0.8, 0.8);
      qa.data()[j] = uni(-1, 1);
    }
    Eigen::MatrixXd sigma = a * a.transpose();
    sigma.diagonal().array() += uni(0.001, 0.1);
    Eigen::MatrixXd Q = qa * qa.transpose();
    Q.diagonal().array() += uni(0.1, 1.0);
    const double w = uni(0.2, 1.5);
    CostConfig ce, cq;
    ce.Q = cq.Q = Q;
    cq.stage_kind = StageCostKind::Quadratic;
    const GaussianBelief b(mu, sigma);

    const double analytic[3] = {expected_exp_stage_cost(b, ce), expected_quad_stage_cost(b, cq), expected_rbf(b, c, w)};
    std::mt19937_64 srng(1000 + static_cast<std::uint64_t>(inst));
    const Eigen::MatrixXd f = oracle::sqrt_factor(sigma);
    double s[3] = {0, 0, 0}, s2[3] = {0, 0, 0};
    for (long k = 0; k < kSamples; ++k) {
      const Eigen::VectorXd x = oracle::sample_gaussian(mu, f, srng);
      const double q = x.dot(Q * x);
      const double vals[3] = {1.0 - std::exp(-0.5 * q), q, std::exp(-(x - c).squaredNorm() / (2 * w * w))};
      for (int r = 0; r < 3; ++r) {
        s[r] += vals[r];
        s2[r] += vals[r] * vals[r];
      }
    }
    for (int r = 0; r < 3; ++r) {
      const double mean = s[r] / kSamples;
      const double se = std::sqrt(std::max(0.0, s2[r] / kSamples - mean * mean) / kSamples);
      const double z = std::abs(analytic[r] - mean) / se;
      zmax[r] = std::max(zmax[r], z);
      if (z > 3.0) {
        ++bad;
        v.note(fmt("instance %d (%ld-D): %s off by %.2f SE", inst, static_cast<long>(n), names[r], z));
      }
    }

    const GaussianBelief pt = GaussianBelief::point(mu);
    const double q = mu.dot(Q * mu);
    point_err = std::max({point_err, std::abs(expected_exp_stage_cost(pt, ce) - (1.0 - std::exp(-0.5 * q))),
                          std::abs(expected_quad_stage_cost(pt, cq) - q),
                          std::abs(expected_rbf(pt, c, w) - std::exp(-(mu - c).squaredNorm() / (2 * w * w)))});
  }
  v.note(fmt("worst deviation: exp %.2f SE, quad %.2f SE, rbf %.2f SE (limit 3)", zmax[0], zmax[1], zmax[2]));
  v.note(fmt("point-belief reduction error %.3g (limit 1e-12)", point_err));
  v.pass = bad == 0 && point_err <= 1e-12;
  return v;
}

// ---------------------------------------------------------------- value iteration

Verdict check_a6() {
  Verdict v;
  const double a = 0.5, b = 1.0;
  const double u_lim = 1.0;
  Dataset d(1, 1);
  for (double x = -3.0; x <= 3.0 + 1e-9; x += 0.5)
    for (double u = -u_lim; u <= u_lim + 1e-9; u += 0.2)
      d.append(Eigen::VectorXd::Constant(1, x), Eigen::VectorXd::Constant(1, u), Eigen::VectorXd::Constant(1, a * x + b * u));
  Hyperparams h;
  h.signal_amplitude = 2.0;
  h.lengthscales = Eigen::VectorXd::Constant(2, 2.0);
  h.noise_variance = 4e-6;
  const MultiGpModel model = fit(d, {h});

  const int M = 3;
  const auto grid = RepresentativeGrid::regular(Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 2.0),
                                                0.5, Eigen::VectorXd::Constant(1, -u_lim),
                                                Eigen::VectorXd::Constant(1, u_lim), 0.2, M);
  CostConfig cost;
  cost.Q = Eigen::MatrixXd::Identity(1, 1);
  cost.gamma = 0.0;
  cost.M = M;
  ViOptions opts;
  opts.n_ite = 40;
  opts.discount = 0.9;
  opts.tolerance = 1e-4;
  const PolicyPair init = PolicyPair::zeros(grid.states, opts.width_factor * grid.state_spacing, M,
                                            Eigen::VectorXd::Constant(1, -u_lim), Eigen::VectorXd::Constant(1, u_lim));
  const ViResult r = value_iteration(model, grid, cost, opts, init);
  const double last_change = r.sweeps.empty() ? INFINITY : r.sweeps.back().sup_change;
  const bool converged = last_change < 1e-4;
  v.note(fmt("%zu sweeps, final sup-norm change %.3g (limit 1e-4 within 40)", r.sweeps.size(), last_change));

  std::vector<double> xs, us;
  for (Eigen::Index i = 0; i < grid.num_states(); ++i) xs.push_back(grid.states(i, 0));
  for (Eigen::Index i = 0; i < grid.num_inputs(); ++i) us.push_back(grid.inputs(i, 0));
  const auto dp = oracle::scalar_dp([&](double x, double u) { return a * x + b * u; }, xs, us, M, 0.0, 0.9, 30,
                                    [](double x) { return 1.0 - std::exp(-0.5 * x * x); }, 1e-6);
  int match = 0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const auto i = static_cast<Eigen::Index>(s);
    const bool same = std::abs(r.u_star(i, 0) - dp.u[s]) < 1e-9 && r.m_star[i] == dp.m[s];
    match += same;
    v.note(fmt("x=%+.2f  VI (u=%+.2f, m=%d)  DP (u=%+.2f, m=%d)%s", xs[s], r.u_star(i, 0), r.m_star[i], dp.u[s],
               dp.m[s], same ? "" : "  mismatch"));
  }
  const double frac = static_cast<double>(match) / static_cast<double>(xs.size());
  v.note(fmt("%d of %zu grid states agree (%.0f%%, need 90%%)", match, xs.size(), 100 * frac));
  v.pass = converged && frac >= 0.9;
  return v;
}

// ---------------------------------------------------------------- GP

Verdict check_a7() {
  Verdict v;
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * U(rng); };
  double interp_err = 0.0, var_excess = -INFINITY, beta_err = 0.0, lml_err = 0.0;
  int probes = 0;
  for (int inst = 0; inst < 60; ++inst) {
    const Eigen::Index dim = 1 + inst % 3;
    const int n = 1 + inst % 20;
    Hyperparams h;
    h.signal_amplitude = uni(0.5, 2.0);
    h.lengthscales.resize(dim);
    for (Eigen::Index j = 0; j < dim; ++j) h.lengthscales[j] = uni(0.3, 1.0);
    h.noise_variance = std::pow(10.0, uni(-4, -1));
    // Inputs at least ~1.1 apart along the first axis (lengthscales are at most 1), with the
    // other axes a permutation of the same lattice.
    Eigen::MatrixXd x(n, dim);
    for (int i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < dim; ++j)
        x(i, j) = 1.2 * ((i * (2 * j + 1)) % n - 0.5 * n) + uni(-0.05, 0.05);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = std::sin(x.row(i).sum()) + uni(-0.1, 0.1);

    const GpModel g(x, y, h);
    beta_err = std::max(beta_err, (g.beta() - oracle::beta(x, y, h)).cwiseAbs().maxCoeff());
    lml_err = std::max(lml_err, std::abs(g.log_marginal_likelihood() - oracle::log_marginal_likelihood(x, y, h)));

    Hyperparams hi = h;
    hi.noise_variance = 1e-10;
    const GpModel gi(x, y, hi);
    for (int i = 0; i < n; ++i) interp_err = std::max(interp_err, std::abs(gi.predict(x.row(i).transpose()).first - y[i]));

    for (int p = 0; p < 50; ++p, ++probes) {
      Eigen::VectorXd z(dim);
      for (Eigen::Index j = 0; j < dim; ++j) z[j] = uni(-5, 5);
      const double a2 = h.signal_amplitude * h.signal_amplitude;
      var_excess = std::max({var_excess, g.predict(z).second - a2, gi.predict(z).second - a2});
    }
  }
  v.note(fmt("interpolation error %.3g (limit 1e-4)", interp_err));
  v.note(fmt("largest posterior minus prior variance over %d probes: %.3g (limit 0)", probes, var_excess));
  v.note(fmt("beta error %.3g, log marginal likelihood error %.3g (limit 1e-8)", beta_err, lml_err));
  v.pass = interp_err <= 1e-4 && var_excess <= 0.0 && beta_err <= 1e-8 && lml_err <= 1e-8;
  return v;
}

// ---------------------------------------------------------------- A4

Verdict check_a4() {
  Verdict v;
  const auto out = std::filesystem::temp_directory_path() / "gpstc_acceptance_sweep";
  std::filesystem::remove_all(out);
  const ExperimentConfig cfg = resolve_config({{"preset", "pendulum-paper"}, {"loop.seed", "1"}, {"out", out.string()}});
  std::vector<SweepRow> rows;
  try {
    rows = cmd_sweep_gamma(cfg, {0.0, 0.01, 0.03});
  } catch (const Error& e) {
    v.pass = false;
    v.note(std::string("error: ") + e.what());
    return v;
  }
  for (const auto& r : rows)
    v.note(fmt("gamma=%.2f  mean m=%.3f  comms=%d  final norm=%.3g", r.gamma, r.mean_m, r.comm_count, r.final_norm));
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) monotone &= rows[i].mean_m >= rows[i - 1].mean_m;
  const bool strict = rows.back().mean_m > rows.front().mean_m;
  v.note(fmt("non-decreasing: %s, gamma=0.03 above gamma=0: %s", monotone ? "yes" : "no", strict ? "yes" : "no"));
  v.pass = monotone && strict;
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> all{
      {"A1", check_a1}, {"A2", check_a2}, {"A3", check_a3}, {"A4", check_a4},
      {"A5", check_a5}, {"A6", check_a6}, {"A7", check_a7}};
  std::set<std::string> want(argv + 1, argv + argc);
  for (const auto& w : want)
    if (std::none_of(all.begin(), all.end(), [&](const auto& c) { return c.first == w; })) {
      std::fprintf(stderr, "unknown criterion %s\n", w.c_str());
      return 2;
    }
  int failures = 0;
  for (const auto& [name, fn] : all) {
    if (!want.empty() && !want.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.pass = false;
      v.note(std::string("unexpected error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s (%.0f s)\n", name.c_str(), v.pass ? "PASS" : "FAIL", secs);
    for (const auto& n : v.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}

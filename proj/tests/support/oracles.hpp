#pragma once

// Reference implementations used by the test suites. They avoid the library's own
// factorizations and closed forms: dense LU solves, Monte-Carlo sampling and
// exhaustive dynamic programming on the true plant.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gpstc/belief.hpp"
#include "gpstc/costs.hpp"
#include "gpstc/gp.hpp"

namespace oracle {

inline double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const gpstc::Hyperparams& h) {
  double q = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const double d = (a[j] - b[j]) / h.lengthscales[j];
    q += d * d;
  }
  return h.signal_amplitude * h.signal_amplitude * std::exp(-0.5 * q);
}

// K + sigma^2 I built entry by entry.
inline Eigen::MatrixXd gram(const Eigen::MatrixXd& x, const gpstc::Hyperparams& h) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index p = 0; p < n; ++p)
    for (Eigen::Index q = 0; q < n; ++q) k(p, q) = kernel(x.row(p).transpose(), x.row(q).transpose(), h);
  k.diagonal().array() += h.noise_variance;
  return k;
}

inline Eigen::VectorXd beta(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const gpstc::Hyperparams& h) {
  return gram(x, h).fullPivLu().solve(y);
}

// log N(y; 0, K + sigma^2 I) from a dense LU determinant.
inline double log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const gpstc::Hyperparams& h) {
  const Eigen::MatrixXd k = gram(x, h);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  const double logdet = std::log(lu.determinant());
  const double n = static_cast<double>(y.size());
  return -0.5 * y.dot(lu.solve(y)) - 0.5 * logdet - 0.5 * n * std::log(2.0 * M_PI);
}

// Posterior mean and latent variance at `at`.
inline std::pair<double, double> predict(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         const gpstc::Hyperparams& h, const Eigen::VectorXd& at) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(gram(x, h));
  Eigen::VectorXd ks(x.rows());
  for (Eigen::Index p = 0; p < x.rows(); ++p) ks[p] = kernel(x.row(p).transpose(), at, h);
  return {ks.dot(lu.solve(y)), kernel(at, at, h) - ks.dot(lu.solve(ks))};
}

// Sample mean and covariance with standard errors for every entry.
struct MomentEstimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd cov_se;
};

// Two-pass estimator over samples drawn by `draw`.
inline MomentEstimate estimate_moments(Eigen::Index dim, long n,
                                       const std::function<Eigen::VectorXd()>& draw) {
  std::vector<Eigen::VectorXd> s;
  s.reserve(static_cast<std::size_t>(n));
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (long i = 0; i < n; ++i) {
    s.push_back(draw());
    mean += s.back();
  }
  mean /= static_cast<double>(n);
  Eigen::MatrixXd c1 = Eigen::MatrixXd::Zero(dim, dim), c2 = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& v : s) {
    const Eigen::VectorXd d = v - mean;
    const Eigen::MatrixXd p = d * d.transpose();
    c1 += p;
    c2 += p.cwiseProduct(p);
  }
  const double dn = static_cast<double>(n);
  MomentEstimate out;
  out.mean = mean;
  out.cov = c1 / (dn - 1.0);
  out.mean_se = (out.cov.diagonal() / dn).cwiseSqrt();
  const Eigen::MatrixXd var_prod = (c2 / dn - (c1 / dn).cwiseProduct(c1 / dn)).cwiseMax(0.0);
  out.cov_se = (var_prod / dn).cwiseSqrt();
  return out;
}

// Standard error of a scalar sample mean, returned with the mean.
struct ScalarEstimate {
  double mean;
  double se;
};

inline ScalarEstimate estimate_mean(long n, const std::function<double()>& draw) {
  double s = 0.0, s2 = 0.0;
  for (long i = 0; i < n; ++i) {
    const double v = draw();
    s += v;
    s2 += v * v;
  }
  const double dn = static_cast<double>(n);
  const double m = s / dn;
  return {m, std::sqrt(std::max(0.0, s2 / dn - m * m) / dn)};
}

inline Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                                       std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = n01(rng);
  return mean + chol_lower * z;
}

inline Eigen::MatrixXd sqrt_factor(const Eigen::MatrixXd& cov) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

// One step of "sample x from the belief, then sample the GP output" using only predict.
inline MomentEstimate mc_one_step(const gpstc::MultiGpModel& model, const gpstc::GaussianBelief& b,
                                  const Eigen::VectorXd& u, long n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  const Eigen::MatrixXd f = sqrt_factor(b.cov());
  const Eigen::Index nx = model.state_dim();
  return estimate_moments(nx, n, [&] {
    const Eigen::VectorXd x = sample_gaussian(b.mean(), f, rng);
    const gpstc::GaussianBelief p = model.predict(x, u);
    Eigen::VectorXd y(nx);
    for (Eigen::Index i = 0; i < nx; ++i)
      y[i] = p.mean()[i] + std::sqrt(p.cov()(i, i) + model.model(i).hyper().noise_variance) * n01(rng);
    return y;
  });
}

// Iterated Monte-Carlo moment matching from a point state: each step re-fits a Gaussian
// to the sampled moments before the next step. Returns the estimate after step m.
inline MomentEstimate mc_m_steps(const gpstc::MultiGpModel& model, const Eigen::VectorXd& x0,
                                 const Eigen::VectorXd& u, int m, long n, std::uint64_t seed) {
  gpstc::GaussianBelief b = gpstc::GaussianBelief::point(x0);
  MomentEstimate est;
  for (int l = 0; l < m; ++l) {
    est = mc_one_step(model, b, u, n, seed + static_cast<std::uint64_t>(l));
    b = gpstc::GaussianBelief(est.mean, est.cov);
  }
  return est;
}

// Exhaustive finite-horizon DP on a scalar deterministic plant over a state grid, with
// the cost sampled at communication instants. Values between grid points are linearly
// interpolated (held constant beyond the ends).
struct DpResult {
  std::vector<double> value;
  std::vector<double> u;
  std::vector<int> m;
};

inline double interp(const std::vector<double>& grid, const std::vector<double>& v, double x) {
  if (x <= grid.front()) return v.front();
  if (x >= grid.back()) return v.back();
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (x <= grid[i + 1]) {
      const double t = (x - grid[i]) / (grid[i + 1] - grid[i]);
      return (1.0 - t) * v[i] + t * v[i + 1];
    }
  return v.back();
}

inline DpResult scalar_dp(const std::function<double(double, double)>& plant, const std::vector<double>& states,
                          const std::vector<double>& inputs, int M, double gamma, double discount, int horizon,
                          const std::function<double(double)>& stage, double tie_tol) {
  std::vector<double> j(states.size(), 0.0);
  DpResult res;
  for (int t = 0; t < horizon; ++t) {
    DpResult cur{std::vector<double>(states.size()), std::vector<double>(states.size()),
                 std::vector<int>(states.size())};
    for (std::size_t s = 0; s < states.size(); ++s) {
      struct Cand {
        double d, u;
        int m;
      };
      std::vector<Cand> cands;
      double best = std::numeric_limits<double>::infinity();
      for (double u : inputs) {
        double x = states[s];
        for (int m = 1; m <= M; ++m) {
          x = plant(x, u);
          const double d = stage(x) + gamma * (M - m) + discount * interp(states, j, x);
          cands.push_back({d, u, m});
          best = std::min(best, d);
        }
      }
      // Ties: larger m, then smaller |u|, then scan order.
      const Cand* win = nullptr;
      for (const auto& c : cands) {
        if (c.d > best + tie_tol) continue;
        if (!win || c.m > win->m || (c.m == win->m && std::abs(c.u) < std::abs(win->u))) win = &c;
      }
      cur.value[s] = best;
      cur.u[s] = win->u;
      cur.m[s] = win->m;
    }
    j = cur.value;
    res = cur;
  }
  return res;
}

}  // namespace oracle

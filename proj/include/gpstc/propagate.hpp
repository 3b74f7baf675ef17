#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gpstc/belief.hpp"
#include "gpstc/gp.hpp"

namespace gpstc {

/// Joint belief over [x; u] with a deterministic input: mean [mu; u],
/// covariance Blkdiag(Sigma, 0).
struct AugmentedBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  AugmentedBelief(const GaussianBelief& state, const Eigen::VectorXd& u);
};

/// eta_n = E_{x~N(mean,cov)}[k(x, x_n)] for every training input x_n of `model`.
Eigen::VectorXd eta_vector(const GpModel& model, const AugmentedBelief& ab);

/// Exact first and second moments of f(x, u) for x ~ belief, returned as a Gaussian.
/// Noise variance is added to each diagonal entry.
GaussianBelief propagate_one_step(const MultiGpModel& model, const GaussianBelief& belief,
                                  const Eigen::VectorXd& u);

/// Beliefs after 1..m steps of holding `u` from the point state `x0`.
std::vector<GaussianBelief> propagate_m_steps(const MultiGpModel& model, const Eigen::VectorXd& x0,
                                              const Eigen::VectorXd& u, int m);

}  // namespace gpstc

#pragma once

#include <Eigen/Dense>

namespace gpstc {

/// Gaussian state distribution N(mean, cov).
///
/// Construction symmetrizes the covariance and clamps small negative eigenvalues
/// to zero. A negative eigenvalue below -kPsdTolerance * max(1, max|cov|) is
/// treated as a formula bug and raises NumericalError.
class GaussianBelief {
 public:
  static constexpr double kPsdTolerance = 1e-8;

  GaussianBelief() = default;
  GaussianBelief(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  /// Point mass at `mean`.
  static GaussianBelief point(Eigen::VectorXd mean);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  Eigen::Index dim() const { return mean_.size(); }
  bool is_point() const { return cov_.isZero(0.0); }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
};

}  // namespace gpstc

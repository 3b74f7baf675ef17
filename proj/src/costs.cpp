#include "gpstc/costs.hpp"

#include <cmath>
#include <string>

#include "gpstc/errors.hpp"

namespace gpstc {

void CostConfig::validate() const {
  if (Q.rows() == 0 || Q.rows() != Q.cols()) throw ArgumentError("cost Q must be a non-empty square matrix");
  if (!Q.isApprox(Q.transpose(), 1e-12)) throw ArgumentError("cost Q must be symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(Q).info() != Eigen::Success)
    throw ArgumentError("cost Q must be positive definite");
  if (!(gamma >= 0.0)) throw ArgumentError("gamma must be non-negative");
  if (M < 1) throw ArgumentError("M must be at least 1");
}

namespace {

void check_state(Eigen::Index n, const CostConfig& cfg) {
  if (n != cfg.Q.rows())
    throw ShapeError("state of dimension " + std::to_string(n) + " against Q of size " +
                     std::to_string(cfg.Q.rows()));
}

}  // namespace

double stage_cost(const Eigen::VectorXd& x, const CostConfig& cfg) {
  check_state(x.size(), cfg);
  const double q = x.dot(cfg.Q * x);
  return cfg.stage_kind == StageCostKind::Exponential ? -std::expm1(-0.5 * q) : q;
}

double comm_cost(int m, const CostConfig& cfg) {
  if (m < 1 || m > cfg.M)
    throw ArgumentError("inter-communication steps " + std::to_string(m) + " outside 1.." + std::to_string(cfg.M));
  return static_cast<double>(cfg.M - m);
}

double expected_exp_stage_cost(const GaussianBelief& b, const CostConfig& cfg) {
  check_state(b.dim(), cfg);
  if (b.is_point()) return stage_cost(b.mean(), cfg);
  const Eigen::Index n = b.dim();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) + b.cov() * cfg.Q;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::VectorXd& mu = b.mean();
  // Q (I + Sigma Q)^{-1} is symmetric; evaluate it as Q * solve.
  const double quad = mu.dot(cfg.Q * lu.solve(mu));
  const double delta = std::exp(-0.5 * quad) / std::sqrt(lu.determinant());
  return 1.0 - delta;
}

double expected_quad_stage_cost(const GaussianBelief& b, const CostConfig& cfg) {
  check_state(b.dim(), cfg);
  return (cfg.Q * b.cov()).trace() + b.mean().dot(cfg.Q * b.mean());
}

double expected_stage_cost(const GaussianBelief& b, const CostConfig& cfg) {
  return cfg.stage_kind == StageCostKind::Exponential ? expected_exp_stage_cost(b, cfg)
                                                      : expected_quad_stage_cost(b, cfg);
}

ExpectedRbfKernel::ExpectedRbfKernel(const GaussianBelief& b, double width) : mean_(b.mean()) {
  if (!(width > 0.0)) throw ArgumentError("RBF width must be positive");
  const double w2 = width * width;
  const Eigen::Index n = b.dim();
  if (b.is_point()) {
    inv_ = Eigen::MatrixXd::Identity(n, n) / w2;
    scale_ = 1.0;
    return;
  }
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) + b.cov() / w2;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("I + Sigma/w^2 is not positive definite");
  inv_ = llt.solve(Eigen::MatrixXd::Identity(n, n)) / w2;
  const double log_det = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  scale_ = std::exp(-0.5 * log_det);
}

double ExpectedRbfKernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& center) const {
  if (center.size() != mean_.size()) throw ShapeError("RBF center dimension does not match the belief");
  const Eigen::VectorXd d = mean_ - center;
  return scale_ * std::exp(-0.5 * d.dot(inv_ * d));
}

double expected_rbf(const GaussianBelief& b, const Eigen::VectorXd& center, double width) {
  return ExpectedRbfKernel(b, width)(center);
}

}  // namespace gpstc

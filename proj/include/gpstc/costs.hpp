#pragma once

#include <Eigen/Dense>

#include "gpstc/belief.hpp"

namespace gpstc {

enum class StageCostKind { Exponential, Quadratic };

struct CostConfig {
  StageCostKind stage_kind = StageCostKind::Exponential;
  Eigen::MatrixXd Q;   // state weight, symmetric positive definite
  double gamma = 0.0;  // communication cost weight
  int M = 1;           // maximum inter-communication steps

  /// Throws ArgumentError on a non-SPD Q, negative gamma or M < 1.
  void validate() const;
};

/// C1(x): 1 - exp(-x'Qx/2) or x'Qx.
double stage_cost(const Eigen::VectorXd& x, const CostConfig& cfg);

/// C2(m) = M - m for m in 1..M.
double comm_cost(int m, const CostConfig& cfg);

/// E[1 - exp(-x'Qx/2)] for x ~ b.
double expected_exp_stage_cost(const GaussianBelief& b, const CostConfig& cfg);

/// E[x'Qx] = tr(Q Sigma) + mu'Q mu.
double expected_quad_stage_cost(const GaussianBelief& b, const CostConfig& cfg);

/// Dispatches on cfg.stage_kind.
double expected_stage_cost(const GaussianBelief& b, const CostConfig& cfg);

/// E[exp(-|x-c|^2 / (2 width^2))] for x ~ b.
double expected_rbf(const GaussianBelief& b, const Eigen::VectorXd& center, double width);

/// Precomputed form of expected_rbf for one belief against many centers.
class ExpectedRbfKernel {
 public:
  ExpectedRbfKernel(const GaussianBelief& b, double width);
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& center) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd inv_;  // (I + Sigma / w^2)^{-1} / w^2
  double scale_;         // |I + Sigma / w^2|^{-1/2}
};

}  // namespace gpstc

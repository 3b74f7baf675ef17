#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace gpstc {

/// Ground-truth discrete-time plant x_{k+1} = f(x_k, u_k) with a box of admissible inputs.
/// The origin is an equilibrium: f(0, 0) = 0.
struct PlantSpec {
  using StepFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

  std::string name;
  Eigen::Index state_dim = 0;
  Eigen::Index input_dim = 0;
  Eigen::VectorXd input_lower;
  Eigen::VectorXd input_upper;
  StepFn step;

  /// Applies one plant step after checking dimensions.
  Eigen::VectorXd operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

/// [x1 + dt x2; x2 + dt (sin x1 - x2 + u)]
Eigen::Vector2d pendulum_step(const Eigen::Vector2d& x, double u, double dt);

/// Componentwise projection of u onto [lower, upper].
Eigen::VectorXd clamp_input(const Eigen::VectorXd& u, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);
Eigen::VectorXd clamp_input(const Eigen::VectorXd& u, const PlantSpec& spec);

PlantSpec make_pendulum(double dt = 0.2, double u_max = 1.5);

/// Scalar x' = a x + b u with u in [u_min, u_max].
PlantSpec make_linear(double a = 0.5, double b = 1.0, double u_min = -1.0, double u_max = 1.0);

}  // namespace gpstc

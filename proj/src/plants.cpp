#include "gpstc/plants.hpp"

#include <cmath>

#include "gpstc/errors.hpp"

namespace gpstc {

Eigen::VectorXd PlantSpec::operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  if (x.size() != state_dim || u.size() != input_dim)
    throw ShapeError("plant '" + name + "' called with wrong state/input dimension");
  Eigen::VectorXd next = step(x, u);
  if (!next.allFinite()) throw NumericalError("plant '" + name + "' produced a non-finite state");
  return next;
}

Eigen::Vector2d pendulum_step(const Eigen::Vector2d& x, double u, double dt) {
  return {x[0] + dt * x[1], x[1] + dt * (std::sin(x[0]) - x[1] + u)};
}

Eigen::VectorXd clamp_input(const Eigen::VectorXd& u, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (u.size() != lower.size() || u.size() != upper.size()) throw ShapeError("clamp_input: dimension mismatch");
  return u.cwiseMax(lower).cwiseMin(upper);
}

Eigen::VectorXd clamp_input(const Eigen::VectorXd& u, const PlantSpec& spec) {
  return clamp_input(u, spec.input_lower, spec.input_upper);
}

PlantSpec make_pendulum(double dt, double u_max) {
  if (!(dt > 0.0)) throw ArgumentError("pendulum time step must be positive");
  PlantSpec p;
  p.name = "pendulum";
  p.state_dim = 2;
  p.input_dim = 1;
  p.input_lower = Eigen::VectorXd::Constant(1, -u_max);
  p.input_upper = Eigen::VectorXd::Constant(1, u_max);
  p.step = [dt](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return pendulum_step(Eigen::Vector2d(x[0], x[1]), u[0], dt);
  };
  return p;
}

PlantSpec make_linear(double a, double b, double u_min, double u_max) {
  PlantSpec p;
  p.name = "linear";
  p.state_dim = 1;
  p.input_dim = 1;
  p.input_lower = Eigen::VectorXd::Constant(1, u_min);
  p.input_upper = Eigen::VectorXd::Constant(1, u_max);
  p.step = [a, b](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(1, a * x[0] + b * u[0]);
  };
  return p;
}

}  // namespace gpstc

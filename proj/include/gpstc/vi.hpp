#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "gpstc/costs.hpp"
#include "gpstc/gp.hpp"

namespace gpstc {

/// Representative states X_R and inputs U_R on which Bellman backups are evaluated.
struct RepresentativeGrid {
  Eigen::MatrixXd states;  // N_X x n_x, one grid state per row; contains the origin
  Eigen::MatrixXd inputs;  // N_U x n_u, one grid input per row
  int M = 1;
  double state_spacing = 0.0;  // used to derive RBF widths

  /// Tensor grid lower + i * spacing per axis. Coordinates within 1e-9 spacing of zero
  /// snap to zero so a symmetric box reliably contains the origin.
  static RepresentativeGrid regular(const Eigen::VectorXd& state_lower, const Eigen::VectorXd& state_upper,
                                    double state_spacing, const Eigen::VectorXd& input_lower,
                                    const Eigen::VectorXd& input_upper, double input_spacing, int M);

  Eigen::Index num_states() const { return states.rows(); }
  Eigen::Index num_inputs() const { return inputs.rows(); }

  /// Checks N_X, N_U >= 1, origin membership and that inputs lie in [lower, upper].
  void validate(const Eigen::VectorXd& input_lower, const Eigen::VectorXd& input_upper) const;
};

/// Evenly spaced points lower, lower + spacing, ..., up to upper (inclusive, with tolerance).
std::vector<double> axis_points(double lower, double upper, double spacing);

/// Weighted sum of Gaussian RBFs sharing one width.
struct RbfApproximator {
  Eigen::MatrixXd centers;  // one center per row
  Eigen::VectorXd weights;
  double width = 1.0;

  static RbfApproximator zeros(const Eigen::MatrixXd& centers, double width);
  void check() const;
};

double rbf_eval(const RbfApproximator& approx, const Eigen::VectorXd& x);

/// Joint control/communication policy plus the value approximation it was derived from.
struct PolicyPair {
  RbfApproximator j_star;
  std::vector<RbfApproximator> pi_inp;  // one per input dimension
  RbfApproximator pi_com_raw;
  int M = 1;
  Eigen::VectorXd input_lower;
  Eigen::VectorXd input_upper;

  /// All weights zero: control_decision is 0 (clamped into U) and comm_decision is 1.
  static PolicyPair zeros(const Eigen::MatrixXd& centers, double width, int M, const Eigen::VectorXd& input_lower,
                          const Eigen::VectorXd& input_upper);

  Eigen::Index state_dim() const { return j_star.centers.cols(); }
  Eigen::Index input_dim() const { return static_cast<Eigen::Index>(pi_inp.size()); }
  void check() const;
};

/// Nearest integer to the raw communication output (halves round up), clamped to 1..M.
int comm_decision(const PolicyPair& pair, const Eigen::VectorXd& x);

/// Control RBFs evaluated and clamped componentwise into the input box.
Eigen::VectorXd control_decision(const PolicyPair& pair, const Eigen::VectorXd& x);

/// Versioned JSON layout: format, version, M, input bounds, and one block per approximator
/// with centers, width and weights.
void save_policy(const PolicyPair& pair, const std::filesystem::path& path);
PolicyPair load_policy(const std::filesystem::path& path);

struct ViOptions {
  int n_ite = 15;
  double discount = 0.98;     // multiplies the continuation term; 1 = undiscounted
  double width_factor = 1.5;  // RBF width = factor * grid spacing
  double ridge = 1e-8;
  double ridge_max = 1e-4;
  double tolerance = 1e-4;       // early stop on sup-norm change of D*
  double tie_tolerance = 1e-6;   // backups within this of the minimum count as ties
};

/// D(x, u, m) = E[C1(x_m)] + gamma (M - E[pi'_com(x_m)]) + discount * E[J(x_m)].
double bellman_backup(const Eigen::VectorXd& x, const Eigen::VectorXd& u, int m, const MultiGpModel& model,
                      const PolicyPair& pair, const CostConfig& cfg, double discount = 0.98);

/// Solves (Phi + ridge I) w = targets; the ridge escalates x10 up to ridge_max on failure.
Eigen::VectorXd fit_rbf_weights(const Eigen::MatrixXd& centers, const Eigen::VectorXd& targets, double width,
                                double ridge, double ridge_max = 1e-4);

/// Picks the winning (u, m) among backups. Candidates within tie_tolerance of the minimum
/// are ties: larger m wins, then smaller |u|, then earlier scan order.
struct BackupCandidate {
  double value;
  Eigen::Index input_index;
  int m;
  double input_norm;
};
std::size_t select_argmin(const std::vector<BackupCandidate>& candidates, double tie_tolerance);

struct SweepRecord {
  double sup_change;  // max_x |D*_new(x) - D*_prev(x)|
};

struct ViResult {
  PolicyPair pair;
  std::vector<SweepRecord> sweeps;
  Eigen::VectorXd d_star;                  // last sweep, per grid state
  Eigen::MatrixXd u_star;                  // N_X x n_u
  Eigen::VectorXi m_star;
};

/// Approximate value iteration over the grid. Every sweep reads the previous sweep's
/// approximators, so the result does not depend on state ordering.
ViResult value_iteration(const MultiGpModel& model, const RepresentativeGrid& grid, const CostConfig& cfg,
                         const ViOptions& opts, const PolicyPair& pair_init);

}  // namespace gpstc

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gpstc/belief.hpp"

namespace gpstc {

/// Squared-exponential kernel hyperparameters for one output dimension.
///
/// The kernel is  k(a, b) = alpha^2 exp(-1/2 (a-b)^T Lambda^{-1} (a-b))  with
/// Lambda = diag(lengthscales^2).
struct Hyperparams {
  double signal_amplitude = 1.0;  // alpha
  Eigen::VectorXd lengthscales;   // one per input coordinate (state then input)
  double noise_variance = 1e-4;   // sigma_eps^2

  /// Throws ArgumentError when any field is non-positive or non-finite.
  void validate() const;
  Eigen::Index input_dim() const { return lengthscales.size(); }
};

/// Transition samples. Row n of `inputs` is [x_n; u_n], row n of `outputs` is the
/// successor state f(x_n, u_n).
struct Dataset {
  Eigen::Index state_dim = 0;
  Eigen::Index input_dim = 0;
  Eigen::MatrixXd inputs;   // N x (state_dim + input_dim)
  Eigen::MatrixXd outputs;  // N x state_dim

  Dataset() = default;
  Dataset(Eigen::Index n_x, Eigen::Index n_u);

  Eigen::Index size() const { return inputs.rows(); }
  bool empty() const { return size() == 0; }

  void append(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& next);
  /// Appends every row of `other`; dimensions must agree.
  void extend(const Dataset& other);
  /// Drops the oldest rows so that at most `cap` remain.
  void truncate_oldest(std::size_t cap);

  /// Column vector of outputs for state dimension i.
  Eigen::VectorXd output(Eigen::Index i) const { return outputs.col(i); }

  void check() const;
};

/// CSV with header x1..x_nx,u1..u_nu,y1..y_nx and one row per sample.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path);

double se_kernel(const Eigen::Ref<const Eigen::VectorXd>& a,
                 const Eigen::Ref<const Eigen::VectorXd>& b, const Hyperparams& h);

/// Options for `fit`. Defaults follow the documented evidence-maximization setup.
struct GpFitOptions {
  bool optimize = false;
  bool optimize_noise = false;
  int restarts = 3;          // random restarts in addition to the initial point
  int max_iterations = 200;  // per start
  double restart_spread = 0.5;  // std-dev of log-space perturbations
  double max_snr = 500.0;       // upper bound on alpha / sigma_eps during optimization; <= 0 disables
  std::uint64_t seed = 0;
  double jitter_start = 1e-10;
  double jitter_max = 1e-4;
};

/// Single-output GP posterior. Immutable once built.
class GpModel {
 public:
  GpModel() = default;
  /// Builds the posterior for outputs `y` at `inputs`. Throws NumericalError when the
  /// Gram matrix cannot be factorized even with the maximum jitter.
  GpModel(Eigen::MatrixXd inputs, Eigen::VectorXd y, Hyperparams hyper,
          double jitter_start = 1e-10, double jitter_max = 1e-4);

  bool fitted() const { return fitted_; }
  const Hyperparams& hyper() const { return hyper_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::VectorXd& targets() const { return y_; }
  /// beta = (K + sigma^2 I)^{-1} y
  const Eigen::VectorXd& beta() const { return beta_; }
  /// Lower-triangular factor of K + (sigma^2 + jitter) I.
  const Eigen::MatrixXd& gram_chol() const { return chol_; }
  /// (K + sigma^2 I)^{-1}
  const Eigen::MatrixXd& gram_inverse() const { return gram_inv_; }
  double jitter() const { return jitter_; }
  Eigen::Index size() const { return inputs_.rows(); }

  /// Posterior mean and variance of the latent function at `input` (no noise added).
  std::pair<double, double> predict(const Eigen::Ref<const Eigen::VectorXd>& input) const;

  double log_marginal_likelihood() const;

 private:
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd y_;
  Hyperparams hyper_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd gram_inv_;
  Eigen::VectorXd beta_;
  double log_det_half_ = 0.0;  // sum log diag(chol)
  double jitter_ = 0.0;
  bool fitted_ = false;
};

double log_marginal_likelihood(const GpModel& model);

/// Log marginal likelihood and its gradient with respect to
/// [log alpha, log lengthscales..., log sigma_eps (if with_noise)].
struct LmlValue {
  double value;
  Eigen::VectorXd gradient;
};
LmlValue log_marginal_likelihood_with_gradient(const Eigen::MatrixXd& inputs,
                                               const Eigen::VectorXd& y, const Hyperparams& h,
                                               bool with_noise, double jitter_start = 1e-10,
                                               double jitter_max = 1e-4);

/// Maximizes the log marginal likelihood for one output dimension.
Hyperparams optimize_hyperparams(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                                 const Hyperparams& init, const GpFitOptions& opts);

/// One GP per state dimension, all trained on the same inputs.
class MultiGpModel {
 public:
  MultiGpModel() = default;
  MultiGpModel(Eigen::Index n_x, Eigen::Index n_u, std::vector<GpModel> models);

  bool fitted() const { return !models_.empty(); }
  Eigen::Index state_dim() const { return n_x_; }
  Eigen::Index input_dim() const { return n_u_; }
  const GpModel& model(Eigen::Index i) const { return models_.at(static_cast<std::size_t>(i)); }
  const std::vector<GpModel>& models() const { return models_; }

  /// Predictive distribution of f(x, u) with diagonal covariance of latent variances.
  GaussianBelief predict(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

 private:
  Eigen::Index n_x_ = 0;
  Eigen::Index n_u_ = 0;
  std::vector<GpModel> models_;
};

/// Fits one GP per state dimension. `init` holds either one Hyperparams shared by
/// every dimension or exactly one per dimension.
MultiGpModel fit(const Dataset& data, const std::vector<Hyperparams>& init,
                 const GpFitOptions& opts = {});

}  // namespace gpstc

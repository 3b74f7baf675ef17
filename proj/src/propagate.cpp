#include "gpstc/propagate.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "gpstc/errors.hpp"

namespace gpstc {

GaussianBelief::GaussianBelief(Eigen::VectorXd mean, Eigen::MatrixXd cov) : mean_(std::move(mean)) {
  const Eigen::Index n = mean_.size();
  if (cov.rows() != n || cov.cols() != n)
    throw ShapeError("belief covariance must be " + std::to_string(n) + "x" + std::to_string(n));
  if (!mean_.allFinite() || !cov.allFinite()) throw NumericalError("belief contains non-finite values");
  cov_ = 0.5 * (cov + cov.transpose());
  if (n == 0 || cov_.isZero(0.0)) return;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin >= 0.0) return;
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if (lmin < -kPsdTolerance * scale)
  {
    std::ostringstream msg;
    msg << "covariance has eigenvalue " << lmin << " (internal moment computation is inconsistent): "
        << cov_.format(Eigen::IOFormat(Eigen::StreamPrecision, Eigen::DontAlignCols, ", ", "; ", "", "", "[", "]"));
    throw NumericalError(msg.str());
  }
  const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
  cov_ = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  cov_ = (0.5 * (cov_ + cov_.transpose())).eval();
}

GaussianBelief GaussianBelief::point(Eigen::VectorXd mean) {
  const Eigen::Index n = mean.size();
  return GaussianBelief(std::move(mean), Eigen::MatrixXd::Zero(n, n));
}

AugmentedBelief::AugmentedBelief(const GaussianBelief& state, const Eigen::VectorXd& u) {
  const Eigen::Index nx = state.dim();
  const Eigen::Index nu = u.size();
  mean.resize(nx + nu);
  mean << state.mean(), u;
  cov = Eigen::MatrixXd::Zero(nx + nu, nx + nu);
  cov.topLeftCorner(nx, nx) = state.cov();
}

Eigen::VectorXd eta_vector(const GpModel& model, const AugmentedBelief& ab) {
  if (!model.fitted()) throw StateError("eta_vector on an unfitted GP");
  const Eigen::Index d = model.inputs().cols();
  if (ab.mean.size() != d || ab.cov.rows() != d) throw ShapeError("eta_vector: belief dimension mismatch");
  const Hyperparams& h = model.hyper();
  const Eigen::VectorXd lam = h.lengthscales.array().square();

  Eigen::MatrixXd b = ab.cov * lam.cwiseInverse().asDiagonal();  // Lambda^{-1} Sigma, up to transpose
  b.diagonal().array() += 1.0;
  const double det = b.determinant();
  Eigen::MatrixXd s = ab.cov;
  s.diagonal() += lam;
  const Eigen::LLT<Eigen::MatrixXd> llt(s);

  const Eigen::MatrixXd zeta = model.inputs().rowwise() - ab.mean.transpose();  // N x D
  const Eigen::MatrixXd solved = llt.solve(zeta.transpose());                   // D x N
  const Eigen::ArrayXd quad = (zeta.transpose().array() * solved.array()).colwise().sum().transpose();
  const double a2 = h.signal_amplitude * h.signal_amplitude;
  return (a2 / std::sqrt(det)) * (-0.5 * quad).exp().matrix();
}

namespace {

void check_dims(const MultiGpModel& model, const GaussianBelief& belief, const Eigen::VectorXd& u) {
  if (!model.fitted()) throw StateError("propagation with an unfitted model");
  if (belief.dim() != model.state_dim() || u.size() != model.input_dim())
    throw ShapeError("propagation: belief/input dimensions do not match the model");
}

}  // namespace

GaussianBelief propagate_one_step(const MultiGpModel& model, const GaussianBelief& belief,
                                  const Eigen::VectorXd& u) {
  check_dims(model, belief, u);
  const Eigen::Index nx = model.state_dim();

  if (belief.is_point()) {
    const GaussianBelief p = model.predict(belief.mean(), u);
    Eigen::MatrixXd cov = p.cov();
    for (Eigen::Index i = 0; i < nx; ++i) cov(i, i) += model.model(i).hyper().noise_variance;
    return GaussianBelief(p.mean(), std::move(cov));
  }

  const AugmentedBelief ab(belief, u);
  const Eigen::MatrixXd& sigma = belief.cov();
  const Eigen::MatrixXd zeta = model.model(0).inputs().rowwise() - ab.mean.transpose();  // N x D
  const Eigen::MatrixXd zeta_x = zeta.leftCols(nx);

  Eigen::VectorXd mean(nx);
  std::vector<Eigen::VectorXd> inv_lam(static_cast<std::size_t>(nx));  // per-dimension Lambda^{-1}
  std::vector<Eigen::ArrayXd> log_k(static_cast<std::size_t>(nx));     // log k_a(x_p, mu~)
  std::vector<Eigen::MatrixXd> scaled(static_cast<std::size_t>(nx));   // Lambda_a^{-1} zeta, state block
  for (Eigen::Index a = 0; a < nx; ++a) {
    const auto ia = static_cast<std::size_t>(a);
    const GpModel& gp = model.model(a);
    mean[a] = gp.beta().dot(eta_vector(gp, ab));
    inv_lam[ia] = gp.hyper().lengthscales.array().square().inverse();
    log_k[ia] = 2.0 * std::log(gp.hyper().signal_amplitude) -
                0.5 * (zeta.array().square().matrix() * inv_lam[ia]).array();
    scaled[ia] = zeta_x * inv_lam[ia].head(nx).asDiagonal();
  }

  Eigen::MatrixXd cov(nx, nx);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nx, nx);
  for (Eigen::Index a = 0; a < nx; ++a) {
    for (Eigen::Index b = a; b < nx; ++b) {
      const auto ia = static_cast<std::size_t>(a);
      const auto ib = static_cast<std::size_t>(b);
      // R = Sigma (Lambda_a^{-1} + Lambda_b^{-1}) + I on the state block; the input block is I.
      const Eigen::VectorXd w = inv_lam[ia].head(nx) + inv_lam[ib].head(nx);
      const Eigen::MatrixXd r = sigma * w.asDiagonal() + eye;
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(r);
      const double t = 1.0 / std::sqrt(lu.determinant());
      Eigen::MatrixXd tm = lu.solve(sigma);  // R^{-1} Sigma, symmetric
      tm = (0.5 * (tm + tm.transpose())).eval();

      const Eigen::MatrixXd at = scaled[ia] * tm;
      const Eigen::MatrixXd bt = scaled[ib] * tm;
      const Eigen::ArrayXd ea = log_k[ia] + 0.5 * (at.array() * scaled[ia].array()).rowwise().sum();
      const Eigen::ArrayXd eb = log_k[ib] + 0.5 * (bt.array() * scaled[ib].array()).rowwise().sum();
      Eigen::MatrixXd l = at * scaled[ib].transpose();
      l.colwise() += ea.matrix();
      l.rowwise() += eb.matrix().transpose();
      l = t * l.array().exp().matrix();

      const GpModel& ga = model.model(a);
      const GpModel& gb = model.model(b);
      double s = ga.beta().dot(l * gb.beta()) - mean[a] * mean[b];
      if (a == b) {
        const double a2 = ga.hyper().signal_amplitude * ga.hyper().signal_amplitude;
        s += a2 - (ga.gram_inverse().array() * l.array()).sum() + ga.hyper().noise_variance;
      }
      cov(a, b) = s;
      cov(b, a) = s;
    }
  }
  return GaussianBelief(std::move(mean), std::move(cov));
}

std::vector<GaussianBelief> propagate_m_steps(const MultiGpModel& model, const Eigen::VectorXd& x0,
                                              const Eigen::VectorXd& u, int m) {
  if (m < 1) throw ArgumentError("propagate_m_steps needs m >= 1, got " + std::to_string(m));
  std::vector<GaussianBelief> out;
  out.reserve(static_cast<std::size_t>(m));
  GaussianBelief cur = GaussianBelief::point(x0);
  for (int l = 0; l < m; ++l) {
    cur = propagate_one_step(model, cur, u);
    out.push_back(cur);
  }
  return out;
}

}  // namespace gpstc

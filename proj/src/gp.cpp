#include "gpstc/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "gpstc/csv.hpp"
#include "gpstc/errors.hpp"

namespace gpstc {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

Eigen::MatrixXd signal_gram(const Eigen::MatrixXd& inputs, const Hyperparams& h) {
  const Eigen::Index n = inputs.rows();
  const Eigen::ArrayXd inv_l = h.lengthscales.array().inverse();
  const Eigen::MatrixXd scaled = inputs * inv_l.matrix().asDiagonal();
  const Eigen::VectorXd sq = scaled.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * scaled * scaled.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  const double a2 = h.signal_amplitude * h.signal_amplitude;
  Eigen::MatrixXd k = (-0.5 * d2.array().max(0.0)).exp() * a2;
  for (Eigen::Index i = 0; i < n; ++i) k(i, i) = a2;
  return k;
}

struct Factor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Cholesky of gram + noise I; on failure retries with jitter_start, escalating x10 up to jitter_max.
Factor factorize(const Eigen::MatrixXd& gram, double noise, double jitter_start, double jitter_max) {
  const Eigen::Index n = gram.rows();
  auto attempt = [&](double jitter) {
    Eigen::MatrixXd a = gram;
    a.diagonal().array() += noise + jitter;
    Factor f{Eigen::LLT<Eigen::MatrixXd>(a), jitter};
    const bool ok = f.llt.info() == Eigen::Success && f.llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
    return std::make_pair(ok, std::move(f));
  };
  if (auto [ok, f] = attempt(0.0); ok) return f;
  for (double jitter = jitter_start; jitter <= jitter_max * (1.0 + 1e-9); jitter *= 10.0)
    if (auto [ok, f] = attempt(jitter); ok) return f;
  throw NumericalError("Gram matrix (N=" + std::to_string(n) +
                       ") is not positive definite even with jitter " + std::to_string(jitter_max) +
                       "; training inputs are ill-conditioned");
}

void check_hyper_dims(const Hyperparams& h, Eigen::Index d) {
  if (h.input_dim() != d)
    throw ShapeError("hyperparameters have " + std::to_string(h.input_dim()) +
                     " lengthscales but inputs have dimension " + std::to_string(d));
}

}  // namespace

void Hyperparams::validate() const {
  auto bad = [](double v) { return !(v > 0.0) || !std::isfinite(v); };
  if (bad(signal_amplitude)) throw ArgumentError("signal amplitude must be positive");
  if (lengthscales.size() == 0) throw ArgumentError("lengthscales must not be empty");
  for (Eigen::Index i = 0; i < lengthscales.size(); ++i)
    if (bad(lengthscales[i])) throw ArgumentError("lengthscale " + std::to_string(i) + " must be positive");
  if (bad(noise_variance)) throw ArgumentError("noise variance must be positive");
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(Eigen::Index n_x, Eigen::Index n_u)
    : state_dim(n_x), input_dim(n_u), inputs(0, n_x + n_u), outputs(0, n_x) {}

void Dataset::append(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& next) {
  if (x.size() != state_dim || u.size() != input_dim || next.size() != state_dim)
    throw ShapeError("sample dimensions do not match dataset");
  const Eigen::Index n = size();
  inputs.conservativeResize(n + 1, state_dim + input_dim);
  outputs.conservativeResize(n + 1, state_dim);
  inputs.row(n) << x.transpose(), u.transpose();
  outputs.row(n) = next.transpose();
}

void Dataset::extend(const Dataset& other) {
  if (other.state_dim != state_dim || other.input_dim != input_dim)
    throw ShapeError("cannot merge datasets of different dimensions");
  const Eigen::Index n = size();
  inputs.conservativeResize(n + other.size(), state_dim + input_dim);
  outputs.conservativeResize(n + other.size(), state_dim);
  inputs.bottomRows(other.size()) = other.inputs;
  outputs.bottomRows(other.size()) = other.outputs;
}

void Dataset::truncate_oldest(std::size_t cap) {
  const auto n = static_cast<std::size_t>(size());
  if (n <= cap) return;
  const auto keep = static_cast<Eigen::Index>(cap);
  Eigen::MatrixXd in = inputs.bottomRows(keep);
  Eigen::MatrixXd out = outputs.bottomRows(keep);
  inputs = std::move(in);
  outputs = std::move(out);
}

void Dataset::check() const {
  if (inputs.cols() != state_dim + input_dim || outputs.cols() != state_dim)
    throw ShapeError("dataset column counts do not match its dimensions");
  if (inputs.rows() != outputs.rows())
    throw ShapeError("dataset has " + std::to_string(inputs.rows()) + " inputs but " +
                     std::to_string(outputs.rows()) + " outputs");
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  data.check();
  csv::Table t;
  for (Eigen::Index i = 0; i < data.state_dim; ++i) t.header.push_back("x" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < data.input_dim; ++i) t.header.push_back("u" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < data.state_dim; ++i) t.header.push_back("y" + std::to_string(i + 1));
  for (Eigen::Index n = 0; n < data.size(); ++n) {
    std::vector<std::string> row;
    for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) row.push_back(csv::format_double(data.inputs(n, c)));
    for (Eigen::Index c = 0; c < data.outputs.cols(); ++c) row.push_back(csv::format_double(data.outputs(n, c)));
    t.rows.push_back(std::move(row));
  }
  csv::write(t, path);
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  Eigen::Index n_x = 0, n_u = 0, n_y = 0;
  for (const auto& h : t.header) {
    if (h.size() < 2) throw IoError("unexpected dataset column '" + h + "'");
    switch (h[0]) {
      case 'x': ++n_x; break;
      case 'u': ++n_u; break;
      case 'y': ++n_y; break;
      default: throw IoError("unexpected dataset column '" + h + "'");
    }
  }
  if (n_x == 0 || n_y != n_x) throw IoError("dataset header must have x1..xn, u1..um, y1..yn columns");
  Dataset d(n_x, n_u);
  const auto rows = static_cast<Eigen::Index>(t.rows.size());
  d.inputs.resize(rows, n_x + n_u);
  d.outputs.resize(rows, n_x);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    const std::string ctx = path.string() + " row " + std::to_string(r + 1);
    for (Eigen::Index i = 0; i < n_x; ++i)
      d.inputs(r, i) = csv::parse_double(row[t.column("x" + std::to_string(i + 1))], ctx);
    for (Eigen::Index i = 0; i < n_u; ++i)
      d.inputs(r, n_x + i) = csv::parse_double(row[t.column("u" + std::to_string(i + 1))], ctx);
    for (Eigen::Index i = 0; i < n_x; ++i)
      d.outputs(r, i) = csv::parse_double(row[t.column("y" + std::to_string(i + 1))], ctx);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Kernel and posterior

double se_kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                 const Hyperparams& h) {
  if (a.size() != b.size() || a.size() != h.input_dim())
    throw ShapeError("se_kernel: inputs of size " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " with " + std::to_string(h.input_dim()) + " lengthscales");
  const double q = ((a - b).array() / h.lengthscales.array()).square().sum();
  return h.signal_amplitude * h.signal_amplitude * std::exp(-0.5 * q);
}

GpModel::GpModel(Eigen::MatrixXd inputs, Eigen::VectorXd y, Hyperparams hyper, double jitter_start,
                 double jitter_max)
    : inputs_(std::move(inputs)), y_(std::move(y)), hyper_(std::move(hyper)) {
  if (inputs_.rows() < 1) throw ArgumentError("GP needs at least one training sample");
  if (inputs_.rows() != y_.size())
    throw ShapeError("GP has " + std::to_string(inputs_.rows()) + " inputs but " + std::to_string(y_.size()) +
                     " targets");
  check_hyper_dims(hyper_, inputs_.cols());
  hyper_.validate();

  const Factor f = factorize(signal_gram(inputs_, hyper_), hyper_.noise_variance, jitter_start, jitter_max);
  jitter_ = f.jitter;
  chol_ = f.llt.matrixL();
  beta_ = f.llt.solve(y_);
  gram_inv_ = f.llt.solve(Eigen::MatrixXd::Identity(size(), size()));
  gram_inv_ = 0.5 * (gram_inv_ + gram_inv_.transpose()).eval();
  log_det_half_ = chol_.diagonal().array().log().sum();
  fitted_ = true;
}

std::pair<double, double> GpModel::predict(const Eigen::Ref<const Eigen::VectorXd>& input) const {
  if (!fitted_) throw StateError("predict called on an unfitted GP");
  if (input.size() != inputs_.cols())
    throw ShapeError("test input has dimension " + std::to_string(input.size()) + ", expected " +
                     std::to_string(inputs_.cols()));
  Eigen::VectorXd k(size());
  for (Eigen::Index n = 0; n < size(); ++n) k[n] = se_kernel(input, inputs_.row(n).transpose(), hyper_);
  const double mean = k.dot(beta_);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
  const double a2 = hyper_.signal_amplitude * hyper_.signal_amplitude;
  return {mean, std::max(0.0, a2 - v.squaredNorm())};
}

double GpModel::log_marginal_likelihood() const {
  if (!fitted_) throw StateError("log_marginal_likelihood called on an unfitted GP");
  return -0.5 * y_.dot(beta_) - log_det_half_ - 0.5 * static_cast<double>(size()) * kLog2Pi;
}

double log_marginal_likelihood(const GpModel& model) { return model.log_marginal_likelihood(); }

// ---------------------------------------------------------------------------
// Evidence maximization

LmlValue log_marginal_likelihood_with_gradient(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                                               const Hyperparams& h, bool with_noise, double jitter_start,
                                               double jitter_max) {
  check_hyper_dims(h, inputs.cols());
  const Eigen::Index n = inputs.rows();
  const Eigen::Index d = inputs.cols();
  const Eigen::MatrixXd kf = signal_gram(inputs, h);
  const Factor f = factorize(kf, h.noise_variance, jitter_start, jitter_max);
  const Eigen::VectorXd beta = f.llt.solve(y);
  const Eigen::MatrixXd l = f.llt.matrixL();
  const double value = -0.5 * y.dot(beta) - l.diagonal().array().log().sum() - 0.5 * static_cast<double>(n) * kLog2Pi;

  // dL/dtheta = 1/2 tr(W dK/dtheta),  W = beta beta^T - (K + s I)^{-1}
  Eigen::MatrixXd w = beta * beta.transpose() - f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd grad(1 + d + (with_noise ? 1 : 0));
  const Eigen::MatrixXd wk = (w.array() * kf.array()).matrix();
  grad[0] = wk.sum();  // dK/dlog(alpha) = 2 Kf
  for (Eigen::Index j = 0; j < d; ++j) {
    const double inv_l2 = 1.0 / (h.lengthscales[j] * h.lengthscales[j]);
    double acc = 0.0;
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index r = 0; r < n; ++r) {
        const double diff = inputs(r, j) - inputs(c, j);
        acc += wk(r, c) * diff * diff;
      }
    grad[1 + j] = 0.5 * acc * inv_l2;
  }
  if (with_noise) grad[1 + d] = h.noise_variance * w.trace();
  return {value, grad};
}

namespace {

Eigen::VectorXd to_log(const Hyperparams& h, bool with_noise) {
  const Eigen::Index d = h.input_dim();
  Eigen::VectorXd t(1 + d + (with_noise ? 1 : 0));
  t[0] = std::log(h.signal_amplitude);
  t.segment(1, d) = h.lengthscales.array().log();
  if (with_noise) t[1 + d] = 0.5 * std::log(h.noise_variance);
  return t;
}

Hyperparams from_log(const Eigen::VectorXd& t, const Hyperparams& base, bool with_noise) {
  Hyperparams h = base;
  const Eigen::Index d = base.input_dim();
  h.signal_amplitude = std::exp(t[0]);
  h.lengthscales = t.segment(1, d).array().exp();
  if (with_noise) h.noise_variance = std::exp(2.0 * t[1 + d]);
  return h;
}

// Log-space box keeping the kernel away from degenerate regimes.
// The signal-to-noise cap bounds the condition number of K + sigma^2 I, which moment
// matching needs in order to keep its variance differences accurate.
Eigen::VectorXd clamp_log(Eigen::VectorXd t, Eigen::Index d, bool with_noise, double base_noise, double max_snr) {
  t[0] = std::clamp(t[0], std::log(1e-3), std::log(1e3));
  for (Eigen::Index j = 0; j < d; ++j) t[1 + j] = std::clamp(t[1 + j], std::log(1e-2), std::log(1e3));
  if (with_noise) t[1 + d] = std::clamp(t[1 + d], std::log(1e-5), std::log(1e1));
  if (max_snr > 0.0) {
    const double log_sigma = with_noise ? t[1 + d] : 0.5 * std::log(base_noise);
    t[0] = std::min(t[0], log_sigma + std::log(max_snr));
  }
  return t;
}

struct AscentResult {
  Eigen::VectorXd theta;
  double value;
};

AscentResult ascend(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y, const Hyperparams& base,
                    Eigen::VectorXd theta, const GpFitOptions& opts) {
  const bool wn = opts.optimize_noise;
  const Eigen::Index d = base.input_dim();
  auto eval = [&](const Eigen::VectorXd& t) -> std::optional<LmlValue> {
    try {
      auto r = log_marginal_likelihood_with_gradient(inputs, y, from_log(t, base, wn), wn, opts.jitter_start,
                                                     opts.jitter_max);
      if (!std::isfinite(r.value) || !r.gradient.allFinite()) return std::nullopt;
      return r;
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };

  theta = clamp_log(theta, d, wn, base.noise_variance, opts.max_snr);
  auto cur = eval(theta);
  if (!cur) return {theta, -std::numeric_limits<double>::infinity()};
  double step = 0.1 / std::max(1.0, cur->gradient.norm());
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (cur->gradient.norm() < 1e-6 || step < 1e-12) break;
    const Eigen::VectorXd cand_theta = clamp_log(theta + step * cur->gradient, d, wn, base.noise_variance, opts.max_snr);
    auto cand = eval(cand_theta);
    if (cand && cand->value > cur->value) {
      const bool stalled = cand->value - cur->value < 1e-9 * std::max(1.0, std::abs(cur->value));
      theta = cand_theta;
      cur = std::move(cand);
      step *= 1.5;
      if (stalled) break;
    } else {
      step *= 0.5;
    }
  }
  return {theta, cur->value};
}

}  // namespace

Hyperparams optimize_hyperparams(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y, const Hyperparams& init,
                                 const GpFitOptions& opts) {
  check_hyper_dims(init, inputs.cols());
  init.validate();
  const bool wn = opts.optimize_noise;
  const Eigen::VectorXd start = to_log(init, wn);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> perturb(0.0, opts.restart_spread);

  AscentResult best = ascend(inputs, y, init, start, opts);
  for (int r = 0; r < opts.restarts; ++r) {
    Eigen::VectorXd t = start;
    for (Eigen::Index j = 0; j < t.size(); ++j) t[j] += perturb(rng);
    AscentResult res = ascend(inputs, y, init, t, opts);
    if (res.value > best.value) best = std::move(res);
  }
  if (!std::isfinite(best.value)) return init;
  return from_log(best.theta, init, wn);
}

// ---------------------------------------------------------------------------
// Multi-output model

MultiGpModel::MultiGpModel(Eigen::Index n_x, Eigen::Index n_u, std::vector<GpModel> models)
    : n_x_(n_x), n_u_(n_u), models_(std::move(models)) {
  if (static_cast<Eigen::Index>(models_.size()) != n_x_)
    throw ShapeError("MultiGpModel needs exactly one GP per state dimension");
  for (const auto& m : models_)
    if (!m.fitted() || m.inputs().cols() != n_x_ + n_u_) throw StateError("MultiGpModel built from unfitted GP");
}

GaussianBelief MultiGpModel::predict(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  if (!fitted()) throw StateError("predict called on an unfitted model");
  if (x.size() != n_x_ || u.size() != n_u_)
    throw ShapeError("predict: state/input dimensions do not match the model");
  Eigen::VectorXd in(n_x_ + n_u_);
  in << x, u;
  Eigen::VectorXd mean(n_x_);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n_x_, n_x_);
  for (Eigen::Index i = 0; i < n_x_; ++i) {
    const auto [m, v] = models_[static_cast<std::size_t>(i)].predict(in);
    mean[i] = m;
    cov(i, i) = v;
  }
  return GaussianBelief(std::move(mean), std::move(cov));
}

MultiGpModel fit(const Dataset& data, const std::vector<Hyperparams>& init, const GpFitOptions& opts) {
  data.check();
  if (data.empty()) throw ArgumentError("cannot fit a GP to an empty dataset");
  if (init.size() != 1 && static_cast<Eigen::Index>(init.size()) != data.state_dim)
    throw ShapeError("fit needs one shared Hyperparams or one per state dimension");
  std::vector<GpModel> models;
  models.reserve(static_cast<std::size_t>(data.state_dim));
  for (Eigen::Index i = 0; i < data.state_dim; ++i) {
    Hyperparams h = init.size() == 1 ? init[0] : init[static_cast<std::size_t>(i)];
    const Eigen::VectorXd y = data.output(i);
    if (opts.optimize) {
      GpFitOptions o = opts;
      o.seed = opts.seed + static_cast<std::uint64_t>(i);
      h = optimize_hyperparams(data.inputs, y, h, o);
    }
    models.emplace_back(data.inputs, y, h, opts.jitter_start, opts.jitter_max);
  }
  return MultiGpModel(data.state_dim, data.input_dim, std::move(models));
}

}  // namespace gpstc

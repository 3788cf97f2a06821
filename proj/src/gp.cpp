#include "permbo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "permbo/sampling.hpp"

namespace permbo {

namespace {

constexpr double kLogParamBound = 10.0;
constexpr double kMaxLogNoise = 2.0;

struct Factorization {
  Eigen::MatrixXd L;
  double jitter = 0.0;
  double level = 0.0;
};

/// Cholesky of K + noise I under the staged jitter ladder; empty optional-ish
/// result (L.size() == 0 with n > 0) when every level fails.
bool factorize(const Eigen::MatrixXd& K, double noise, const std::vector<double>& ladder,
               Factorization& out) {
  const Eigen::Index n = K.rows();
  if (n == 0) {
    out = {};
    return true;
  }
  const double mean_diag = std::max(K.diagonal().mean(), 0.0);
  for (double level : ladder) {
    const double jitter = level * mean_diag;
    Eigen::MatrixXd A = K;
    A.diagonal().array() += noise + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd L = llt.matrixL();
    if (!L.allFinite() || (L.diagonal().array() <= 0.0).any()) continue;
    out = {std::move(L), jitter, level};
    return true;
  }
  return false;
}

double min_eigenvalue(const Eigen::MatrixXd& K) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (K + K.transpose()),
                                                     Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  return es.eigenvalues().minCoeff();
}

struct MllEval {
  bool ok = false;
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
  Factorization fac;
  Eigen::VectorXd alpha;
};

/// z = [kernel log params..., log noise].
MllEval evaluate_mll(const Kernel& kernel, const PairwiseTerms& terms, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& z, bool noise_in_z, double fixed_noise,
                     const std::vector<double>& ladder, bool want_grad) {
  MllEval r;
  const auto np = static_cast<Eigen::Index>(kernel.num_params());
  const Eigen::VectorXd lp = z.head(np);
  const double noise = noise_in_z ? std::exp(z[np]) : fixed_noise;
  Eigen::MatrixXd K;
  std::vector<Eigen::MatrixXd> dK;
  kernel.gram(terms, lp, K, want_grad ? &dK : nullptr);
  if (!K.allFinite() || !factorize(K, noise, ladder, r.fac)) return r;
  const Eigen::Index n = K.rows();
  r.alpha = r.fac.L.triangularView<Eigen::Lower>().solve(y);
  r.alpha = r.fac.L.transpose().triangularView<Eigen::Upper>().solve(r.alpha);
  r.value = -0.5 * y.dot(r.alpha) - r.fac.L.diagonal().array().log().sum() -
            0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  r.ok = std::isfinite(r.value);
  if (!r.ok || !want_grad) return r;

  // d/dtheta = 1/2 tr((alpha alpha^T - A^-1) dA/dtheta), where the jitter term
  // level * mean(diag K) moves with the kernel parameters.
  Eigen::MatrixXd Ainv = Eigen::MatrixXd::Identity(n, n);
  r.fac.L.triangularView<Eigen::Lower>().solveInPlace(Ainv);
  r.fac.L.transpose().triangularView<Eigen::Upper>().solveInPlace(Ainv);
  const Eigen::MatrixXd W = r.alpha * r.alpha.transpose() - Ainv;
  r.grad.resize(z.size());
  for (Eigen::Index p = 0; p < np; ++p) {
    const Eigen::MatrixXd& D = dK[static_cast<std::size_t>(p)];
    double g = 0.5 * (W.cwiseProduct(D)).sum();
    g += 0.5 * W.trace() * r.fac.level * D.diagonal().mean();
    r.grad[p] = g;
  }
  if (noise_in_z) r.grad[np] = 0.5 * W.trace() * noise;
  return r;
}

Eigen::VectorXd lower_bounds(const Kernel& k, bool noise_in_z, double noise_floor) {
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(k.num_params() + (noise_in_z ? 1 : 0)), -kLogParamBound);
  if (noise_in_z) lo[lo.size() - 1] = std::log(noise_floor);
  return lo;
}

Eigen::VectorXd upper_bounds(const Kernel& k, bool noise_in_z) {
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(k.num_params() + (noise_in_z ? 1 : 0)), kLogParamBound);
  if (noise_in_z) hi[hi.size() - 1] = kMaxLogNoise;
  return hi;
}

/// Adds the log density of a Gamma(a, b) prior on exp(z_i) for every masked
/// log lengthscale, with its gradient in log space.
void add_lengthscale_prior(MllEval& e, const Eigen::VectorXd& z, const std::vector<bool>& mask,
                           const GpFitOptions& opts) {
  if (!e.ok || !(opts.lengthscale_prior_shape > 0.0)) return;
  const double a = opts.lengthscale_prior_shape, b = opts.lengthscale_prior_rate;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const auto k = static_cast<Eigen::Index>(i);
    const double ell = std::exp(z[k]);
    e.value += (a - 1.0) * z[k] - b * ell;
    if (e.grad.size() > k) e.grad[k] += (a - 1.0) - b * ell;
  }
}

std::vector<bool> lengthscale_mask(const Kernel& k) {
  std::vector<bool> mask;
  for (const auto& n : k.param_names()) mask.push_back(n.find("ell") != std::string::npos);
  return mask;
}

struct AscentResult {
  Eigen::VectorXd z;
  MllEval eval;
};

/// BFGS ascent on the MLL with projected backtracking; every accepted step
/// strictly increases the objective.
AscentResult ascend(const Kernel& kernel, const PairwiseTerms& terms, const Eigen::VectorXd& y,
                    Eigen::VectorXd z, bool noise_in_z, double fixed_noise,
                    const GpFitOptions& opts, const Eigen::VectorXd& lo,
                    const Eigen::VectorXd& hi) {
  z = z.cwiseMax(lo).cwiseMin(hi);
  const std::vector<bool> mask = lengthscale_mask(kernel);
  MllEval cur = evaluate_mll(kernel, terms, y, z, noise_in_z, fixed_noise, opts.jitter_ladder, true);
  add_lengthscale_prior(cur, z, mask, opts);
  if (!cur.ok) return {z, cur};
  const Eigen::Index d = z.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
  for (int step = 0; step < opts.max_steps; ++step) {
    // Projected gradient: ignore components pushing against an active bound.
    Eigen::VectorXd g = cur.grad;
    for (Eigen::Index i = 0; i < d; ++i)
      if ((z[i] <= lo[i] && g[i] < 0) || (z[i] >= hi[i] && g[i] > 0)) g[i] = 0.0;
    if (g.cwiseAbs().maxCoeff() < opts.grad_tol) break;
    Eigen::VectorXd dir = H * g;
    if (dir.dot(g) <= 0.0) {
      H.setIdentity();
      dir = g;
    }
    const double max_move = dir.cwiseAbs().maxCoeff();
    double t = max_move > 2.0 ? 2.0 / max_move : 1.0;
    bool accepted = false;
    MllEval next;
    Eigen::VectorXd z_new;
    for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
      z_new = (z + t * dir).cwiseMax(lo).cwiseMin(hi);
      if ((z_new - z).cwiseAbs().maxCoeff() < 1e-14) break;
      next = evaluate_mll(kernel, terms, y, z_new, noise_in_z, fixed_noise, opts.jitter_ladder,
                          true);
      add_lengthscale_prior(next, z_new, mask, opts);
      if (next.ok && next.value >= cur.value + 1e-4 * g.dot(z_new - z) && next.value > cur.value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const Eigen::VectorXd s = z_new - z;
    const Eigen::VectorXd yk = cur.grad - next.grad;  // gradient change of -MLL
    const double sy = s.dot(yk);
    const double gain = next.value - cur.value;
    z = z_new;
    cur = std::move(next);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      H = (I - rho * s * yk.transpose()) * H * (I - rho * yk * s.transpose()) +
          rho * s * s.transpose();
    }
    if (gain < 1e-10 * (1.0 + std::abs(cur.value))) break;
  }
  return {z, std::move(cur)};
}

}  // namespace

Standardized standardize(std::span<const double> y) {
  Standardized s;
  const auto n = static_cast<Eigen::Index>(y.size());
  s.values.resize(n);
  if (n == 0) return s;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  s.mean = mean;
  s.sd = std::max(std::sqrt(var), kSdFloor);
  for (Eigen::Index i = 0; i < n; ++i) s.values[i] = (y[static_cast<std::size_t>(i)] - mean) / s.sd;
  return s;
}

std::vector<double> destandardize(const Eigen::VectorXd& y_std, double mean, double sd) {
  std::vector<double> out(static_cast<std::size_t>(y_std.size()));
  for (Eigen::Index i = 0; i < y_std.size(); ++i) out[static_cast<std::size_t>(i)] = y_std[i] * sd + mean;
  return out;
}

Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& C, double floor) {
  Eigen::MatrixXd S = 0.5 * (C + C.transpose());
  if (S.rows() == 0) return S;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) return S;
  if (es.eigenvalues().minCoeff() >= floor) return S;
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(floor);
  S = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (S + S.transpose());
}

GpModel GpModel::condition(std::shared_ptr<const Kernel> kernel, std::span<const Design> X,
                           std::span<const double> y, const Eigen::VectorXd& log_params,
                           double noise, const std::vector<double>& jitter_ladder) {
  if (X.size() != y.size()) throw std::invalid_argument("X and y differ in length");
  if (static_cast<std::size_t>(log_params.size()) != kernel->num_params())
    throw std::invalid_argument("log parameter vector has wrong length");
  GpModel m;
  m.kernel_ = std::move(kernel);
  m.X_ = m.kernel_->prepare_all(X);
  m.train_terms_ = m.kernel_->terms(m.X_, m.X_);
  m.sinkhorn_warnings_ = m.train_terms_->sinkhorn_warnings;
  const Standardized s = standardize(y);
  m.y_mean_ = s.mean;
  m.y_sd_ = X.empty() ? 1.0 : s.sd;
  m.y_std_ = s.values;
  m.log_params_ = log_params;
  m.noise_ = noise;
  Eigen::VectorXd z(log_params.size() + 1);
  z << log_params, 0.0;
  const MllEval e = evaluate_mll(*m.kernel_, *m.train_terms_, m.y_std_, z, false, noise,
                                 jitter_ladder, false);
  if (!e.ok && !X.empty()) {
    Eigen::MatrixXd K;
    m.kernel_->gram(*m.train_terms_, log_params, K, nullptr);
    throw ModelFitError("Cholesky failed at every jitter level", min_eigenvalue(K));
  }
  m.L_ = e.fac.L;
  m.jitter_ = e.fac.jitter;
  m.jitter_level_ = e.fac.level;
  m.alpha_ = X.empty() ? Eigen::VectorXd() : e.alpha;
  return m;
}

Eigen::MatrixXd GpModel::cross_gram(std::span<const PreparedDesign> rows,
                                    std::span<const PreparedDesign> cols) const {
  const auto t = kernel_->terms(rows, cols);
  Eigen::MatrixXd K;
  kernel_->gram(*t, log_params_, K, nullptr);
  return K;
}

Posterior GpModel::posterior(std::span<const Design> Xq) const {
  const std::vector<PreparedDesign> p = kernel_->prepare_all(Xq);
  return posterior_prepared(p);
}

Posterior GpModel::posterior_prepared(std::span<const PreparedDesign> Xq) const {
  Posterior post;
  post.y_mean = y_mean_;
  post.y_sd = y_sd_;
  const Eigen::MatrixXd Kqq = cross_gram(Xq, Xq);
  if (X_.empty()) {
    post.mean = Eigen::VectorXd::Zero(Kqq.rows());
    post.cov = clamp_psd(Kqq);
    return post;
  }
  const Eigen::MatrixXd Kqx = cross_gram(Xq, X_);
  post.mean = Kqx * alpha_;
  const Eigen::MatrixXd V = L_.triangularView<Eigen::Lower>().solve(Kqx.transpose());
  post.cov = clamp_psd(Kqq - V.transpose() * V);
  return post;
}

double GpModel::log_marginal_likelihood(Eigen::VectorXd* grad) const {
  Eigen::VectorXd z(log_params_.size() + 1);
  z << log_params_, std::log(std::max(noise_, std::numeric_limits<double>::min()));
  const std::vector<double> ladder{jitter_level_};
  const MllEval e = evaluate_mll(*kernel_, *train_terms_, y_std_, z, noise_ > 0.0, noise_,
                                 ladder, grad != nullptr);
  if (!e.ok) throw ModelFitError("marginal likelihood undefined", std::nan(""));
  if (grad) {
    *grad = Eigen::VectorXd::Zero(z.size());
    grad->head(e.grad.size()) = e.grad;
  }
  return e.value;
}

GpModel fit(std::span<const Design> X, std::span<const double> y,
            std::shared_ptr<const Kernel> kernel, const GpFitOptions& opts) {
  if (X.size() < 2) throw std::invalid_argument("fit needs at least two observations");
  if (X.size() != y.size()) throw std::invalid_argument("X and y differ in length");
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("fit targets must be finite");

  GpModel m;
  m.kernel_ = std::move(kernel);
  m.X_ = m.kernel_->prepare_all(X);
  m.train_terms_ = m.kernel_->terms(m.X_, m.X_);
  m.sinkhorn_warnings_ = m.train_terms_->sinkhorn_warnings;
  const Standardized s = standardize(y);
  m.y_mean_ = s.mean;
  m.y_sd_ = s.sd;
  m.y_std_ = s.values;

  const bool noise_in_z = opts.learn_noise;
  const double fixed_noise = std::max(opts.noise_init, 0.0);
  const auto np = static_cast<Eigen::Index>(m.kernel_->num_params());
  Eigen::VectorXd z0(np + (noise_in_z ? 1 : 0));
  z0.head(np) = m.kernel_->initial_log_params(m.X_);
  if (noise_in_z) z0[np] = std::log(std::max(opts.noise_init, opts.noise_floor));
  const Eigen::VectorXd lo = lower_bounds(*m.kernel_, noise_in_z, opts.noise_floor);
  const Eigen::VectorXd hi = upper_bounds(*m.kernel_, noise_in_z);

  AscentResult best;
  bool have_best = false;
  const int restarts = opts.optimize ? std::max(1, opts.restarts) : 1;
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd z = z0;
    if (r > 0) {
      Rng rng = make_rng(opts.seed, static_cast<std::uint64_t>(r));
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += opts.restart_spread * standard_normal(rng);
    }
    AscentResult res;
    if (opts.optimize) {
      res = ascend(*m.kernel_, *m.train_terms_, m.y_std_, z, noise_in_z, fixed_noise, opts, lo, hi);
    } else {
      res.z = z;
      res.eval = evaluate_mll(*m.kernel_, *m.train_terms_, m.y_std_, z, noise_in_z, fixed_noise,
                              opts.jitter_ladder, false);
      add_lengthscale_prior(res.eval, z, lengthscale_mask(*m.kernel_), opts);
    }
    if (res.eval.ok && (!have_best || res.eval.value > best.eval.value)) {
      best = std::move(res);
      have_best = true;
    }
  }
  if (!have_best) {
    Eigen::MatrixXd K;
    m.kernel_->gram(*m.train_terms_, z0.head(np), K, nullptr);
    throw ModelFitError("Cholesky failed at every jitter level", min_eigenvalue(K));
  }
  m.log_params_ = best.z.head(np);
  m.noise_ = noise_in_z ? std::exp(best.z[np]) : fixed_noise;
  m.L_ = best.eval.fac.L;
  m.jitter_ = best.eval.fac.jitter;
  m.jitter_level_ = best.eval.fac.level;
  m.alpha_ = best.eval.alpha;
  return m;
}

}  // namespace permbo

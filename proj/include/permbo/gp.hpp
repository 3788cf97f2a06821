#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "permbo/kernels.hpp"

namespace permbo {

/// Raised when no jitter level yields a Cholesky factor.
class ModelFitError : public std::runtime_error {
 public:
  ModelFitError(const std::string& what, double lambda_min)
      : std::runtime_error(what), lambda_min_(lambda_min) {}
  double lambda_min() const { return lambda_min_; }

 private:
  double lambda_min_;
};

struct Standardized {
  Eigen::VectorXd values;
  double mean = 0.0;
  double sd = 1.0;
};

inline constexpr double kSdFloor = 1e-12;

/// Zero mean, unit (population) sd; sd floored at kSdFloor.
Standardized standardize(std::span<const double> y);
std::vector<double> destandardize(const Eigen::VectorXd& y_std, double mean, double sd);

/// Staged jitter: multiples of mean(diag K) tried in order.
inline const std::vector<double> kDefaultJitterLadder = {1e-6, 1e-5, 1e-4, 1e-3};

struct GpFitOptions {
  int restarts = 4;
  int max_steps = 200;
  double noise_init = 1e-4;
  double noise_floor = 1e-6;
  bool learn_noise = true;
  /// false: condition on the initial hyperparameters without optimizing.
  bool optimize = true;
  std::vector<double> jitter_ladder = kDefaultJitterLadder;
  std::uint64_t seed = 0;
  /// Standard deviation of the log-space perturbation applied to restarts 1..
  double restart_spread = 1.0;
  double grad_tol = 1e-5;
  /// Gamma(shape, rate) prior on every lengthscale during optimization; shape 0 disables it.
  double lengthscale_prior_shape = 0.0;
  double lengthscale_prior_rate = 0.0;
};

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double y_mean = 0.0;
  double y_sd = 1.0;

  Eigen::VectorXd sd() const { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }
  Eigen::VectorXd mean_original() const { return (mean.array() * y_sd + y_mean).matrix(); }
  Eigen::MatrixXd cov_original() const { return cov * (y_sd * y_sd); }
};

inline constexpr double kEigenFloor = 1e-12;

/// (C + C^T)/2 with eigenvalues raised to at least `floor`. The matrix is only
/// rebuilt from its eigendecomposition when some eigenvalue is below floor.
Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& C, double floor = kEigenFloor);

class GpModel {
 public:
  /// Exact GP conditioned on (X, y) at fixed hyperparameters. Targets are
  /// standardized internally. X may be empty (prior only).
  static GpModel condition(std::shared_ptr<const Kernel> kernel, std::span<const Design> X,
                           std::span<const double> y, const Eigen::VectorXd& log_params,
                           double noise, const std::vector<double>& jitter_ladder =
                                             kDefaultJitterLadder);

  const Kernel& kernel() const { return *kernel_; }
  std::shared_ptr<const Kernel> kernel_ptr() const { return kernel_; }
  std::span<const PreparedDesign> training() const { return X_; }
  std::size_t size() const { return X_.size(); }

  const Eigen::VectorXd& log_params() const { return log_params_; }
  double noise() const { return noise_; }
  double jitter_used() const { return jitter_; }
  double y_mean() const { return y_mean_; }
  double y_sd() const { return y_sd_; }
  const Eigen::VectorXd& y_std() const { return y_std_; }
  /// Lower factor of K + (noise + jitter) I.
  const Eigen::MatrixXd& chol() const { return L_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  int sinkhorn_warnings() const { return sinkhorn_warnings_; }

  /// Kernel matrix between two prepared lists at the fitted hyperparameters.
  Eigen::MatrixXd cross_gram(std::span<const PreparedDesign> rows,
                             std::span<const PreparedDesign> cols) const;

  Posterior posterior(std::span<const Design> Xq) const;
  Posterior posterior_prepared(std::span<const PreparedDesign> Xq) const;

  /// -1/2 y^T alpha - sum log diag L - n/2 log 2 pi, with the gradient with
  /// respect to [kernel log params..., log noise].
  double log_marginal_likelihood(Eigen::VectorXd* grad = nullptr) const;

 private:
  friend GpModel fit(std::span<const Design>, std::span<const double>,
                     std::shared_ptr<const Kernel>, const GpFitOptions&);

  std::shared_ptr<const Kernel> kernel_;
  std::vector<PreparedDesign> X_;
  std::shared_ptr<const PairwiseTerms> train_terms_;
  Eigen::VectorXd log_params_;
  double noise_ = 0.0;
  double jitter_ = 0.0;
  double jitter_level_ = 0.0;
  double y_mean_ = 0.0;
  double y_sd_ = 1.0;
  Eigen::VectorXd y_std_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd alpha_;
  int sinkhorn_warnings_ = 0;
};

/// Maximizes the marginal likelihood over log hyperparameters (and log noise
/// when learned) by multi-start quasi-Newton ascent with backtracking.
GpModel fit(std::span<const Design> X, std::span<const double> y,
            std::shared_ptr<const Kernel> kernel, const GpFitOptions& opts);

}  // namespace permbo

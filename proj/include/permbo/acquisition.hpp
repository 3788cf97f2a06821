#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "permbo/design.hpp"
#include "permbo/gp.hpp"

namespace permbo {

struct BarrierConfig {
  double margin = 0.0;
  double weight = 1.0;
  double sharpness = 20.0;
};

struct AcquisitionConfig {
  std::size_t q = 1;
  std::size_t mc_samples = 128;
  double tau0 = 1e-4;
  double tau_max = 1e-2;
  std::size_t restarts = 10;
  std::size_t raw_samples = 256;
  std::size_t ascent_steps = 50;
  double fd_step = 1e-3;
  std::optional<BarrierConfig> barrier;

  void validate() const;
};

/// Signed distance at a point in the coordinates the acquisition works in.
using SdfQuery = std::function<double(Point2)>;

/// log(tau * softplus(x / tau)) without overflow or log(0).
double log_softplus(double x, double tau);
double softplus(double x);

/// Smoothed log expected batch improvement from a joint Gaussian over the q
/// batch members. base_samples is M x q standard normal.
double qlogei_from_posterior(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double f_best,
                             const AcquisitionConfig& cfg, const Eigen::MatrixXd& base_samples);

/// qLogEI of a batch under the model, with f_best in original target units.
/// The value is reported in standardized units.
double qlogei(const GpModel& model, std::span<const Design> batch, double f_best,
              const AcquisitionConfig& cfg, const Eigen::MatrixXd& base_samples);

/// weight * sum softplus((margin - sdf(p)) * sharpness) / sharpness
double barrier_penalty(std::span<const Point2> points, const SdfQuery& field,
                       const BarrierConfig& barrier);

struct AcquisitionResult {
  std::vector<Design> batch;
  double value = 0.0;
  /// Best value among the raw quasi-random batches.
  double best_raw_value = 0.0;
  std::size_t evaluations = 0;
};

/// Maximizes qLogEI minus the optional barrier over batches of q designs whose
/// coordinates all lie in [0,1]. Raw Sobol batches seed `restarts` projected
/// finite-difference ascents; the best refined batch is returned.
AcquisitionResult optimize_acquisition(const GpModel& model, double f_best,
                                       const AcquisitionConfig& cfg, std::uint64_t seed,
                                       const SdfQuery* field = nullptr);

}  // namespace permbo

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "permbo/acquisition.hpp"
#include "permbo/bo_engine.hpp"
#include "permbo/gp.hpp"
#include "permbo/kernels.hpp"

namespace permbo {

inline constexpr std::array<double, 3> kPsdDeltas{1e-10, 1e-8, 1e-6};

/// Smallest eigenvalue of the symmetric part of K; NaN with *ok = false when
/// the eigensolver fails.
double min_eigenvalue(const Eigen::MatrixXd& K, bool* ok = nullptr);

struct PsdGroup {
  std::string variant;
  std::size_t N = 0;
  std::vector<double> lambda_min;
  /// Eigensolver failures; counted as violations at every delta.
  std::size_t failures = 0;
  double median = 0.0;
  double mean = 0.0;
  double min = 0.0;
  std::array<double, 3> violation{};
};

struct PsdReport {
  std::array<double, 3> deltas = kPsdDeltas;
  std::vector<PsdGroup> groups;
};

/// Summary statistics of a list of lambda_min values (NaN marks a failure).
PsdGroup summarize_psd(std::string variant, std::size_t N, std::vector<double> lambda_min);

struct PsdVariant {
  std::string name;
  std::shared_ptr<const Kernel> kernel;
  Eigen::VectorXd log_params;
};

/// For every variant and N, `draws` kernel matrices over N designs uniform in
/// [0,1]^d (no jitter, no noise). Draw k of size N uses the same designs for every variant.
PsdReport psd_stress_offline(const std::vector<PsdVariant>& variants, const DesignShape& shape,
                             const std::vector<std::size_t>& sizes, std::size_t draws,
                             std::uint64_t seed, std::size_t threads = 1);

struct TrainingPsd {
  /// lambda[trial][t] for the training prefix available at iteration t.
  std::vector<std::vector<double>> lambda;
  std::vector<double> median_per_iteration;
  PsdGroup overall;
};

/// Kernel matrices over the first min(cap, n_t) normalized training inputs
/// seen by iteration t of every completed trial.
TrainingPsd psd_stress_training(const std::vector<TrialRecord>& trials, const Bounds& bounds,
                                const PsdVariant& variant, std::size_t cap = 64);

struct PosteriorDiagnostics {
  double rho_qlogei = 0.0;
  /// false when max over Z of qLogEI is 0.
  bool rho_defined = true;
  double mean_sigma_Z = 0.0;
  double sigma_next = 0.0;
  double abs_mean_std_residual = 0.0;
};

inline constexpr double kResidualSdFloor = 1e-12;

/// size batches of q normalized designs from a seeded Sobol sequence.
std::vector<std::vector<Design>> probe_batches(const DesignShape& shape, std::size_t q,
                                               std::size_t size, std::uint64_t seed);

/// Standard deviations are in original target units. f_best is in original units.
PosteriorDiagnostics posterior_diagnostics(const GpModel& model,
                                           const std::vector<std::vector<Design>>& probes,
                                           std::span<const Design> next, std::span<const double> y_next,
                                           double f_best, const AcquisitionConfig& cfg,
                                           const Eigen::MatrixXd& base_samples);

}  // namespace permbo

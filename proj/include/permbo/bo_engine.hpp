#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "permbo/acquisition.hpp"
#include "permbo/benchmarks.hpp"
#include "permbo/feasibility.hpp"
#include "permbo/gp.hpp"
#include "permbo/kernels.hpp"

namespace permbo {

/// Native box: every well coordinate in [lower, upper], v[i] in [v_lower[i], v_upper[i]].
struct Bounds {
  double lower = -1.0;
  double upper = 1.0;
  std::vector<double> v_lower;
  std::vector<double> v_upper;

  void validate(const DesignShape& shape) const;
};

/// Affine map to [0,1]. Out-of-range coordinates are clamped and *clamped set.
Design normalize(const Design& x, const Bounds& b, bool* clamped = nullptr);
Design unnormalize(const Design& u, const Bounds& b, bool* clamped = nullptr);

/// Non-finite values become min(valid) - margin * max(range(valid), 1).
/// Throws std::invalid_argument when nothing is valid.
std::vector<double> penalize_invalid(std::span<const double> raw, double margin = 0.1);

struct FeasibilityConfig {
  MaskKind kind = MaskKind::TwoLobes;
  std::size_t nx = 24;
  std::size_t ny = 24;
  std::uint64_t seed = 0;
  /// When set, the mask is read from this file instead of generated.
  std::string file;
  std::size_t k_nearest = 8;
  bool use_barrier = true;
  BarrierConfig barrier{0.0, 1.0, 20.0};
};

struct RunConfig {
  BenchmarkSpec benchmark = default_spec(BenchmarkId::TwosetAblation);
  KernelFamily surrogate = KernelFamily::GpPerm;
  GpPermOptions gp_perm;
  GpFitOptions fit;
  AcquisitionConfig acquisition;
  std::optional<FeasibilityConfig> feasibility;
  std::size_t n_trials = 1;
  std::size_t n_init = 6;
  std::size_t T = 10;
  std::uint64_t base_seed = 0;
  double penalty_margin = 0.1;
  /// Label carried into outputs (sweeps).
  std::string variant = "default";
  bool timing = false;

  std::size_t q() const { return acquisition.q; }
  std::size_t total_evaluations() const { return n_init + T * q(); }
  void validate() const;
};

struct Evaluation {
  Design x;
  double raw = 0.0;
  std::size_t iteration = 0;
};

struct TrialRecord {
  std::size_t trial_index = 0;
  std::uint64_t seed = 0;
  std::vector<Evaluation> evaluations;
  /// b_0 after initialization, then one entry per iteration.
  std::vector<double> best_so_far;
  /// Best raw value of each iteration's batch (index 0: the initial design).
  std::vector<double> iteration_best;
  /// Milliseconds spent in fit, acquisition and evaluation per iteration (timing only).
  std::vector<std::array<double, 3>> phase_ms;
  /// Iterations that fell back to a random feasible batch.
  std::vector<std::size_t> fit_failures;
  std::string error;

  bool ok() const { return error.empty(); }
};

/// Everything a trial needs that does not depend on the trial index.
class Problem {
 public:
  explicit Problem(const RunConfig& cfg);

  const RunConfig& config() const { return cfg_; }
  const Benchmark& benchmark() const { return bench_; }
  const Bounds& bounds() const { return bounds_; }
  DesignShape shape() const { return bench_.shape(); }
  const GridMask* mask() const { return mask_ ? &*mask_ : nullptr; }
  const std::vector<double>& interior() const { return interior_; }
  const SdfField* sdf() const { return sdf_ ? &*sdf_ : nullptr; }
  std::shared_ptr<const Kernel> make_kernel() const;

 private:
  RunConfig cfg_;
  Benchmark bench_;
  Bounds bounds_;
  std::optional<GridMask> mask_;
  std::vector<double> interior_;
  std::optional<SdfField> sdf_;
};

/// Initial designs in native coordinates: Sobol for continuous inputs, and
/// interior-weighted distinct cells for the wells when a mask is present.
std::vector<Design> initial_design(const Problem& p, std::uint64_t seed);

/// Random batch in native coordinates (snapped when a mask is present).
std::vector<Design> random_batch(const Problem& p, std::size_t q, Rng& rng);

/// Called after each BO iteration with the fitted model (normalized inputs),
/// the evaluated batch in normalized coordinates, and the realized values.
using IterationObserver = std::function<void(std::size_t iteration, const GpModel& model,
                                             std::span<const Design> batch_normalized,
                                             std::span<const double> values)>;

TrialRecord run_trial(const Problem& p, std::size_t trial_index,
                      const IterationObserver* observer = nullptr);

struct TrialSummary {
  double auc = 0.0;
  double final_best = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  std::vector<TrialSummary> summaries;
  double auc_mean = 0.0, auc_std = 0.0;
  double final_mean = 0.0, final_std = 0.0;
  std::size_t completed = 0;
  /// Fewer than two completed trials: the std fields are 0 and meaningless.
  bool std_undefined = false;
};

/// Builds the observer for one trial; it runs on that trial's thread.
using ObserverFactory = std::function<IterationObserver(std::size_t trial_index)>;

/// Trials use seeds base_seed + index and are spread statically over threads.
ExperimentResult run_experiment(const RunConfig& cfg, std::size_t threads = 1,
                                const ObserverFactory& observers = {});

}  // namespace permbo

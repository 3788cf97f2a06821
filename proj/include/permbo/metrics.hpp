#pragma once

#include <span>
#include <vector>

namespace permbo {

struct AucFinal {
  double auc = 0.0;
  double final_best = 0.0;
};

/// best_so_far holds b_0..b_T; AUC sums b_1..b_T and final is b_T.
AucFinal auc_and_final(std::span<const double> best_so_far);

struct Normalized {
  std::vector<double> values;
  /// max == min: every value is 0.5.
  bool degenerate = false;
};

Normalized minmax_normalize(std::span<const double> values);

/// One benchmark's raw metrics for one variant, one entry per trial.
struct VariantMetrics {
  std::vector<double> auc;
  std::vector<double> final_best;
};

struct SelectionResult {
  std::vector<double> scores;
  std::size_t best = 0;
  /// Benchmarks whose AUC or final spread was degenerate.
  std::vector<std::size_t> degenerate_benchmarks;
};

/// metrics[b][v]: benchmark b, variant v. Metrics are min-max normalized per
/// benchmark over all trials of all variants; the score is the mean over
/// benchmarks of the per-trial mean of (AUC + final) / 2. Ties go to the lower index.
SelectionResult selection_score(const std::vector<std::vector<VariantMetrics>>& metrics);

double mean(std::span<const double> x);
/// Sample standard deviation; 0 for fewer than two values.
double sample_std(std::span<const double> x);

}  // namespace permbo

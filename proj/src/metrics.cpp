#include "permbo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace permbo {

AucFinal auc_and_final(std::span<const double> b) {
  if (b.empty()) throw std::invalid_argument("empty best-so-far trajectory");
  AucFinal out;
  for (std::size_t t = 1; t < b.size(); ++t) out.auc += b[t];
  out.final_best = b.back();
  return out;
}

Normalized minmax_normalize(std::span<const double> values) {
  Normalized out;
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, range = *hi - *lo;
  out.degenerate = !(range > 0.0);
  for (double v : values) out.values.push_back(out.degenerate ? 0.5 : (v - min) / range);
  return out;
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

SelectionResult selection_score(const std::vector<std::vector<VariantMetrics>>& metrics) {
  if (metrics.empty() || metrics[0].empty()) throw std::invalid_argument("no variants to score");
  const std::size_t V = metrics[0].size();
  SelectionResult out;
  out.scores.assign(V, 0.0);
  for (std::size_t b = 0; b < metrics.size(); ++b) {
    const auto& row = metrics[b];
    if (row.size() != V) throw std::invalid_argument("every benchmark needs every variant");
    std::vector<double> auc, fin;
    for (const auto& m : row) {
      if (m.auc.size() != m.final_best.size() || m.auc.empty())
        throw std::invalid_argument("variant metrics need one AUC and final per trial");
      auc.insert(auc.end(), m.auc.begin(), m.auc.end());
      fin.insert(fin.end(), m.final_best.begin(), m.final_best.end());
    }
    const Normalized na = minmax_normalize(auc), nf = minmax_normalize(fin);
    if (na.degenerate || nf.degenerate) out.degenerate_benchmarks.push_back(b);
    std::size_t at = 0;
    for (std::size_t v = 0; v < V; ++v) {
      const std::size_t n = row[v].auc.size();
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k, ++at) s += 0.5 * (na.values[at] + nf.values[at]);
      out.scores[v] += s / static_cast<double>(n) / static_cast<double>(metrics.size());
    }
  }
  out.best = static_cast<std::size_t>(std::max_element(out.scores.begin(), out.scores.end()) -
                                      out.scores.begin());
  return out;
}

}  // namespace permbo

// Shared generators and brute-force oracles for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "permbo/design.hpp"
#include "permbo/sampling.hpp"

namespace permbo::testing {

inline PointSet random_set(Rng& rng, std::size_t m, double lo = -1.0, double hi = 1.0) {
  PointSet s(m);
  for (auto& p : s) p = {uniform(rng, lo, hi), uniform(rng, lo, hi)};
  return s;
}

inline Design random_design(Rng& rng, const DesignShape& shape, double lo = 0.0, double hi = 1.0) {
  Design x;
  x.v.resize(shape.dv);
  for (double& v : x.v) v = uniform(rng, lo, hi);
  x.inj = random_set(rng, shape.n_inj, lo, hi);
  x.prod = random_set(rng, shape.n_prod, lo, hi);
  return x;
}

template <class T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

inline Design permuted(Rng& rng, Design x) {
  shuffle(rng, x.inj);
  shuffle(rng, x.prod);
  return x;
}

/// Exact W1 between equal-size uniform sets by enumerating every assignment.
inline double brute_force_w1(const PointSet& S, const PointSet& T) {
  std::vector<std::size_t> perm(S.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t a = 0; a < S.size(); ++a) c += distance(S[a], T[perm[a]]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(S.size());
}

/// Gibbs-kernel double-sum MMD^2 with k = exp(-C/eps).
inline double gibbs_mmd2(const PointSet& S, const PointSet& T, double eps) {
  auto mean_k = [eps](const PointSet& A, const PointSet& B) {
    double s = 0.0;
    for (const auto& a : A)
      for (const auto& b : B) s += std::exp(-distance(a, b) / eps);
    return s / static_cast<double>(A.size() * B.size());
  };
  return mean_k(S, S) + mean_k(T, T) - 2.0 * mean_k(S, T);
}

/// Heaviest spanning tree by decoding every Pruefer sequence of length n-2.
inline double cayley_max_tree(const PointSet& S) {
  const std::size_t n = S.size();
  std::vector<std::size_t> seq(n - 2, 0);
  double best = -1.0;
  while (true) {
    std::vector<std::size_t> degree(n, 1);
    for (std::size_t v : seq) ++degree[v];
    double w = 0.0;
    for (std::size_t v : seq) {
      std::size_t leaf = 0;
      while (degree[leaf] != 1) ++leaf;
      w += distance(S[leaf], S[v]);
      --degree[leaf];
      --degree[v];
    }
    std::size_t u = n, v = n;
    for (std::size_t i = 0; i < n; ++i)
      if (degree[i] == 1) (u == n ? u : v) = i;
    w += distance(S[u], S[v]);
    best = std::max(best, w);
    std::size_t k = 0;
    while (k < seq.size() && ++seq[k] == n) seq[k++] = 0;
    if (k == seq.size()) break;
  }
  return best;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace permbo::testing

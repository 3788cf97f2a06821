#include "permbo/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "permbo/metrics.hpp"
#include "permbo/sampling.hpp"

namespace permbo {

double min_eigenvalue(const Eigen::MatrixXd& K, bool* ok) {
  const Eigen::MatrixXd S = 0.5 * (K + K.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const bool good = es.info() == Eigen::Success && es.eigenvalues().allFinite();
  if (ok) *ok = good;
  return good ? es.eigenvalues().minCoeff() : std::numeric_limits<double>::quiet_NaN();
}

PsdGroup summarize_psd(std::string variant, std::size_t N, std::vector<double> lambda_min) {
  PsdGroup g;
  g.variant = std::move(variant);
  g.N = N;
  g.lambda_min = std::move(lambda_min);
  std::vector<double> good;
  for (double l : g.lambda_min) {
    if (std::isnan(l)) {
      ++g.failures;
    } else {
      good.push_back(l);
    }
  }
  if (!good.empty()) {
    std::sort(good.begin(), good.end());
    const std::size_t n = good.size();
    g.median = n % 2 ? good[n / 2] : 0.5 * (good[n / 2 - 1] + good[n / 2]);
    g.mean = mean(good);
    g.min = good.front();
  }
  const double total = static_cast<double>(g.lambda_min.size());
  for (std::size_t k = 0; k < kPsdDeltas.size(); ++k) {
    std::size_t bad = g.failures;
    for (double l : good)
      if (l < -kPsdDeltas[k]) ++bad;
    g.violation[k] = total > 0 ? static_cast<double>(bad) / total : 0.0;
  }
  return g;
}

namespace {

std::vector<Design> uniform_designs(const DesignShape& shape, std::size_t N, Rng& rng) {
  std::vector<Design> X;
  std::vector<double> flat(shape.flat_dim());
  for (std::size_t i = 0; i < N; ++i) {
    for (double& u : flat) u = uniform01(rng);
    X.push_back(unflatten(flat, shape));
  }
  return X;
}

}  // namespace

PsdReport psd_stress_offline(const std::vector<PsdVariant>& variants, const DesignShape& shape,
                             const std::vector<std::size_t>& sizes, std::size_t draws,
                             std::uint64_t seed, std::size_t threads) {
  for (std::size_t N : sizes)
    if (N < 2) throw std::invalid_argument("psd stress test needs N >= 2");
  PsdReport report;
  for (const auto& v : variants)
    for (std::size_t si = 0; si < sizes.size(); ++si) {
      const std::size_t N = sizes[si];
      std::vector<double> lambda(draws);
      auto work = [&](std::size_t k0, std::size_t stride) {
        for (std::size_t k = k0; k < draws; k += stride) {
          Rng rng = make_rng(seed, si * 1000003ULL + k);
          const auto X = uniform_designs(shape, N, rng);
          lambda[k] = min_eigenvalue(v.kernel->matrix(X, v.log_params));
        }
      };
      const std::size_t T = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(draws, 1));
      if (T == 1) {
        work(0, 1);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < T; ++t) pool.emplace_back(work, t, T);
        for (auto& th : pool) th.join();
      }
      report.groups.push_back(summarize_psd(v.name, N, std::move(lambda)));
    }
  return report;
}

TrainingPsd psd_stress_training(const std::vector<TrialRecord>& trials, const Bounds& bounds,
                                const PsdVariant& variant, std::size_t cap) {
  if (cap == 0) throw std::invalid_argument("prefix cap must be positive");
  TrainingPsd out;
  std::vector<double> all;
  std::size_t iterations = 0;
  for (const auto& r : trials) {
    if (!r.ok()) continue;
    const std::size_t T = r.best_so_far.size();
    iterations = std::max(iterations, T);
    std::vector<double> per;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<Design> X;
      for (const auto& e : r.evaluations)
        if (e.iteration <= t && X.size() < cap) X.push_back(normalize(e.x, bounds));
      per.push_back(min_eigenvalue(variant.kernel->matrix(X, variant.log_params)));
      all.push_back(per.back());
    }
    out.lambda.push_back(std::move(per));
  }
  for (std::size_t t = 0; t < iterations; ++t) {
    std::vector<double> col;
    for (const auto& per : out.lambda)
      if (t < per.size() && !std::isnan(per[t])) col.push_back(per[t]);
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    out.median_per_iteration.push_back(n == 0 ? std::numeric_limits<double>::quiet_NaN()
                                       : n % 2 ? col[n / 2]
                                               : 0.5 * (col[n / 2 - 1] + col[n / 2]));
  }
  out.overall = summarize_psd(variant.name, cap, std::move(all));
  return out;
}

std::vector<std::vector<Design>> probe_batches(const DesignShape& shape, std::size_t q,
                                               std::size_t size, std::uint64_t seed) {
  const std::size_t d = shape.flat_dim();
  const Eigen::MatrixXd U = shifted_sobol(size, q * d, seed);
  std::vector<std::vector<Design>> out(size);
  std::vector<double> flat(d);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t m = 0; m < q; ++m) {
      for (std::size_t c = 0; c < d; ++c)
        flat[c] = U(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m * d + c));
      out[r].push_back(unflatten(flat, shape));
    }
  return out;
}

PosteriorDiagnostics posterior_diagnostics(const GpModel& model,
                                           const std::vector<std::vector<Design>>& probes,
                                           std::span<const Design> next, std::span<const double> y_next,
                                           double f_best, const AcquisitionConfig& cfg,
                                           const Eigen::MatrixXd& base_samples) {
  if (probes.empty() || next.empty() || next.size() != y_next.size())
    throw std::invalid_argument("posterior diagnostics need probes and a realized batch");
  PosteriorDiagnostics d;
  AcquisitionConfig c = cfg;
  c.q = next.size();
  double zmax = -std::numeric_limits<double>::infinity();
  double sigma_sum = 0.0;
  std::size_t sigma_n = 0;
  for (const auto& z : probes) {
    zmax = std::max(zmax, qlogei(model, z, f_best, c, base_samples));
    const Posterior pz = model.posterior(z);
    for (Eigen::Index i = 0; i < pz.cov.rows(); ++i) {
      sigma_sum += std::sqrt(std::max(pz.cov(i, i), 0.0)) * pz.y_sd;
      ++sigma_n;
    }
  }
  const double xq = qlogei(model, next, f_best, c, base_samples);
  d.rho_defined = zmax != 0.0 && std::isfinite(zmax);
  d.rho_qlogei = d.rho_defined ? xq / zmax : std::numeric_limits<double>::quiet_NaN();
  d.mean_sigma_Z = sigma_sum / static_cast<double>(sigma_n);

  const Posterior pn = model.posterior(next);
  const Eigen::VectorXd mu = pn.mean_original();
  double s = 0.0, r = 0.0;
  for (std::size_t i = 0; i < next.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double sd = std::sqrt(std::max(pn.cov(ii, ii), 0.0)) * pn.y_sd;
    s += sd;
    r += (y_next[i] - mu[ii]) / std::max(sd, kResidualSdFloor);
  }
  d.sigma_next = s / static_cast<double>(next.size());
  d.abs_mean_std_residual = std::abs(r / static_cast<double>(next.size()));
  return d;
}

}  // namespace permbo

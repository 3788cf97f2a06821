#include "permbo/bo_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "permbo/metrics.hpp"
#include "permbo/sampling.hpp"

namespace permbo {

void Bounds::validate(const DesignShape& shape) const {
  if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper))
    throw std::invalid_argument("well bounds must be finite with lower < upper");
  if (v_lower.size() != shape.dv || v_upper.size() != shape.dv)
    throw std::invalid_argument("continuous bounds do not match the design shape");
  for (std::size_t i = 0; i < shape.dv; ++i)
    if (!(std::isfinite(v_lower[i]) && std::isfinite(v_upper[i]) && v_lower[i] < v_upper[i]))
      throw std::invalid_argument("continuous bounds must be finite with lower < upper");
}

namespace {

double to_unit(double x, double lo, double hi, bool* clamped) {
  const double u = (x - lo) / (hi - lo);
  if (u < 0.0 || u > 1.0) {
    if (clamped) *clamped = true;
    return std::clamp(u, 0.0, 1.0);
  }
  return u;
}

double from_unit(double u, double lo, double hi, bool* clamped) {
  if (u < 0.0 || u > 1.0) {
    if (clamped) *clamped = true;
    u = std::clamp(u, 0.0, 1.0);
  }
  return lo + u * (hi - lo);
}

template <class F>
Design map_design(const Design& x, const Bounds& b, F f) {
  Design out = x;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = f(out.v[i], b.v_lower.at(i), b.v_upper.at(i));
  for (auto* set : {&out.inj, &out.prod})
    for (auto& p : *set) p = {f(p.x, b.lower, b.upper), f(p.y, b.lower, b.upper)};
  return out;
}

}  // namespace

Design normalize(const Design& x, const Bounds& b, bool* clamped) {
  return map_design(x, b, [&](double v, double lo, double hi) { return to_unit(v, lo, hi, clamped); });
}

Design unnormalize(const Design& u, const Bounds& b, bool* clamped) {
  return map_design(u, b, [&](double v, double lo, double hi) { return from_unit(v, lo, hi, clamped); });
}

std::vector<double> penalize_invalid(std::span<const double> raw, double margin) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : raw)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!std::isfinite(lo)) throw std::invalid_argument("no valid observation to anchor the penalty");
  const double penalty = lo - margin * std::max(hi - lo, 1.0);
  std::vector<double> out(raw.begin(), raw.end());
  for (double& v : out)
    if (!std::isfinite(v)) v = penalty;
  return out;
}

void RunConfig::validate() const {
  benchmark.validate();
  acquisition.validate();
  gp_perm.sinkhorn.validate();
  if (n_trials == 0) throw std::invalid_argument("n_trials must be positive");
  if (n_init < 2) throw std::invalid_argument("n_init must be at least 2");
  if (!(penalty_margin > 0.0)) throw std::invalid_argument("penalty_margin must be positive");
  if (fit.restarts < 1 || fit.max_steps < 0) throw std::invalid_argument("invalid fit options");
  if (feasibility) {
    const auto& f = *feasibility;
    if (f.file.empty() && (f.nx < 4 || f.ny < 4)) throw std::invalid_argument("mask needs nx, ny >= 4");
    if (f.k_nearest == 0) throw std::invalid_argument("k_nearest must be positive");
    if (!(f.barrier.sharpness > 0.0) || f.barrier.weight < 0.0)
      throw std::invalid_argument("barrier needs sharpness > 0 and weight >= 0");
  }
}

Problem::Problem(const RunConfig& cfg) : cfg_(cfg), bench_((cfg.validate(), cfg.benchmark)) {
  const DesignShape shape = bench_.shape();
  bounds_.lower = cfg.benchmark.lower;
  bounds_.upper = cfg.benchmark.upper;
  bounds_.v_lower.assign(shape.dv, 0.0);
  bounds_.v_upper.assign(shape.dv, 1.0);
  bounds_.validate(shape);
  if (cfg.feasibility) {
    const auto& f = *cfg.feasibility;
    SyntheticMaskOptions opts;
    opts.lower = bounds_.lower;
    opts.upper = bounds_.upper;
    mask_ = f.file.empty() ? synthetic_mask(f.kind, f.nx, f.ny, f.seed, opts) : read_mask_file(f.file);
    if (mask_->num_feasible() < shape.num_wells())
      throw InfeasibleDesignError("mask has fewer feasible cells than wells");
    interior_ = interior_score(*mask_);
    sdf_ = sdf_from_mask(*mask_);
  }
}

std::shared_ptr<const Kernel> Problem::make_kernel() const {
  const DesignShape shape = bench_.shape();
  switch (cfg_.surrogate) {
    case KernelFamily::GpPerm: return make_gp_perm_kernel(shape, cfg_.gp_perm);
    case KernelFamily::Flat: return make_flat_kernel(shape);
    case KernelFamily::DoubleSum: return make_set_kernel(shape, SetKernelKind::DoubleSum);
    case KernelFamily::DeepEmbedding: return make_set_kernel(shape, SetKernelKind::DeepEmbedding);
  }
  throw std::logic_error("unknown surrogate");
}

namespace {

Design wells_from_cells(const Problem& p, std::vector<double> v, const std::vector<std::size_t>& cells) {
  const DesignShape shape = p.shape();
  Design x{std::move(v), {}, {}};
  for (std::size_t w = 0; w < cells.size(); ++w)
    (w < shape.n_inj ? x.inj : x.prod).push_back(p.mask()->center(cells[w]));
  return x;
}

std::vector<double> unit_v(const Problem& p, const Eigen::MatrixXd& V, Eigen::Index row) {
  std::vector<double> v;
  for (std::size_t i = 0; i < p.shape().dv; ++i)
    v.push_back(p.bounds().v_lower[i] +
                V(row, static_cast<Eigen::Index>(i)) * (p.bounds().v_upper[i] - p.bounds().v_lower[i]));
  return v;
}

}  // namespace

std::vector<Design> initial_design(const Problem& p, std::uint64_t seed) {
  const DesignShape shape = p.shape();
  const std::size_t n = p.config().n_init;
  std::vector<Design> out;
  if (!p.mask()) {
    const Eigen::MatrixXd U = shifted_sobol(n, shape.flat_dim(), seed);
    for (Eigen::Index r = 0; r < U.rows(); ++r) {
      std::vector<double> flat(shape.flat_dim());
      for (std::size_t c = 0; c < flat.size(); ++c) flat[c] = U(r, static_cast<Eigen::Index>(c));
      out.push_back(unnormalize(unflatten(flat, shape), p.bounds()));
    }
    return out;
  }
  const Eigen::MatrixXd V = shape.dv ? shifted_sobol(n, shape.dv, seed) : Eigen::MatrixXd(n, 0);
  Rng rng = make_rng(seed, 1);
  for (std::size_t k = 0; k < n; ++k)
    out.push_back(wells_from_cells(p, unit_v(p, V, static_cast<Eigen::Index>(k)),
                                   sample_cells(*p.mask(), p.interior(), shape.num_wells(), rng)));
  return out;
}

std::vector<Design> random_batch(const Problem& p, std::size_t q, Rng& rng) {
  const DesignShape shape = p.shape();
  std::vector<Design> out;
  for (std::size_t k = 0; k < q; ++k) {
    std::vector<double> flat(shape.flat_dim());
    for (double& u : flat) u = uniform01(rng);
    Design x = unnormalize(unflatten(flat, shape), p.bounds());
    if (p.mask()) x = wells_from_cells(p, x.v, sample_cells(*p.mask(), p.interior(), shape.num_wells(), rng));
    out.push_back(std::move(x));
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double best_valid(std::span<const double> v) {
  double b = -std::numeric_limits<double>::infinity();
  for (double x : v)
    if (std::isfinite(x)) b = std::max(b, x);
  return b;
}

}  // namespace

TrialRecord run_trial(const Problem& p, std::size_t trial_index, const IterationObserver* observer) {
  const RunConfig& cfg = p.config();
  TrialRecord rec;
  rec.trial_index = trial_index;
  rec.seed = cfg.base_seed + trial_index;
  try {
    const auto kernel = p.make_kernel();
    auto evaluate = [&](const std::vector<Design>& batch, std::size_t it) {
      std::vector<double> vals;
      for (const auto& x : batch) {
        vals.push_back(p.benchmark()(x));
        rec.evaluations.push_back({x, vals.back(), it});
      }
      return vals;
    };

    const auto init = evaluate(initial_design(p, rec.seed), 0);
    rec.iteration_best.push_back(best_valid(init));
    rec.best_so_far.push_back(rec.iteration_best.back());

    const double span = p.bounds().upper - p.bounds().lower;
    const SdfQuery field = [&](Point2 u) {
      return (*p.sdf())({p.bounds().lower + u.x * span, p.bounds().lower + u.y * span});
    };
    const bool barrier = p.sdf() && cfg.feasibility->use_barrier;
    AcquisitionConfig acq = cfg.acquisition;
    if (barrier) acq.barrier = cfg.feasibility->barrier;

    Rng rng = make_rng(rec.seed, 2);
    for (std::size_t t = 1; t <= cfg.T; ++t) {
      std::array<double, 3> ms{};
      auto t0 = Clock::now();
      std::vector<Design> batch;
      std::optional<GpModel> model;
      try {
        std::vector<Design> Xn;
        std::vector<double> raw;
        for (const auto& e : rec.evaluations) {
          Xn.push_back(normalize(e.x, p.bounds()));
          raw.push_back(e.raw);
        }
        const auto targets = penalize_invalid(raw, cfg.penalty_margin);
        GpFitOptions fo = cfg.fit;
        fo.seed = splitmix64(rec.seed ^ splitmix64(t));
        model = fit(Xn, targets, kernel, fo);
        ms[0] = ms_since(t0);
        t0 = Clock::now();
        const double f_best = *std::max_element(targets.begin(), targets.end());
        const auto res = optimize_acquisition(*model, f_best, acq, splitmix64(rec.seed + 0x9E3779B97F4A7C15ULL * t),
                                              barrier ? &field : nullptr);
        for (const auto& u : res.batch) {
          Design x = unnormalize(u, p.bounds());
          if (p.mask()) x = snap_design(x, *p.mask(), p.interior(), cfg.feasibility->k_nearest);
          batch.push_back(std::move(x));
        }
        ms[1] = ms_since(t0);
      } catch (const std::exception&) {
        rec.fit_failures.push_back(t);
        model.reset();
        batch = random_batch(p, cfg.q(), rng);
      }
      t0 = Clock::now();
      const auto vals = evaluate(batch, t);
      ms[2] = ms_since(t0);
      rec.iteration_best.push_back(best_valid(vals));
      rec.best_so_far.push_back(std::max(rec.best_so_far.back(), rec.iteration_best.back()));
      if (cfg.timing) rec.phase_ms.push_back(ms);
      if (observer && model) {
        std::vector<Design> bn;
        for (const auto& x : batch) bn.push_back(normalize(x, p.bounds()));
        (*observer)(t, *model, bn, vals);
      }
    }
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

ExperimentResult run_experiment(const RunConfig& cfg, std::size_t threads,
                                const ObserverFactory& observers) {
  const Problem problem(cfg);
  ExperimentResult out;
  out.trials.resize(cfg.n_trials);
  threads = std::clamp<std::size_t>(threads, 1, cfg.n_trials);
  auto work = [&](std::size_t k) {
    for (std::size_t i = k; i < cfg.n_trials; i += threads) {
      const IterationObserver obs = observers ? observers(i) : IterationObserver{};
      out.trials[i] = run_trial(problem, i, obs ? &obs : nullptr);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(work, k);
    for (auto& th : pool) th.join();
  }

  std::vector<double> aucs, finals;
  for (const auto& r : out.trials) {
    TrialSummary s{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    if (r.ok()) {
      const AucFinal af = auc_and_final(r.best_so_far);
      s = {af.auc, af.final_best};
      aucs.push_back(af.auc);
      finals.push_back(af.final_best);
    }
    out.summaries.push_back(s);
  }
  out.completed = aucs.size();
  out.std_undefined = out.completed < 2;
  out.auc_mean = mean(aucs);
  out.auc_std = sample_std(aucs);
  out.final_mean = mean(finals);
  out.final_std = sample_std(finals);
  return out;
}

}  // namespace permbo

#include "permbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "permbo/sampling.hpp"

namespace permbo {

namespace {

double log_sum_exp(const double* v, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

Eigen::MatrixXd factor_with_jitter(const Eigen::MatrixXd& C) {
  const double scale = std::max(C.diagonal().cwiseAbs().mean(), 1e-300);
  for (double level : {0.0, 1e-12, 1e-10, 1e-8, 1e-6}) {
    Eigen::MatrixXd A = C;
    A.diagonal().array() += level * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw std::runtime_error("posterior covariance is not factorizable");
}

/// One batch member with everything that depends only on that member cached,
/// so finite-difference moves of one member leave the others untouched.
struct Member {
  PreparedDesign p;
  Eigen::VectorXd v;  // L^-1 k(X, x)
  double mean = 0.0;
  double prior_var = 0.0;
  double penalty = 0.0;
};

class BatchEvaluator {
 public:
  BatchEvaluator(const GpModel& model, double f_best_std, const AcquisitionConfig& cfg,
                 const Eigen::MatrixXd& Z, const SdfQuery* field)
      : model_(model), shape_(model.kernel().shape()), f_best_(f_best_std), cfg_(cfg), Z_(Z),
        field_(field) {}

  const DesignShape& shape() const { return shape_; }
  std::size_t evaluations() const { return evaluations_; }

  Member member(std::span<const double> u) const {
    Member m;
    m.p = model_.kernel().prepare(unflatten(u, shape_));
    const std::span<const PreparedDesign> one(&m.p, 1);
    m.prior_var = model_.cross_gram(one, one)(0, 0);
    if (model_.size() > 0) {
      const Eigen::VectorXd kx = model_.cross_gram(one, model_.training()).row(0).transpose();
      m.mean = kx.dot(model_.alpha());
      m.v = model_.chol().triangularView<Eigen::Lower>().solve(kx);
    }
    if (field_ && cfg_.barrier) {
      std::vector<Point2> pts(m.p.design.inj);
      pts.insert(pts.end(), m.p.design.prod.begin(), m.p.design.prod.end());
      m.penalty = barrier_penalty(pts, *field_, *cfg_.barrier);
    }
    return m;
  }

  double value(const std::vector<const Member*>& ms) {
    ++evaluations_;
    const auto q = static_cast<Eigen::Index>(ms.size());
    Eigen::VectorXd mean(q);
    Eigen::MatrixXd cov(q, q);
    double penalty = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
      const Member& a = *ms[static_cast<std::size_t>(i)];
      mean[i] = a.mean;
      penalty += a.penalty;
      cov(i, i) = a.prior_var - (a.v.size() ? a.v.squaredNorm() : 0.0);
      for (Eigen::Index j = 0; j < i; ++j) {
        const Member& b = *ms[static_cast<std::size_t>(j)];
        const std::span<const PreparedDesign> pa(&a.p, 1), pb(&b.p, 1);
        double c = model_.cross_gram(pa, pb)(0, 0);
        if (a.v.size()) c -= a.v.dot(b.v);
        cov(i, j) = cov(j, i) = c;
      }
    }
    return qlogei_from_posterior(mean, cov, f_best_, cfg_, Z_) - penalty;
  }

 private:
  const GpModel& model_;
  DesignShape shape_;
  double f_best_;
  const AcquisitionConfig& cfg_;
  const Eigen::MatrixXd& Z_;
  const SdfQuery* field_;
  std::size_t evaluations_ = 0;
};

struct Batch {
  std::vector<double> u;
  std::vector<Member> members;
  double value = -std::numeric_limits<double>::infinity();
};

std::vector<const Member*> pointers(const std::vector<Member>& ms) {
  std::vector<const Member*> out;
  for (const auto& m : ms) out.push_back(&m);
  return out;
}

Batch make_batch(BatchEvaluator& ev, std::vector<double> u, std::size_t q) {
  Batch b;
  b.u = std::move(u);
  const std::size_t d = ev.shape().flat_dim();
  for (std::size_t j = 0; j < q; ++j)
    b.members.push_back(ev.member(std::span<const double>(b.u).subspan(j * d, d)));
  b.value = ev.value(pointers(b.members));
  return b;
}

/// Value with member j replaced by the design at coordinates uj.
double value_with(BatchEvaluator& ev, const Batch& b, std::size_t j, std::span<const double> uj) {
  const Member repl = ev.member(uj);
  auto ptrs = pointers(b.members);
  ptrs[j] = &repl;
  return ev.value(ptrs);
}

void ascend(BatchEvaluator& ev, Batch& b, const AcquisitionConfig& cfg) {
  const std::size_t d = ev.shape().flat_dim();
  const std::size_t D = b.u.size();
  const double h = cfg.fd_step;
  double alpha = 0.1;
  std::vector<double> g(D);
  for (std::size_t step = 0; step < cfg.ascent_steps; ++step) {
    for (std::size_t j = 0; j < cfg.q; ++j) {
      std::vector<double> uj(b.u.begin() + static_cast<std::ptrdiff_t>(j * d),
                             b.u.begin() + static_cast<std::ptrdiff_t>((j + 1) * d));
      for (std::size_t c = 0; c < d; ++c) {
        const double x0 = uj[c];
        const double xu = std::min(1.0, x0 + h), xd = std::max(0.0, x0 - h);
        uj[c] = xu;
        const double fu = value_with(ev, b, j, uj);
        uj[c] = xd;
        const double fd = value_with(ev, b, j, uj);
        uj[c] = x0;
        double gc = (fu - fd) / (xu - xd);
        if (!std::isfinite(gc)) gc = 0.0;
        if ((x0 <= 0.0 && gc < 0.0) || (x0 >= 1.0 && gc > 0.0)) gc = 0.0;
        g[j * d + c] = gc;
      }
    }
    double gmax = 0.0;
    for (double x : g) gmax = std::max(gmax, std::abs(x));
    if (!(gmax > 0.0)) break;
    bool improved = false;
    for (int tries = 0; tries < 6 && !improved; ++tries, alpha *= 0.5) {
      std::vector<double> u(D);
      for (std::size_t i = 0; i < D; ++i) u[i] = std::clamp(b.u[i] + alpha * g[i] / gmax, 0.0, 1.0);
      Batch cand = make_batch(ev, std::move(u), cfg.q);
      if (cand.value > b.value) {
        b = std::move(cand);
        improved = true;
      }
    }
    if (!improved) break;
    alpha = std::min(alpha * 3.0, 0.25);  // undo the last halving and grow
  }
}

}  // namespace

void AcquisitionConfig::validate() const {
  if (q < 1) throw std::invalid_argument("acquisition q must be >= 1");
  if (mc_samples < 1) throw std::invalid_argument("acquisition mc_samples must be >= 1");
  if (!(tau0 > 0.0) || !(tau_max > 0.0))
    throw std::invalid_argument("acquisition temperatures must be positive");
  if (restarts < 1 || raw_samples < 1) throw std::invalid_argument("acquisition restarts/raw_samples must be >= 1");
  if (!(fd_step > 0.0)) throw std::invalid_argument("acquisition fd_step must be positive");
  if (barrier && (!(barrier->weight >= 0.0) || !(barrier->sharpness > 0.0)))
    throw std::invalid_argument("barrier weight must be >= 0 and sharpness > 0");
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double log_softplus(double x, double tau) {
  const double u = x / tau;
  double ls;
  if (u > 30.0)
    ls = std::log(u + std::log1p(std::exp(-u)));
  else if (u < -30.0)
    ls = u;
  else
    ls = std::log(std::log1p(std::exp(u)));
  return std::log(tau) + ls;
}

double qlogei_from_posterior(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double f_best,
                             const AcquisitionConfig& cfg, const Eigen::MatrixXd& base_samples) {
  const Eigen::Index q = mean.size();
  if (cov.rows() != q || cov.cols() != q || base_samples.cols() != q)
    throw std::invalid_argument("qlogei: shape mismatch");
  const Eigen::MatrixXd L = factor_with_jitter(clamp_psd(cov));
  const Eigen::Index M = base_samples.rows();
  std::vector<double> a(static_cast<std::size_t>(q)), b(static_cast<std::size_t>(M));
  for (Eigen::Index m = 0; m < M; ++m) {
    const Eigen::VectorXd xi = mean + L * base_samples.row(m).transpose();
    for (Eigen::Index j = 0; j < q; ++j)
      a[static_cast<std::size_t>(j)] = log_softplus(xi[j] - f_best, cfg.tau0) / cfg.tau_max;
    b[static_cast<std::size_t>(m)] = cfg.tau_max * log_sum_exp(a.data(), a.size());
  }
  return log_sum_exp(b.data(), b.size()) - std::log(static_cast<double>(M));
}

double qlogei(const GpModel& model, std::span<const Design> batch, double f_best,
              const AcquisitionConfig& cfg, const Eigen::MatrixXd& base_samples) {
  const Posterior post = model.posterior(batch);
  const double f_std = (f_best - model.y_mean()) / model.y_sd();
  return qlogei_from_posterior(post.mean, post.cov, f_std, cfg, base_samples);
}

double barrier_penalty(std::span<const Point2> points, const SdfQuery& field,
                       const BarrierConfig& barrier) {
  if (barrier.weight == 0.0) return 0.0;
  double s = 0.0;
  for (const Point2& p : points)
    s += softplus((barrier.margin - field(p)) * barrier.sharpness) / barrier.sharpness;
  return barrier.weight * s;
}

AcquisitionResult optimize_acquisition(const GpModel& model, double f_best,
                                       const AcquisitionConfig& cfg, std::uint64_t seed,
                                       const SdfQuery* field) {
  cfg.validate();
  const Eigen::MatrixXd Z = qmc_normals(cfg.mc_samples, cfg.q, splitmix64(seed ^ 0xAC05EEDULL));
  const double f_std = (f_best - model.y_mean()) / model.y_sd();
  BatchEvaluator ev(model, f_std, cfg, Z, field);
  const std::size_t D = cfg.q * ev.shape().flat_dim();
  const Eigen::MatrixXd raw = shifted_sobol(cfg.raw_samples, D, seed);

  std::vector<Batch> raws;
  raws.reserve(cfg.raw_samples);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    std::vector<double> u(D);
    for (std::size_t k = 0; k < D; ++k) u[k] = raw(i, static_cast<Eigen::Index>(k));
    raws.push_back(make_batch(ev, std::move(u), cfg.q));
  }
  std::vector<std::size_t> order(raws.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raws[a].value > raws[b].value; });

  AcquisitionResult res;
  res.best_raw_value = raws[order[0]].value;
  Batch best;
  const std::size_t n_starts = std::min(cfg.restarts, raws.size());
  for (std::size_t r = 0; r < n_starts; ++r) {
    Batch b = std::move(raws[order[r]]);
    ascend(ev, b, cfg);
    if (b.value > best.value) best = std::move(b);
  }
  const std::size_t d = ev.shape().flat_dim();
  for (std::size_t j = 0; j < cfg.q; ++j)
    res.batch.push_back(unflatten(std::span<const double>(best.u).subspan(j * d, d), ev.shape()));
  res.value = best.value;
  res.evaluations = ev.evaluations();
  return res;
}

}  // namespace permbo

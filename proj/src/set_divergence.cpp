#include "permbo/set_divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace permbo {

namespace {

// exp(-C/eps) is evaluated directly while max(C)/eps stays below this bound;
// scalings then live in roughly [1e-87, 1e87] and never leave double range.
constexpr double kScalingDomainLimit = 200.0;

bool lex_less(Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

bool set_less(const PointSet& a, const PointSet& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), lex_less);
}

void check_nonempty(std::span<const Point2> S, std::span<const Point2> T) {
  if (S.empty() || T.empty()) throw std::invalid_argument("point set must be nonempty");
}

double log_sum_exp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

struct Duals {
  Eigen::VectorXd f;
  Eigen::VectorXd g;
  int iterations = 0;
  bool converged = false;
};

Duals solve_log_domain(const Eigen::MatrixXd& C, double eps, const SinkhornConfig& cfg) {
  const auto n = C.rows();
  const auto m = C.cols();
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));
  Duals d{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m)};
  std::vector<double> buf(static_cast<std::size_t>(std::max(n, m)));
  for (int it = 1; it <= cfg.max_iters; ++it) {
    double df = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) buf[j] = log_b + (d.g[j] - C(i, j)) / eps;
      const double fi = -eps * log_sum_exp(buf.data(), static_cast<std::size_t>(m));
      df = std::max(df, std::abs(fi - d.f[i]));
      d.f[i] = fi;
    }
    double dg = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) buf[i] = log_a + (d.f[i] - C(i, j)) / eps;
      const double gj = -eps * log_sum_exp(buf.data(), static_cast<std::size_t>(n));
      dg = std::max(dg, std::abs(gj - d.g[j]));
      d.g[j] = gj;
    }
    d.iterations = it;
    if (df < cfg.tol && dg < cfg.tol) {
      d.converged = true;
      break;
    }
  }
  return d;
}

// Scaling-domain iterations with u = a exp(f/eps), v = b exp(g/eps). The stop
// rule |delta f| < tol is tested as a ratio bound on u so no logs are taken per sweep.
double solve_scaling_domain(const Eigen::MatrixXd& C, double eps, const SinkhornConfig& cfg,
                            int& iterations, bool& converged) {
  const auto n = C.rows();
  const auto m = C.cols();
  const double a = 1.0 / static_cast<double>(n);
  const double b = 1.0 / static_cast<double>(m);
  const Eigen::MatrixXd K = (-C / eps).array().exp().matrix();
  Eigen::VectorXd u = Eigen::VectorXd::Constant(n, a);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(m, b);
  Eigen::VectorXd Kv(n), Ktu(m);
  const double lo = std::exp(-cfg.tol / eps), hi = std::exp(cfg.tol / eps);
  iterations = 0;
  converged = false;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    bool still = false;
    Kv.noalias() = K * v;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ui = a / Kv[i];
      const double r = ui / u[i];
      still = still || !(r > lo && r < hi);
      u[i] = ui;
    }
    Ktu.noalias() = K.transpose() * u;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double vj = b / Ktu[j];
      const double r = vj / v[j];
      still = still || !(r > lo && r < hi);
      v[j] = vj;
    }
    iterations = it;
    if (!still) {
      converged = true;
      break;
    }
  }
  // sum_ab pi_ab (f_a + g_b) with pi = diag(u) K diag(v).
  const Eigen::ArrayXd f = eps * (u.array() / a).log();
  const Eigen::ArrayXd g = eps * (v.array() / b).log();
  double value = 0.0;
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) value += u[i] * K(i, j) * v[j] * (f[i] + g[j]);
  return value;
}

}  // namespace

double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

double distance(Point2 a, Point2 b) { return std::sqrt(squared_distance(a, b)); }

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("sinkhorn epsilon must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("sinkhorn tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("sinkhorn max_iters must be >= 1");
}

Eigen::MatrixXd cost_matrix(std::span<const Point2> S, std::span<const Point2> T) {
  check_nonempty(S, T);
  Eigen::MatrixXd C(static_cast<Eigen::Index>(S.size()), static_cast<Eigen::Index>(T.size()));
  for (std::size_t a = 0; a < S.size(); ++a)
    for (std::size_t b = 0; b < T.size(); ++b)
      C(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = distance(S[a], T[b]);
  return C;
}

PointSet canonical_order(std::span<const Point2> S) {
  PointSet out(S.begin(), S.end());
  std::sort(out.begin(), out.end(), lex_less);
  return out;
}

OtResult entropic_ot_cost(std::span<const Point2> S, std::span<const Point2> T,
                          const SinkhornConfig& cfg) {
  check_nonempty(S, T);
  cfg.validate();
  PointSet s = canonical_order(S);
  PointSet t = canonical_order(T);
  if (set_less(t, s)) std::swap(s, t);

  const Eigen::MatrixXd C = cost_matrix(s, t);
  const double eps = cfg.epsilon;
  if (C.maxCoeff() / eps <= kScalingDomainLimit) {
    OtResult r;
    r.value = solve_scaling_domain(C, eps, cfg, r.iterations, r.converged);
    return r;
  }
  const Duals d = solve_log_domain(C, eps, cfg);

  // Primal value of the plan pi_ab = a b exp((f_a + g_b - C_ab)/eps):
  // sum pi (C + eps log(pi / ab)) = sum pi (f_a + g_b).
  const double ab = 1.0 / static_cast<double>(C.rows() * C.cols());
  double value = 0.0;
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      const double fg = d.f[i] + d.g[j];
      value += ab * std::exp((fg - C(i, j)) / eps) * fg;
    }
  return {value, d.iterations, d.converged};
}

DivergenceResult sinkhorn_divergence(std::span<const Point2> S, std::span<const Point2> T,
                                     double self_S, double self_T, const SinkhornConfig& cfg) {
  const OtResult cross = entropic_ot_cost(S, T, cfg);
  const double raw = cross.value - 0.5 * self_S - 0.5 * self_T;
  return {std::max(0.0, raw), cross.converged};
}

DivergenceResult sinkhorn_divergence(std::span<const Point2> S, std::span<const Point2> T,
                                     const SinkhornConfig& cfg) {
  const OtResult ss = entropic_ot_cost(S, S, cfg);
  const OtResult tt = entropic_ot_cost(T, T, cfg);
  DivergenceResult r = sinkhorn_divergence(S, T, ss.value, tt.value, cfg);
  r.converged = r.converged && ss.converged && tt.converged;
  return r;
}

PointSet interaction_set(std::span<const Point2> I, std::span<const Point2> P) {
  if (I.empty() || P.empty()) throw std::invalid_argument("point set must be nonempty");
  PointSet R;
  R.reserve(I.size() * P.size());
  for (const Point2& i : I)
    for (const Point2& p : P) R.push_back(p - i);
  return R;
}

}  // namespace permbo

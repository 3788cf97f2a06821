#include "permbo/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "permbo/sampling.hpp"
#include "permbo/set_divergence.hpp"

namespace permbo {

namespace {

// Sorting first makes every objective bitwise independent of storage order.
PointSet canon(std::span<const Point2> s) { return canonical_order(s); }

double softmin(const std::vector<double>& costs, double tau) {
  double mn = std::numeric_limits<double>::infinity();
  for (double c : costs) mn = std::min(mn, c);
  double s = 0.0;
  for (double c : costs) s += std::exp(-(c - mn) / tau);
  return mn - tau * std::log(s);
}

double pair_repulsion(const PointSet& S, double eps) {
  double s = 0.0;
  for (std::size_t i = 0; i < S.size(); ++i)
    for (std::size_t j = i + 1; j < S.size(); ++j) s += 1.0 / (squared_distance(S[i], S[j]) + eps);
  return s;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Point2 gaussian_point(Rng& rng, Point2 mean, double sd) {
  const double x = standard_normal(rng), y = standard_normal(rng);
  return {mean.x + sd * x, mean.y + sd * y};
}

std::vector<Point2> make_aux(const BenchmarkSpec& s) {
  std::vector<Point2> out;
  Rng rng = make_rng(s.aux_seed, static_cast<std::uint64_t>(s.id) + 1);
  switch (s.id) {
    case BenchmarkId::MaxArea: {
      // Shifted Sobol points: uniform on the box, fixed by aux_seed, and with
      // far lower integration error than i.i.d. draws of the same size.
      const Eigen::MatrixXd u = shifted_sobol(s.max_area.mc_points, 2, s.aux_seed);
      for (Eigen::Index i = 0; i < u.rows(); ++i)
        out.push_back({s.lower + (s.upper - s.lower) * u(i, 0), s.lower + (s.upper - s.lower) * u(i, 1)});
      break;
    }
    case BenchmarkId::MmdMatch:
      for (std::size_t i = 0; i < s.mmd.M; ++i) {
        const bool first = uniform01(rng) < s.mmd.weight1;
        out.push_back(gaussian_point(rng, first ? s.mmd.mean1 : s.mmd.mean2, s.mmd.sd));
      }
      break;
    case BenchmarkId::Facility:
      for (std::size_t i = 0; i < s.facility.M; ++i)
        out.push_back({uniform(rng, s.lower, s.upper), uniform(rng, s.lower, s.upper)});
      break;
    case BenchmarkId::SoftKmedoids:
      for (std::size_t i = 0; i < s.kmedoids.M; ++i) {
        if (uniform01(rng) < s.kmedoids.ring_fraction) {
          const double theta = 2.0 * std::numbers::pi * uniform01(rng);
          const double r = s.kmedoids.ring_radius + s.kmedoids.ring_sd * standard_normal(rng);
          out.push_back({r * std::cos(theta), r * std::sin(theta)});
        } else {
          out.push_back(gaussian_point(rng, s.kmedoids.blob_center, s.kmedoids.blob_sd));
        }
      }
      break;
    default:
      break;
  }
  return out;
}

}  // namespace

std::string to_string(BenchmarkId id) {
  switch (id) {
    case BenchmarkId::Particle: return "particle";
    case BenchmarkId::MaxArea: return "max_area";
    case BenchmarkId::MmdMatch: return "mmd_match";
    case BenchmarkId::MaxSpanningTree: return "max_spanning_tree";
    case BenchmarkId::Facility: return "facility";
    case BenchmarkId::SoftKmedoids: return "soft_kmedoids";
    case BenchmarkId::CcsLike: return "ccs_like";
    case BenchmarkId::TwosetAblation: return "twoset_ablation";
  }
  return "unknown";
}

const std::vector<BenchmarkId>& all_benchmarks() {
  static const std::vector<BenchmarkId> ids{
      BenchmarkId::Particle, BenchmarkId::MaxArea,      BenchmarkId::MmdMatch,
      BenchmarkId::MaxSpanningTree, BenchmarkId::Facility, BenchmarkId::SoftKmedoids,
      BenchmarkId::CcsLike,  BenchmarkId::TwosetAblation};
  return ids;
}

BenchmarkId benchmark_from_string(const std::string& name) {
  for (BenchmarkId id : all_benchmarks())
    if (to_string(id) == name) return id;
  throw std::invalid_argument("unknown benchmark '" + name + "'");
}

DesignShape BenchmarkSpec::shape() const {
  if (two_set()) return {0, n_inj, n_prod};
  return {0, n_points, 0};
}

void BenchmarkSpec::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
  };
  if (!(lower < upper)) throw std::invalid_argument("benchmark bounds must satisfy lower < upper");
  if (two_set()) {
    if (n_inj < 1 || n_prod < 1) throw std::invalid_argument("n_inj and n_prod must be >= 1");
  } else if (n_points < 1) {
    throw std::invalid_argument("n_points must be >= 1");
  }
  switch (id) {
    case BenchmarkId::Particle: positive(particle.eps, "particle.eps"); break;
    case BenchmarkId::MaxArea:
      positive(max_area.r, "max_area.r");
      if (max_area.mc_points < 1) throw std::invalid_argument("max_area.mc_points must be >= 1");
      break;
    case BenchmarkId::MmdMatch:
      if (n_points < 2) throw std::invalid_argument("mmd_match needs n_points >= 2");
      if (mmd.M < 2) throw std::invalid_argument("mmd.M must be >= 2");
      positive(mmd.sd, "mmd.sd");
      if (mmd.bandwidth < 0.0) throw std::invalid_argument("mmd.bandwidth must be >= 0");
      break;
    case BenchmarkId::MaxSpanningTree:
      if (n_points < 2) throw std::invalid_argument("max_spanning_tree needs n_points >= 2");
      break;
    case BenchmarkId::Facility:
      positive(facility.sigma, "facility.sigma");
      positive(facility.kappa, "facility.kappa");
      if (facility.M < 1) throw std::invalid_argument("facility.M must be >= 1");
      break;
    case BenchmarkId::SoftKmedoids:
      positive(kmedoids.tau, "kmedoids.tau");
      if (kmedoids.M < 1) throw std::invalid_argument("kmedoids.M must be >= 1");
      break;
    case BenchmarkId::CcsLike:
      positive(ccs.sigma_d, "ccs.sigma_d");
      positive(ccs.sigma_theta, "ccs.sigma_theta");
      positive(ccs.tau, "ccs.tau");
      positive(ccs.eps, "ccs.eps");
      if (std::hypot(ccs.u.x, ccs.u.y) == 0.0) throw std::invalid_argument("ccs.u must be nonzero");
      break;
    case BenchmarkId::TwosetAblation:
      positive(twoset.tau, "twoset.tau");
      positive(twoset.eps, "twoset.eps");
      break;
  }
}

BenchmarkSpec default_spec(BenchmarkId id) {
  BenchmarkSpec s;
  s.id = id;
  switch (id) {
    case BenchmarkId::Particle: s.n_points = 10; break;
    case BenchmarkId::MaxArea: s.n_points = 16; break;
    case BenchmarkId::MmdMatch: s.n_points = 20; break;
    case BenchmarkId::MaxSpanningTree: s.n_points = 15; break;
    case BenchmarkId::Facility: s.n_points = 12; break;
    case BenchmarkId::SoftKmedoids: s.n_points = 12; break;
    case BenchmarkId::CcsLike:
      s.n_inj = 3;
      s.n_prod = 5;
      break;
    case BenchmarkId::TwosetAblation:
      s.n_inj = 4;
      s.n_prod = 6;
      break;
  }
  return s;
}

double particle_energy(std::span<const Point2> points, const ParticleConstants& c) {
  const PointSet S = canon(points);
  Point2 centroid{0.0, 0.0};
  for (const auto& p : S) {
    centroid.x += p.x;
    centroid.y += p.y;
  }
  const double n = static_cast<double>(S.size());
  centroid = {centroid.x / n, centroid.y / n};
  double rep = 0.0;
  for (std::size_t i = 0; i < S.size(); ++i)
    for (std::size_t j = i + 1; j < S.size(); ++j) {
      const double dx = S[i].x - S[j].x, dy = S[i].y - S[j].y;
      rep += 1.0 / (c.alpha * dx * dx + c.beta * dy * dy + c.eps);
    }
  return -(c.A * squared_distance(centroid, c.target) + c.B * rep);
}

double max_area_coverage(std::span<const Point2> points, const MaxAreaConstants& c,
                         std::span<const Point2> mc_points, double box_area) {
  const PointSet S = canon(points);
  const double r2 = c.r * c.r;
  std::size_t inside = 0;
  for (const Point2& y : mc_points)
    for (const Point2& p : S)
      if (squared_distance(y, p) <= r2) {
        ++inside;
        break;
      }
  const double area = mc_points.empty() ? 0.0
                                        : box_area * static_cast<double>(inside) /
                                              static_cast<double>(mc_points.size());
  double penalty = 0.0;
  for (std::size_t i = 0; i < S.size(); ++i)
    for (std::size_t j = i + 1; j < S.size(); ++j)
      penalty += std::max(0.0, c.k * (2.0 * c.r - distance(S[i], S[j])));
  return area - c.C * penalty;
}

double rbf(Point2 a, Point2 b, double bandwidth) {
  return std::exp(-squared_distance(a, b) / (2.0 * bandwidth * bandwidth));
}

double median_pairwise_distance(std::span<const Point2> pts) {
  std::vector<double> d;
  d.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d.push_back(distance(pts[i], pts[j]));
  if (d.empty()) return 0.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double m = d[mid];
  if (d.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

double mmd_objective(std::span<const Point2> points, std::span<const Point2> targets,
                     double bandwidth, double target_self) {
  const PointSet S = canon(points);
  if (S.size() < 2) throw std::invalid_argument("mmd objective needs at least two points");
  const double N = static_cast<double>(S.size()), M = static_cast<double>(targets.size());
  double kss = 0.0;
  for (std::size_t i = 0; i < S.size(); ++i)
    for (std::size_t j = i + 1; j < S.size(); ++j) kss += 2.0 * rbf(S[i], S[j], bandwidth);
  double kst = 0.0;
  for (const Point2& p : S)
    for (const Point2& y : targets) kst += rbf(p, y, bandwidth);
  const double est = kss / (N * (N - 1.0)) + target_self - 2.0 * kst / (N * M);
  return -std::max(0.0, est);
}

double max_spanning_tree(std::span<const Point2> points) {
  const PointSet S = canon(points);
  const std::size_t n = S.size();
  if (n < 2) return 0.0;
  // Prim on the complete graph, keeping the heaviest connection per vertex.
  std::vector<double> best(n, -1.0);
  std::vector<bool> in(n, false);
  in[0] = true;
  for (std::size_t j = 1; j < n; ++j) best[j] = distance(S[0], S[j]);
  double total = 0.0;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t pick = n;
    for (std::size_t j = 0; j < n; ++j)
      if (!in[j] && (pick == n || best[j] > best[pick])) pick = j;
    in[pick] = true;
    total += best[pick];
    for (std::size_t j = 0; j < n; ++j)
      if (!in[j]) best[j] = std::max(best[j], distance(S[pick], S[j]));
  }
  return total;
}

double facility_coverage(std::span<const Point2> points, const FacilityConstants& c,
                         std::span<const Point2> clients) {
  const PointSet S = canon(points);
  double cover = 0.0;
  for (const Point2& y : clients) {
    double miss = 1.0;
    for (const Point2& p : S) miss *= 1.0 - std::exp(-squared_distance(y, p) / (2.0 * c.sigma * c.sigma));
    cover += 1.0 - miss;
  }
  cover /= static_cast<double>(clients.size());
  double rep = 0.0;
  for (std::size_t i = 0; i < S.size(); ++i)
    for (std::size_t k = i + 1; k < S.size(); ++k)
      rep += softplus(c.kappa * (c.r_rep - distance(S[i], S[k]))) / c.kappa;
  return cover - c.lambda * rep;
}

double soft_kmedoids(std::span<const Point2> points, const KmedoidsConstants& c,
                     std::span<const Point2> data) {
  const PointSet S = canon(points);
  std::vector<double> d(S.size());
  double total = 0.0;
  for (const Point2& y : data) {
    for (std::size_t i = 0; i < S.size(); ++i) d[i] = distance(y, S[i]);
    total += softmin(d, c.tau);
  }
  return -total / static_cast<double>(data.size());
}

double ccs_like_objective(std::span<const Point2> inj, std::span<const Point2> prod,
                          const CcsConstants& c) {
  const PointSet I = canon(inj), P = canon(prod);
  const double un = std::hypot(c.u.x, c.u.y);
  const Point2 u{c.u.x / un, c.u.y / un};
  std::vector<double> costs(I.size());
  double cross = 0.0;
  for (const Point2& p : P) {
    for (std::size_t k = 0; k < I.size(); ++k) {
      const Point2 d = p - I[k];
      const double len = std::hypot(d.x, d.y);
      const double cosang = (d.x * u.x + d.y * u.y) / (len + 1e-12);
      const double a = (len - c.d_star) / c.sigma_d;
      const double b = (1.0 - cosang) / c.sigma_theta;
      costs[k] = a * a + b * b;
    }
    cross += softmin(costs, c.tau);
  }
  cross /= static_cast<double>(P.size());
  const double rep = c.w_inj * pair_repulsion(I, c.eps) + c.w_prod * pair_repulsion(P, c.eps);
  return -(cross + rep);
}

double twoset_ablation_objective(std::span<const Point2> inj, std::span<const Point2> prod,
                                 const TwosetConstants& c) {
  const PointSet I = canon(inj), P = canon(prod);
  std::vector<double> d2(I.size());
  double cip = 0.0;
  for (const Point2& p : P) {
    for (std::size_t a = 0; a < I.size(); ++a) d2[a] = squared_distance(p, I[a]);
    cip += softmin(d2, c.tau);
  }
  cip /= static_cast<double>(P.size());
  // (lambda/2) sum over ordered pairs a != a' equals lambda times unordered pairs.
  const double rep = c.lambda_inj * pair_repulsion(I, c.eps) + c.lambda_prod * pair_repulsion(P, c.eps);
  return -(cip + rep);
}

Benchmark::Benchmark(BenchmarkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  auto aux = std::make_shared<std::vector<Point2>>(make_aux(spec_));
  if (spec_.id == BenchmarkId::MmdMatch) {
    bandwidth_ = spec_.mmd.bandwidth;
    if (bandwidth_ == 0.0) {
      const std::size_t m = std::min(spec_.mmd.median_subsample, aux->size());
      bandwidth_ = median_pairwise_distance(std::span<const Point2>(*aux).first(m));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < aux->size(); ++i)
      for (std::size_t j = i + 1; j < aux->size(); ++j) s += 2.0 * rbf((*aux)[i], (*aux)[j], bandwidth_);
    const double M = static_cast<double>(aux->size());
    target_self_ = s / (M * (M - 1.0));
  }
  aux_ = std::move(aux);
}

double Benchmark::operator()(const Design& x) const {
  check_shape(x, shape());
  switch (spec_.id) {
    case BenchmarkId::Particle: return particle_energy(x.inj, spec_.particle);
    case BenchmarkId::MaxArea: return max_area_coverage(x.inj, spec_.max_area, *aux_,
                                                         (spec_.upper - spec_.lower) * (spec_.upper - spec_.lower));
    case BenchmarkId::MmdMatch: return mmd_objective(x.inj, *aux_, bandwidth_, target_self_);
    case BenchmarkId::MaxSpanningTree: return max_spanning_tree(x.inj);
    case BenchmarkId::Facility: return facility_coverage(x.inj, spec_.facility, *aux_);
    case BenchmarkId::SoftKmedoids: return soft_kmedoids(x.inj, spec_.kmedoids, *aux_);
    case BenchmarkId::CcsLike: return ccs_like_objective(x.inj, x.prod, spec_.ccs);
    case BenchmarkId::TwosetAblation: return twoset_ablation_objective(x.inj, x.prod, spec_.twoset);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace permbo

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "permbo/diagnostics.hpp"
#include "support.hpp"

using namespace permbo;
using namespace permbo::testing;

namespace {

// Smallest root of det(lambda I - A) for symmetric 3x3 A via the trigonometric cubic solution.
double smallest_char_root(const Eigen::Matrix3d& A) {
  const double p1 = A(0, 1) * A(0, 1) + A(0, 2) * A(0, 2) + A(1, 2) * A(1, 2);
  const double q = A.trace() / 3.0;
  const double p2 = (A(0, 0) - q) * (A(0, 0) - q) + (A(1, 1) - q) * (A(1, 1) - q) +
                    (A(2, 2) - q) * (A(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const Eigen::Matrix3d B = (A - q * Eigen::Matrix3d::Identity()) / p;
  const double r = std::clamp(B.determinant() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  return q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
}

PsdVariant flat_variant(const DesignShape& shape, double log_ell = 0.0) {
  auto k = std::shared_ptr<const Kernel>(make_flat_kernel(shape));
  Eigen::VectorXd lp = k->unit_log_params();
  lp.head(lp.size() - 1).setConstant(log_ell);
  return {"GP_flat", k, lp};
}

}  // namespace

TEST_CASE("minimum eigenvalue matches the characteristic polynomial") {
  Rng rng = make_rng(71);
  for (int i = 0; i < 200; ++i) {
    Eigen::Matrix3d A;
    for (int r = 0; r < 3; ++r)
      for (int c = r; c < 3; ++c) A(r, c) = A(c, r) = uniform(rng, -2.0, 2.0);
    CHECK(std::abs(min_eigenvalue(A) - smallest_char_root(A)) <= 1e-10);
  }
}

TEST_CASE("psd examples") {
  const DesignShape shape{0, 2, 0};
  const PsdVariant v = flat_variant(shape, std::log(0.05));
  const std::vector<Design> far{Design{{}, {{0, 0}, {0, 0}}, {}}, Design{{}, {{1, 1}, {1, 1}}, {}},
                                Design{{}, {{0, 1}, {0, 1}}, {}}};
  const Eigen::MatrixXd K = v.kernel->matrix(far, v.log_params);
  double off = 0.0;
  for (int r = 0; r < 3; ++r) off = std::max(off, K.row(r).sum() - K(r, r));
  const double lmin = min_eigenvalue(K);
  CHECK(lmin > 0.0);
  CHECK(lmin >= 1.0 - off - 1e-15);
  CHECK(lmin <= 1.0);

  const std::vector<Design> twin{far[0], far[0]};
  CHECK(std::abs(min_eigenvalue(v.kernel->matrix(twin, v.log_params))) <= 1e-12);
  auto perm = std::shared_ptr<const Kernel>(make_gp_perm_kernel(DesignShape{0, 2, 3}, {}));
  Rng rng = make_rng(72);
  const Design x = random_design(rng, perm->shape());
  const std::vector<Design> twin2{x, permuted(rng, x)};
  CHECK(std::abs(min_eigenvalue(perm->matrix(twin2, perm->unit_log_params()))) <= 1e-12);
}

TEST_CASE("summary statistics and failures") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const PsdGroup g = summarize_psd("x", 4, {0.5, -1e-9, nan, 0.1});
  CHECK(g.failures == 1);
  CHECK(g.median == doctest::Approx(0.1));
  CHECK(g.min == -1e-9);
  CHECK(g.violation[0] == 0.5);
  CHECK(g.violation[1] == 0.25);
  CHECK(g.violation[2] == 0.25);
}

TEST_CASE("offline stress test") {
  const DesignShape shape{0, 4, 6};
  std::vector<PsdVariant> vs{flat_variant(shape)};
  for (double ip : {0.0, 1.0}) {
    GpPermOptions o;
    o.ip_weight = ip;
    auto k = std::shared_ptr<const Kernel>(make_gp_perm_kernel(shape, o));
    vs.push_back({ip > 0 ? "GP_Perm(+IP)" : "GP_Perm(-IP)", k, k->unit_log_params()});
  }
  const PsdReport a = psd_stress_offline(vs, shape, {8, 12}, 3, 5);
  const PsdReport b = psd_stress_offline(vs, shape, {8, 12}, 3, 5, 2);
  REQUIRE(a.groups.size() == 6);
  for (std::size_t g = 0; g < a.groups.size(); ++g) {
    CHECK(a.groups[g].lambda_min == b.groups[g].lambda_min);
    CHECK(a.groups[g].lambda_min.size() == 3);
    for (double f : a.groups[g].violation) CHECK(f == 0.0);
  }
  CHECK(a.groups[0].variant == "GP_flat");
  CHECK(a.groups[1].N == 12);
  CHECK_THROWS(psd_stress_offline(vs, shape, {1}, 2, 0));
}

TEST_CASE("training-prefix stress test") {
  RunConfig c;
  c.benchmark = default_spec(BenchmarkId::CcsLike);
  c.surrogate = KernelFamily::Flat;
  c.n_init = 4;
  c.T = 2;
  c.n_trials = 2;
  c.acquisition.raw_samples = 8;
  c.acquisition.restarts = 1;
  c.acquisition.ascent_steps = 1;
  const ExperimentResult res = run_experiment(c);
  const Problem p(c);
  auto k = std::shared_ptr<const Kernel>(make_gp_perm_kernel(p.shape(), {}));
  const PsdVariant v{"GP_Perm", k, k->unit_log_params()};
  const TrainingPsd t = psd_stress_training(res.trials, p.bounds(), v);
  REQUIRE(t.lambda.size() == 2);
  CHECK(t.lambda[0].size() == c.T + 1);
  CHECK(t.median_per_iteration.size() == c.T + 1);
  CHECK(t.overall.violation[0] == 0.0);

  TrialRecord one;
  one.best_so_far = {0.0};
  one.evaluations.push_back({random_design(*std::make_unique<Rng>(make_rng(1)), p.shape(), -1, 1), 0.0, 0});
  const TrainingPsd s = psd_stress_training({one}, p.bounds(), v);
  CHECK(s.lambda[0][0] == doctest::Approx(1.0).epsilon(1e-12));
  const TrainingPsd capped = psd_stress_training(res.trials, p.bounds(), v, 1);
  for (double l : capped.lambda[1]) CHECK(l == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("posterior diagnostics") {
  const DesignShape shape{1, 0, 0};
  auto k = std::shared_ptr<const Kernel>(make_flat_kernel(shape));
  std::vector<Design> X;
  std::vector<double> y;
  for (double v : {0.1, 0.4, 0.8}) {
    X.push_back(Design{{v}, {}, {}});
    y.push_back(std::sin(6 * v));
  }
  Eigen::VectorXd lp(2);
  lp << std::log(0.2), 0.0;
  const GpModel m = GpModel::condition(k, X, y, lp, 1e-10);
  AcquisitionConfig cfg;
  const Eigen::MatrixXd Z = qmc_normals(cfg.mc_samples, 1, 3);
  const auto probes = probe_batches(shape, 1, 256, 9);
  REQUIRE(probes.size() == 256);
  const double fb = *std::max_element(y.begin(), y.end());

  std::size_t arg = 0;
  double best = -INFINITY;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double a = qlogei(m, probes[i], fb, cfg, Z);
    if (a > best) best = a, arg = i;
  }
  const std::vector<double> yn{std::sin(6 * probes[arg][0].v[0])};
  const PosteriorDiagnostics d = posterior_diagnostics(m, probes, probes[arg], yn, fb, cfg, Z);
  CHECK(d.rho_defined);
  CHECK(d.rho_qlogei == 1.0);
  CHECK(d.mean_sigma_Z > 0.0);
  const PosteriorDiagnostics again = posterior_diagnostics(m, probes, probes[arg], yn, fb, cfg, Z);
  CHECK(again.mean_sigma_Z == d.mean_sigma_Z);

  const std::vector<Design> at_train{X[1]};
  const std::vector<double> y_train{y[1]};
  const PosteriorDiagnostics t = posterior_diagnostics(m, probes, at_train, y_train, fb, cfg, Z);
  CHECK(t.sigma_next < 0.01 * m.y_sd());
  CHECK(std::isfinite(t.abs_mean_std_residual));

  Eigen::VectorXd lp4 = lp;
  lp4[1] = std::log(4.0);
  const GpModel prior = GpModel::condition(k, {}, {}, lp4, 1e-6);
  const PosteriorDiagnostics pd = posterior_diagnostics(prior, probes, at_train, y_train, 0.0, cfg, Z);
  CHECK(pd.mean_sigma_Z == doctest::Approx(2.0).epsilon(1e-12));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "permbo/acquisition.hpp"
#include "permbo/sampling.hpp"
#include "support.hpp"

using namespace permbo;
using namespace permbo::testing;

namespace {

double analytic_ei(double mu, double sigma, double f) {
  const double z = (mu - f) / sigma;
  return sigma * normal_pdf(z) + (mu - f) * normal_cdf(z);
}

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }
Eigen::MatrixXd mat1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

GpModel toy_model_1d() {
  const DesignShape shape{1, 0, 0};
  auto k = std::shared_ptr<const Kernel>(make_flat_kernel(shape));
  std::vector<Design> X;
  std::vector<double> y;
  for (double v : {0.05, 0.25, 0.45, 0.7, 0.95}) {
    X.push_back(Design{{v}, {}, {}});
    y.push_back(-(v - 0.55) * (v - 0.55));
  }
  Eigen::VectorXd lp(2);
  lp << std::log(0.3), 0.0;
  return GpModel::condition(k, X, y, lp, 1e-6);
}

}  // namespace

TEST_CASE("log softplus is stable") {
  for (double x : {-3.0, -0.2, 0.0, 0.5, 4.0})
    CHECK(log_softplus(x, 1.0) == doctest::Approx(std::log(std::log1p(std::exp(x)))));
  CHECK(std::isfinite(log_softplus(-1e3, 1e-4)));
  CHECK(log_softplus(-1e3, 1e-4) < -1e6);
  CHECK(log_softplus(1.0, 1e-4) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) == 0.0);
}

TEST_CASE("degenerate posterior with certain improvement") {
  AcquisitionConfig cfg;
  const Eigen::MatrixXd Z = qmc_normals(cfg.mc_samples, 1, 1);
  CHECK(std::abs(qlogei_from_posterior(vec1(1.0), mat1(0.0), 0.0, cfg, Z)) <= 1e-3);
}

TEST_CASE("single-point qLogEI matches analytic EI") {
  AcquisitionConfig cfg;
  const Eigen::MatrixXd Z = qmc_normals(8192, 1, 7);
  for (double gap : {-1.0, 0.0, 1.0})
    for (double sigma : {0.5, 1.0, 2.0}) {
      const double v = qlogei_from_posterior(vec1(gap), mat1(sigma * sigma), 0.0, cfg, Z);
      INFO("gap " << gap << " sigma " << sigma);
      CHECK(rel_err(std::exp(v), analytic_ei(gap, sigma, 0.0)) < 0.02);
    }
  const double v = qlogei_from_posterior(vec1(0.0), mat1(1.0), 0.0, cfg, Z);
  CHECK(std::exp(v) == doctest::Approx(0.39894).epsilon(0.02));
}

TEST_CASE("far tail stays finite") {
  AcquisitionConfig cfg;
  const Eigen::MatrixXd Z = qmc_normals(cfg.mc_samples, 1, 2);
  const double v = qlogei_from_posterior(vec1(-50.0), mat1(0.01), 0.0, cfg, Z);
  CHECK(std::isfinite(v));
  CHECK(v < -100.0);
}

TEST_CASE("monotone in the incumbent") {
  AcquisitionConfig cfg;
  cfg.q = 3;
  const Eigen::MatrixXd Z = qmc_normals(cfg.mc_samples, 3, 3);
  Eigen::VectorXd mu(3);
  mu << 0.1, -0.3, 0.4;
  Eigen::MatrixXd C(3, 3);
  C << 1.0, 0.3, 0.1, 0.3, 0.8, 0.2, 0.1, 0.2, 0.5;
  double prev = -std::numeric_limits<double>::infinity();
  for (double f = 2.0; f >= -2.0; f -= 0.25) {
    const double v = qlogei_from_posterior(mu, C, f, cfg, Z);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("model-based qLogEI is permutation consistent and stateless") {
  Rng rng = make_rng(31);
  const DesignShape shape{1, 3, 3};
  std::vector<Design> X;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    X.push_back(random_design(rng, shape));
    y.push_back(uniform01(rng));
  }
  auto k = std::shared_ptr<const Kernel>(make_gp_perm_kernel(shape, {}));
  const GpModel m = fit(X, y, k, GpFitOptions{});
  AcquisitionConfig cfg;
  cfg.q = 2;
  const Eigen::MatrixXd Z = qmc_normals(cfg.mc_samples, 2, 4);
  const std::vector<Design> a{random_design(rng, shape), random_design(rng, shape)};
  const std::vector<Design> b{random_design(rng, shape), random_design(rng, shape)};
  const std::vector<Design> ap{permuted(rng, a[0]), permuted(rng, a[1])};
  const double va = qlogei(m, a, 0.8, cfg, Z);
  CHECK(std::abs(qlogei(m, ap, 0.8, cfg, Z) - va) <= 1e-8);
  const double vb = qlogei(m, b, 0.8, cfg, Z);
  CHECK(qlogei(m, b, 0.8, cfg, Z) == vb);
  CHECK(qlogei(m, a, 0.8, cfg, Z) == va);
}

TEST_CASE("optimizer finds the acquisition maximum of a 1-D toy") {
  const GpModel m = toy_model_1d();
  AcquisitionConfig cfg;
  const double f_best = -(0.45 - 0.55) * (0.45 - 0.55);
  const AcquisitionResult r = optimize_acquisition(m, f_best, cfg, 5);
  REQUIRE(r.batch.size() == 1);
  const Eigen::MatrixXd Z = qmc_normals(cfg.mc_samples, 1, splitmix64(5 ^ 0xAC05EEDULL));
  double best = -std::numeric_limits<double>::infinity(), arg = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double v = (i + 0.5) / 10000.0;
    const std::vector<Design> one{Design{{v}, {}, {}}};
    const double a = qlogei(m, one, f_best, cfg, Z);
    if (a > best) {
      best = a;
      arg = v;
    }
  }
  CHECK(std::abs(r.batch[0].v[0] - arg) <= 0.05);
  CHECK(r.value >= r.best_raw_value);
  CHECK(r.value == doctest::Approx(best).epsilon(1e-3));
}

TEST_CASE("optimizer is deterministic and never returns worse than raw") {
  Rng rng = make_rng(32);
  const DesignShape shape{0, 2, 2};
  std::vector<Design> X;
  std::vector<double> y;
  for (int i = 0; i < 8; ++i) {
    X.push_back(random_design(rng, shape));
    y.push_back(-squared_distance(X.back().inj[0], X.back().prod[0]));
  }
  auto k = std::shared_ptr<const Kernel>(make_gp_perm_kernel(shape, {}));
  const GpModel m = fit(X, y, k, GpFitOptions{});
  AcquisitionConfig cfg;
  cfg.q = 2;
  cfg.raw_samples = 32;
  cfg.restarts = 2;
  cfg.ascent_steps = 5;
  const double fb = *std::max_element(y.begin(), y.end());
  const AcquisitionResult a = optimize_acquisition(m, fb, cfg, 9);
  const AcquisitionResult b = optimize_acquisition(m, fb, cfg, 9);
  CHECK(a.batch == b.batch);
  CHECK(a.value == b.value);
  CHECK(a.value >= a.best_raw_value);
  for (const auto& x : a.batch)
    for (const auto& p : x.inj) {
      CHECK(p.x >= 0.0);
      CHECK(p.x <= 1.0);
    }

  // A zero-weight barrier leaves the search untouched.
  const SdfQuery field = [](Point2 p) { return 0.5 - std::abs(p.x - 0.5); };
  AcquisitionConfig zero = cfg;
  zero.barrier = BarrierConfig{0.1, 0.0, 20.0};
  const AcquisitionResult c = optimize_acquisition(m, fb, zero, 9, &field);
  CHECK(c.batch == a.batch);
  CHECK(c.value == a.value);
}

TEST_CASE("barrier penalty") {
  const SdfQuery field = [](Point2 p) { return p.x; };
  const BarrierConfig b{0.1, 2.0, 50.0};
  const std::vector<Point2> deep{{0.1 + 10.0 / 50.0, 0.0}};
  CHECK(barrier_penalty(deep, field, b) <= b.weight * 1e-4);
  const std::vector<Point2> outside{{-0.2, 0.0}};
  CHECK(barrier_penalty(outside, field, b) > b.weight * b.margin);
  const std::vector<Point2> far{{-5.0, 0.0}};
  CHECK(barrier_penalty(far, field, b) == doctest::Approx(b.weight * 5.1).epsilon(1e-6));
  CHECK(barrier_penalty(outside, field, BarrierConfig{0.1, 0.0, 50.0}) == 0.0);
}

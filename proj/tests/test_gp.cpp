#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "permbo/gp.hpp"
#include "support.hpp"

using namespace permbo;
using namespace permbo::testing;

namespace {

struct Problem {
  DesignShape shape;
  std::vector<Design> X;
  std::vector<double> y;
};

double toy_objective(const Design& x) {
  double s = 0.0;
  for (double v : x.v) s += std::sin(3.0 * v);
  for (const auto& p : x.inj) s -= (p.x - 0.3) * (p.x - 0.3) + (p.y - 0.6) * (p.y - 0.6);
  for (const auto& p : x.prod) s += 0.5 * p.x * p.y;
  return s;
}

Problem make_problem(Rng& rng, const DesignShape& shape, int n) {
  Problem p{shape, {}, {}};
  for (int i = 0; i < n; ++i) {
    p.X.push_back(random_design(rng, shape));
    p.y.push_back(toy_objective(p.X.back()));
  }
  return p;
}

std::shared_ptr<const Kernel> perm_kernel(const DesignShape& s) {
  return make_gp_perm_kernel(s, {});
}

/// -1/2 y^T A^-1 y - 1/2 log det A - n/2 log 2 pi with a dense inverse.
double dense_mll(const GpModel& m) {
  std::vector<Design> X;
  for (const auto& p : m.training()) X.push_back(p.design);
  Eigen::MatrixXd A = m.kernel().matrix(X, m.log_params());
  A.diagonal().array() += m.noise() + m.jitter_used();
  const Eigen::VectorXd& y = m.y_std();
  const double n = static_cast<double>(y.size());
  return -0.5 * y.dot(A.inverse() * y) - 0.5 * std::log(A.determinant()) -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace

TEST_CASE("standardize") {
  const std::vector<double> c{1, 1, 1};
  const auto s = standardize(c);
  CHECK(s.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.sd == kSdFloor);
  CHECK(s.mean == 1.0);

  const std::vector<double> two{0, 2};
  const auto t = standardize(two);
  CHECK(t.values[0] == doctest::Approx(-1.0));
  CHECK(t.values[1] == doctest::Approx(1.0));

  const std::vector<double> r{3.5, -1.25, 7.0, 0.0, 2.2};
  const auto u = standardize(r);
  const auto back = destandardize(u.values, u.mean, u.sd);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(std::abs(back[i] - r[i]) <= 1e-12);
}

TEST_CASE("single point marginal likelihood") {
  const DesignShape shape{1, 0, 0};
  auto k = std::shared_ptr<const Kernel>(make_flat_kernel(shape));
  const std::vector<Design> X{Design{{0.3}, {}, {}}};
  const std::vector<double> y{4.0};
  const GpModel m = GpModel::condition(k, X, y, k->unit_log_params(), 0.0);
  CHECK(m.log_marginal_likelihood() == doctest::Approx(-0.918939).epsilon(1e-5));
}

TEST_CASE("marginal likelihood matches a dense solve") {
  Rng rng = make_rng(21);
  for (const DesignShape shape : {DesignShape{2, 2, 3}, DesignShape{0, 4, 0}}) {
    const Problem p = make_problem(rng, shape, 5);
    for (auto kernel : {perm_kernel(shape), std::shared_ptr<const Kernel>(make_flat_kernel(shape)),
                        std::shared_ptr<const Kernel>(
                            make_set_kernel(shape, SetKernelKind::DeepEmbedding))}) {
      const auto P = kernel->prepare_all(p.X);
      const GpModel m =
          GpModel::condition(kernel, p.X, p.y, kernel->initial_log_params(P), 1e-3);
      CHECK(std::abs(m.log_marginal_likelihood() - dense_mll(m)) <= 1e-10);
    }
  }
}

TEST_CASE("marginal likelihood gradient matches finite differences") {
  Rng rng = make_rng(22);
  const DesignShape shape{2, 3, 3};
  for (int rep = 0; rep < 3; ++rep) {
    const Problem p = make_problem(rng, shape, 10);
    for (auto kernel : {perm_kernel(shape),
                        std::shared_ptr<const Kernel>(make_set_kernel(shape, SetKernelKind::DoubleSum))}) {
      const auto P = kernel->prepare_all(p.X);
      Eigen::VectorXd lp = kernel->initial_log_params(P);
      for (Eigen::Index i = 0; i < lp.size(); ++i) lp[i] += 0.2 * standard_normal(rng);
      const double noise = 0.05;
      const GpModel m = GpModel::condition(kernel, p.X, p.y, lp, noise);
      Eigen::VectorXd g;
      m.log_marginal_likelihood(&g);
      REQUIRE(g.size() == lp.size() + 1);
      const double h = 1e-5;
      auto mll_at = [&](const Eigen::VectorXd& l, double nz) {
        return GpModel::condition(kernel, p.X, p.y, l, nz).log_marginal_likelihood();
      };
      for (Eigen::Index i = 0; i <= lp.size(); ++i) {
        double fd;
        if (i < lp.size()) {
          Eigen::VectorXd up = lp, dn = lp;
          up[i] += h;
          dn[i] -= h;
          fd = (mll_at(up, noise) - mll_at(dn, noise)) / (2 * h);
        } else {
          fd = (mll_at(lp, noise * std::exp(h)) - mll_at(lp, noise * std::exp(-h))) / (2 * h);
        }
        CHECK(std::abs(g[i] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-2));
      }
    }
  }
}

TEST_CASE("noiseless interpolation") {
  Rng rng = make_rng(23);
  const DesignShape shape{1, 3, 2};
  const Problem p = make_problem(rng, shape, 12);
  const auto k = perm_kernel(shape);
  const GpModel m = GpModel::condition(k, p.X, p.y, k->initial_log_params(k->prepare_all(p.X)), 0.0);
  const Posterior post = m.posterior(p.X);
  const Eigen::VectorXd mean = post.mean_original();
  const double s2 = std::exp(m.log_params()[m.log_params().size() - 1]);
  for (std::size_t i = 0; i < p.y.size(); ++i) {
    CHECK(std::abs(mean[static_cast<Eigen::Index>(i)] - p.y[i]) <= 1e-4);
    CHECK(post.cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) <= 1e-6 * s2 + 1e-12);
  }
}

TEST_CASE("duplicate training rows need jitter but still factor") {
  const DesignShape shape{0, 2, 0};
  const Design x{{}, {{0.2, 0.3}, {0.7, 0.1}}, {}};
  const std::vector<Design> X{x, x};
  const std::vector<double> y{1.5, 1.5};
  const auto k = perm_kernel(shape);
  const GpModel m = GpModel::condition(k, X, y, k->unit_log_params(), 0.0);
  CHECK(m.jitter_used() > 0.0);
  GpFitOptions opts;
  const GpModel f = fit(X, y, k, opts);
  CHECK(f.jitter_used() > 0.0);
  CHECK(f.posterior(X).mean_original()[0] == doctest::Approx(1.5));
}

TEST_CASE("constant targets give a constant predictor") {
  Rng rng = make_rng(24);
  const DesignShape shape{1, 2, 2};
  std::vector<Design> X;
  for (int i = 0; i < 6; ++i) X.push_back(random_design(rng, shape));
  const std::vector<double> y(6, -2.5);
  const auto k = perm_kernel(shape);
  const GpModel m = fit(X, y, k, GpFitOptions{});
  std::vector<Design> Q;
  for (int i = 0; i < 5; ++i) Q.push_back(random_design(rng, shape));
  const Posterior post = m.posterior(Q);
  const double prior = std::exp(m.log_params()[m.log_params().size() - 1]);
  for (Eigen::Index i = 0; i < post.mean.size(); ++i) {
    CHECK(post.mean_original()[i] == doctest::Approx(-2.5));
    CHECK(post.cov(i, i) <= prior + 1e-8);
  }
}

TEST_CASE("far queries revert to the prior") {
  const DesignShape shape{2, 0, 0};
  const auto k = std::shared_ptr<const Kernel>(make_flat_kernel(shape));
  const std::vector<Design> X{Design{{0.0, 0.0}, {}, {}}, Design{{0.1, 0.05}, {}, {}},
                              Design{{0.05, 0.1}, {}, {}}};
  const std::vector<double> y{1.0, 3.0, 2.0};
  Eigen::VectorXd lp = Eigen::VectorXd::Constant(3, std::log(0.1));
  lp[2] = std::log(1.7);
  const GpModel m = GpModel::condition(k, X, y, lp, 1e-6);
  const Posterior post = m.posterior(std::vector<Design>{Design{{50.0, -40.0}, {}, {}}});
  CHECK(post.mean_original()[0] == doctest::Approx(m.y_mean()).epsilon(1e-10));
  CHECK(post.cov(0, 0) == doctest::Approx(1.7).epsilon(1e-10));
}

TEST_CASE("posterior covariance is clamped on near-singular queries") {
  Rng rng = make_rng(25);
  const DesignShape shape{1, 3, 3};
  const Problem p = make_problem(rng, shape, 8);
  const auto k = perm_kernel(shape);
  const GpModel m = fit(p.X, p.y, k, GpFitOptions{});
  std::vector<Design> Q{random_design(rng, shape)};
  Q.push_back(Q[0]);
  Q.push_back(permuted(rng, Q[0]));
  Q.push_back(p.X[0]);
  Q.push_back(p.X[0]);
  const Posterior post = m.posterior(Q);
  CHECK((post.cov - post.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(post.cov);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 1.0 + 1e-9, 1.0 + 1e-9, 1.0;
  const Eigen::MatrixXd fixed = clamp_psd(bad);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(fixed);
  CHECK(es2.eigenvalues().minCoeff() >= 0.0);
  const Eigen::MatrixXd good = Eigen::MatrixXd::Identity(3, 3) * 2.0;
  CHECK(clamp_psd(good) == good);
}

TEST_CASE("fit improves the likelihood, is stationary and deterministic") {
  Rng rng = make_rng(26);
  const DesignShape shape{2, 3, 3};
  const Problem p = make_problem(rng, shape, 14);
  const auto k = perm_kernel(shape);
  GpFitOptions opts;
  opts.seed = 99;
  const GpModel a = fit(p.X, p.y, k, opts);
  const GpModel b = fit(p.X, p.y, k, opts);
  CHECK(a.log_params() == b.log_params());
  CHECK(a.noise() == b.noise());

  const GpModel init = GpModel::condition(k, p.X, p.y, k->initial_log_params(k->prepare_all(p.X)),
                                          opts.noise_init);
  CHECK(a.log_marginal_likelihood() >= init.log_marginal_likelihood());

  Eigen::VectorXd g;
  a.log_marginal_likelihood(&g);
  const Eigen::VectorXd& lp = a.log_params();
  for (Eigen::Index i = 0; i < lp.size(); ++i)
    if (std::abs(lp[i]) < 9.99) CHECK(std::abs(g[i]) <= 1e-3);
  if (a.noise() > opts.noise_floor * 1.001) CHECK(std::abs(g[lp.size()]) <= 1e-3);
}

TEST_CASE("posterior is invariant to well order in the training data") {
  Rng rng = make_rng(27);
  const DesignShape shape{1, 3, 4};
  const Problem p = make_problem(rng, shape, 10);
  const auto k = perm_kernel(shape);
  const GpModel a = fit(p.X, p.y, k, GpFitOptions{});
  std::vector<Design> Xp;
  for (const auto& x : p.X) Xp.push_back(permuted(rng, x));
  const GpModel b = fit(Xp, p.y, k, GpFitOptions{});
  std::vector<Design> Q;
  for (int i = 0; i < 6; ++i) Q.push_back(random_design(rng, shape));
  const Eigen::VectorXd ma = a.posterior(Q).mean, mb = b.posterior(Q).mean;
  CHECK((ma - mb).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("prior-only model and argument checks") {
  const DesignShape shape{0, 2, 0};
  const auto k = perm_kernel(shape);
  const GpModel m = GpModel::condition(k, {}, {}, k->unit_log_params(), 1e-4);
  Rng rng = make_rng(28);
  const Posterior post = m.posterior(std::vector<Design>{random_design(rng, shape)});
  CHECK(post.mean[0] == 0.0);
  CHECK(post.cov(0, 0) == doctest::Approx(1.0));

  const std::vector<Design> one{random_design(rng, shape)};
  const std::vector<double> y1{1.0};
  CHECK_THROWS(fit(one, y1, k, GpFitOptions{}));
  const std::vector<Design> two{random_design(rng, shape), random_design(rng, shape)};
  const std::vector<double> ynan{1.0, std::nan("")};
  CHECK_THROWS(fit(two, ynan, k, GpFitOptions{}));
}

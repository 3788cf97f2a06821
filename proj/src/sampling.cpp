#include "permbo/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/sobol.hpp>

namespace permbo {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ (stream * 0xD1342543DE82EF95ULL + 1)));
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index on empty range");
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

Eigen::MatrixXd sobol_points(std::size_t n, std::size_t dim, std::uint64_t skip) {
  if (dim == 0) return Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0);
  boost::random::sobol engine(dim);
  engine.discard((skip + 1) * dim);
  constexpr double scale = 0x1.0p-64;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = static_cast<double>(engine()) * scale;
  return out;
}

Eigen::MatrixXd shifted_sobol(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Eigen::MatrixXd pts = sobol_points(n, dim, 0);
  Rng rng = make_rng(seed, 0x50B01);
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const double shift = uniform01(rng);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      double u = pts(i, j) + shift;
      pts(i, j) = u >= 1.0 ? u - 1.0 : u;
    }
  }
  return pts;
}

Eigen::MatrixXd qmc_normals(std::size_t M, std::size_t q, std::uint64_t seed) {
  Eigen::MatrixXd z = shifted_sobol(M, q, seed);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      z(i, j) = normal_quantile(std::clamp(z(i, j), 1e-12, 1.0 - 1e-12));
  return z;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> unit;
  return boost::math::quantile(unit, p);
}

}  // namespace permbo

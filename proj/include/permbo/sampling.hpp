#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace permbo {

/// mt19937_64 output is fixed by the standard; the draws below avoid the
/// implementation-defined std distributions so streams match across toolchains.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
/// Box-Muller; consumes two uniforms per call.
double standard_normal(Rng& rng);
/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// n points of the dim-dimensional Sobol sequence in [0,1)^dim, starting after
/// the all-zero point plus `skip` further points.
Eigen::MatrixXd sobol_points(std::size_t n, std::size_t dim, std::uint64_t skip = 0);

/// Sobol points with a Cranley-Patterson rotation drawn from seed.
Eigen::MatrixXd shifted_sobol(std::size_t n, std::size_t dim, std::uint64_t seed);

/// M x q standard normals from shifted Sobol points through the inverse CDF.
Eigen::MatrixXd qmc_normals(std::size_t M, std::size_t q, std::uint64_t seed);

double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

}  // namespace permbo

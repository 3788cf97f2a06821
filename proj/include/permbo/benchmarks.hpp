#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "permbo/design.hpp"

namespace permbo {

enum class BenchmarkId {
  Particle,
  MaxArea,
  MmdMatch,
  MaxSpanningTree,
  Facility,
  SoftKmedoids,
  CcsLike,
  TwosetAblation,
};

std::string to_string(BenchmarkId id);
BenchmarkId benchmark_from_string(const std::string& name);
const std::vector<BenchmarkId>& all_benchmarks();

struct ParticleConstants {
  double A = 1.0;
  double B = 0.1;
  double alpha = 1.0;
  double beta = 2.0;
  double eps = 1e-2;
  Point2 target{0.0, 0.0};
};

struct MaxAreaConstants {
  double r = 0.25;
  double C = 1.0;
  double k = 10.0;
  std::size_t mc_points = 20000;
};

struct MmdConstants {
  std::size_t M = 5000;
  double weight1 = 0.7;
  Point2 mean1{-0.5, -0.5};
  Point2 mean2{0.5, 0.5};
  double sd = 0.15;
  /// RBF bandwidth; 0 selects the median pairwise distance of the targets.
  double bandwidth = 0.0;
  /// Targets used for the median heuristic (all pairs of 5000 is wasteful).
  std::size_t median_subsample = 1000;
};

struct FacilityConstants {
  double sigma = 0.25;
  double lambda = 0.01;
  double kappa = 20.0;
  double r_rep = 0.1;
  std::size_t M = 1000;
};

struct KmedoidsConstants {
  double tau = 0.05;
  std::size_t M = 1000;
  double ring_radius = 0.6;
  double ring_sd = 0.05;
  double ring_fraction = 0.7;
  Point2 blob_center{0.3, -0.3};
  double blob_sd = 0.1;
};

struct CcsConstants {
  double d_star = 0.6;
  double sigma_d = 0.2;
  double sigma_theta = 0.5;
  Point2 u{1.0, 0.0};
  double tau = 0.05;
  double w_inj = 0.05;
  double w_prod = 0.05;
  double eps = 1e-4;
};

struct TwosetConstants {
  double tau = 0.05;
  double lambda_inj = 0.05;
  double lambda_prod = 0.05;
  double eps = 1e-4;
};

struct BenchmarkSpec {
  BenchmarkId id = BenchmarkId::Particle;
  /// Set size for single-set benchmarks.
  std::size_t n_points = 10;
  std::size_t n_inj = 0;
  std::size_t n_prod = 0;
  std::uint64_t aux_seed = 0;
  double lower = -1.0;
  double upper = 1.0;

  ParticleConstants particle;
  MaxAreaConstants max_area;
  MmdConstants mmd;
  FacilityConstants facility;
  KmedoidsConstants kmedoids;
  CcsConstants ccs;
  TwosetConstants twoset;

  bool two_set() const { return id == BenchmarkId::CcsLike || id == BenchmarkId::TwosetAblation; }
  /// Single-set benchmarks put their points in `inj`.
  DesignShape shape() const;
  void validate() const;
};

/// Default sizes: Table-1 set sizes; 3/5 wells for CCS-like, 4/6 for two-set.
BenchmarkSpec default_spec(BenchmarkId id);

// Objectives on the native [-1,1]^2 box. Higher is better throughout.
double particle_energy(std::span<const Point2> S, const ParticleConstants& c);
/// mc_points are uniform over a box of area box_area.
double max_area_coverage(std::span<const Point2> S, const MaxAreaConstants& c,
                         std::span<const Point2> mc_points, double box_area = 4.0);
/// target_self is (1/(M(M-1))) sum_{i != j} k(y_i, y_j).
double mmd_objective(std::span<const Point2> S, std::span<const Point2> targets, double bandwidth,
                     double target_self);
double max_spanning_tree(std::span<const Point2> S);
double facility_coverage(std::span<const Point2> S, const FacilityConstants& c,
                         std::span<const Point2> clients);
double soft_kmedoids(std::span<const Point2> S, const KmedoidsConstants& c,
                     std::span<const Point2> data);
double ccs_like_objective(std::span<const Point2> I, std::span<const Point2> P, const CcsConstants& c);
double twoset_ablation_objective(std::span<const Point2> I, std::span<const Point2> P,
                                 const TwosetConstants& c);

double rbf(Point2 a, Point2 b, double bandwidth);
double median_pairwise_distance(std::span<const Point2> pts);

/// A benchmark with its auxiliary data frozen from aux_seed.
class Benchmark {
 public:
  explicit Benchmark(BenchmarkSpec spec);

  const BenchmarkSpec& spec() const { return spec_; }
  DesignShape shape() const { return spec_.shape(); }
  /// Evaluates a design given in native coordinates.
  double operator()(const Design& x) const;

  /// Monte Carlo points, MMD targets, clients or data set (empty when unused).
  std::span<const Point2> aux() const { return *aux_; }
  double mmd_bandwidth() const { return bandwidth_; }

 private:
  BenchmarkSpec spec_;
  std::shared_ptr<const std::vector<Point2>> aux_;
  double bandwidth_ = 0.0;
  double target_self_ = 0.0;
};

}  // namespace permbo

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace permbo {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
double distance(Point2 a, Point2 b);
double squared_distance(Point2 a, Point2 b);

/// An unordered multiset of planar points. Storage order carries no meaning;
/// every consumer of two sets must return the same value for any reordering.
using PointSet = std::vector<Point2>;

struct SinkhornConfig {
  double epsilon = 0.1;
  int max_iters = 200;
  /// Stop once the sup-norm change of both dual potentials drops below tol.
  double tol = 1e-6;

  void validate() const;
};

struct OtResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct DivergenceResult {
  double value = 0.0;
  bool converged = true;
};

/// Pairwise Euclidean costs, |S| x |T|.
Eigen::MatrixXd cost_matrix(std::span<const Point2> S, std::span<const Point2> T);

/// Entropically regularized OT cost between uniform empirical measures:
/// <pi, C> + eps * KL(pi | a x b) at the Sinkhorn fixed point.
///
/// Both sets are put in canonical (lexicographic) order and the pair itself is
/// ordered before iterating, so the result is bitwise invariant to element
/// order and symmetric in its arguments. When exp(-C/eps) cannot underflow the
/// iteration runs on scalings; otherwise it falls back to log-sum-exp updates.
/// Both paths share one fixed point and the same stopping rule on the duals.
OtResult entropic_ot_cost(std::span<const Point2> S, std::span<const Point2> T,
                          const SinkhornConfig& cfg);

/// Debiased divergence max(0, W(S,T) - W(S,S)/2 - W(T,T)/2).
DivergenceResult sinkhorn_divergence(std::span<const Point2> S, std::span<const Point2> T,
                                     const SinkhornConfig& cfg);

/// Same as above with self terms supplied by the caller (kernel matrices reuse
/// them across every pair a set participates in).
DivergenceResult sinkhorn_divergence(std::span<const Point2> S, std::span<const Point2> T,
                                     double self_S, double self_T, const SinkhornConfig& cfg);

/// {p_b - i_a} for all a, b, a outer and b inner.
PointSet interaction_set(std::span<const Point2> I, std::span<const Point2> P);

/// Lexicographic sort by (x, y).
PointSet canonical_order(std::span<const Point2> S);

}  // namespace permbo

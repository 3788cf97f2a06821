#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "permbo/design.hpp"
#include "permbo/set_divergence.hpp"

namespace permbo {

// ---------------------------------------------------------------------------
// Closed-form kernels on single pairs of designs.
// ---------------------------------------------------------------------------

/// out_scale * (1 + sqrt5 d + 5 d^2 / 3) * exp(-sqrt5 d)
double matern52(double d, double out_scale = 1.0);

struct GpPermHyperparams {
  std::vector<double> ell_v;
  double ell_I = 1.0;
  double ell_P = 1.0;
  double ell_IP = 1.0;
  double out_scale = 1.0;
  double noise = 1e-4;
  double eps = 0.1;
  double ip_weight = 1.0;
};

struct SetKernelHyperparams {
  std::vector<double> ell_v;
  double base_ell = 1.0;
  double outer_ell = 1.0;
  double out_scale_vec = 1.0;
  double out_scale_I = 1.0;
  double out_scale_P = 1.0;
  double out_scale_R = 1.0;
  double noise = 1e-4;
};

enum class SetKernelKind { DoubleSum, DeepEmbedding };

/// Composite squared distance: ARD terms on v plus Sinkhorn divergences of the
/// injector, producer and (weighted) interaction sets. The entropic
/// regularization is h.eps; iteration limits come from cfg.
double gp_perm_distance2(const Design& x, const Design& y, const GpPermHyperparams& h,
                         const SinkhornConfig& cfg);
double gp_perm_kernel(const Design& x, const Design& y, const GpPermHyperparams& h,
                      const SinkhornConfig& cfg);

/// Mean RBF similarity over all cross pairs.
double ds_set_kernel(std::span<const Point2> S, std::span<const Point2> T, double base_ell);
/// exp(-MMD_V^2 / (2 outer^2)) with the biased (diagonal-inclusive) estimator.
double de_set_kernel(std::span<const Point2> S, std::span<const Point2> T, double base_ell,
                     double outer_ell);

double composite_baseline_kernel(const Design& x, const Design& y, const SetKernelHyperparams& h,
                                 SetKernelKind which);

/// Matern-5/2 on the ARD-scaled flattened vectors. Not permutation-invariant.
double flat_baseline_kernel(const Design& x, const Design& y, std::span<const double> ell,
                            double out_scale);

// ---------------------------------------------------------------------------
// Kernel objects used by the GP: hyperparameters are a vector of logs, and the
// hyperparameter-independent part of every pair (Sinkhorn values, squared
// element distances) is computed once and reused across likelihood steps.
// ---------------------------------------------------------------------------

enum class KernelFamily { Flat, GpPerm, DoubleSum, DeepEmbedding };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

struct PreparedDesign {
  Design design;
  PointSet interaction;
  /// Entropic self costs W(S,S) of I, P, R. Only GP-Perm fills these.
  std::array<double, 3> self_cost{};
};

class PairwiseTerms {
 public:
  virtual ~PairwiseTerms() = default;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  int sinkhorn_warnings = 0;
};

class Kernel {
 public:
  explicit Kernel(DesignShape shape) : shape_(shape) {}
  virtual ~Kernel() = default;

  virtual KernelFamily family() const = 0;
  const DesignShape& shape() const { return shape_; }

  virtual std::vector<std::string> param_names() const = 0;
  std::size_t num_params() const { return param_names().size(); }
  /// Every lengthscale and scale at 1.
  Eigen::VectorXd unit_log_params() const {
    return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_params()));
  }
  /// Median-distance heuristic over the training designs.
  virtual Eigen::VectorXd initial_log_params(std::span<const PreparedDesign> X) const = 0;

  virtual PreparedDesign prepare(const Design& x) const;
  std::vector<PreparedDesign> prepare_all(std::span<const Design> X) const;

  /// rows and cols may alias (same data pointer and size); the symmetric case
  /// then only computes the upper triangle.
  virtual std::unique_ptr<PairwiseTerms> terms(std::span<const PreparedDesign> rows,
                                               std::span<const PreparedDesign> cols) const = 0;

  /// Fills K (rows x cols) and, when grads is non-null, dK/d(log param) for
  /// every parameter in param_names() order.
  virtual void gram(const PairwiseTerms& terms, const Eigen::VectorXd& log_params,
                    Eigen::MatrixXd& K, std::vector<Eigen::MatrixXd>* grads) const = 0;

  double evaluate(const Design& x, const Design& y, const Eigen::VectorXd& log_params) const;
  Eigen::MatrixXd matrix(std::span<const Design> X, const Eigen::VectorXd& log_params) const;

 protected:
  DesignShape shape_;
};

struct GpPermOptions {
  SinkhornConfig sinkhorn;
  double ip_weight = 1.0;
};

std::unique_ptr<Kernel> make_gp_perm_kernel(const DesignShape& shape, const GpPermOptions& opts);
std::unique_ptr<Kernel> make_flat_kernel(const DesignShape& shape);
std::unique_ptr<Kernel> make_set_kernel(const DesignShape& shape, SetKernelKind kind);

/// Log-parameter vectors matching the layouts of the kernel objects above.
Eigen::VectorXd gp_perm_log_params(const DesignShape& shape, const GpPermHyperparams& h);
Eigen::VectorXd set_kernel_log_params(const DesignShape& shape, const SetKernelHyperparams& h,
                                      SetKernelKind kind);

}  // namespace permbo

#include "permbo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace permbo {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873128;

const PointSet& component_set(const PreparedDesign& p, int c) {
  switch (c) {
    case 0: return p.design.inj;
    case 1: return p.design.prod;
    default: return p.interaction;
  }
}

const char* component_name(int c) {
  static constexpr const char* names[] = {"I", "P", "IP"};
  return names[c];
}

/// Set components a shape carries: I when there are injectors, P when there
/// are producers, R when both groups exist.
std::vector<int> set_components(const DesignShape& s, bool with_interaction) {
  std::vector<int> out;
  if (s.n_inj > 0) out.push_back(0);
  if (s.n_prod > 0) out.push_back(1);
  if (with_interaction && s.has_interaction()) out.push_back(2);
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

bool aliased(std::span<const PreparedDesign> a, std::span<const PreparedDesign> b) {
  return a.data() == b.data() && a.size() == b.size();
}

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

/// dM/d(D^2) for the unit Matern-5/2, finite at D = 0.
Eigen::ArrayXXd matern52_dd2(const Eigen::ArrayXXd& r) {
  return -(5.0 / 6.0) * (1.0 + kSqrt5 * r) * (-kSqrt5 * r).exp();
}

Eigen::ArrayXXd matern52_unit(const Eigen::ArrayXXd& r) {
  return (1.0 + kSqrt5 * r + (5.0 / 3.0) * r.square()) * (-kSqrt5 * r).exp();
}

/// Squared per-component contributions for ARD-Matern forms.
class ArdTerms : public PairwiseTerms {
 public:
  std::vector<Eigen::MatrixXd> comps;
};

/// out_scale * M(sqrt(sum_c comps_c / ell_c^2)); gradients for the ell
/// entries are written at grad_offset.., the scale gradient at scale_index.
void ard_matern_gram(const std::vector<Eigen::MatrixXd>& comps, const double* log_ell,
                     double log_scale, Eigen::Index rows, Eigen::Index cols, Eigen::MatrixXd& K,
                     std::vector<Eigen::MatrixXd>* grads, std::size_t grad_offset,
                     std::size_t scale_index) {
  Eigen::ArrayXXd d2 = Eigen::ArrayXXd::Zero(rows, cols);
  for (std::size_t c = 0; c < comps.size(); ++c)
    d2 += comps[c].array() * std::exp(-2.0 * log_ell[c]);
  const Eigen::ArrayXXd r = d2.max(0.0).sqrt();
  const double scale = std::exp(log_scale);
  const Eigen::ArrayXXd k = scale * matern52_unit(r);
  K = k.matrix();
  if (!grads) return;
  const Eigen::ArrayXXd dk_dd2 = scale * matern52_dd2(r);
  for (std::size_t c = 0; c < comps.size(); ++c)
    (*grads)[grad_offset + c] =
        (dk_dd2 * comps[c].array() * (-2.0 * std::exp(-2.0 * log_ell[c]))).matrix();
  (*grads)[scale_index] = K;
}

void fill_vector_terms(std::span<const PreparedDesign> rows, std::span<const PreparedDesign> cols,
                       std::size_t dv, std::vector<Eigen::MatrixXd>& comps) {
  const bool sym = aliased(rows, cols);
  for (std::size_t j = 0; j < dv; ++j) {
    Eigen::MatrixXd m(idx(rows.size()), idx(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = sym ? a : 0; b < cols.size(); ++b) {
        const double d = rows[a].design.v[j] - cols[b].design.v[j];
        m(idx(a), idx(b)) = d * d;
        if (sym) m(idx(b), idx(a)) = d * d;
      }
    comps.push_back(std::move(m));
  }
}

std::vector<double> pairwise_values(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = a + 1; b < m.cols(); ++b) out.push_back(m(a, b));
  return out;
}

double heuristic_log_scale(const Eigen::MatrixXd& sq, double factor) {
  const double med = std::sqrt(std::max(0.0, median_of(pairwise_values(sq))));
  if (!(med > 1e-12)) return std::log(factor);
  return std::log(med * factor);
}

// ----------------------------------------------------------------- GP-Perm

class GpPermKernel final : public Kernel {
 public:
  GpPermKernel(const DesignShape& shape, const GpPermOptions& opts)
      : Kernel(shape), opts_(opts), comps_(set_components(shape, opts.ip_weight != 0.0)) {
    opts_.sinkhorn.validate();
    if (!(opts.ip_weight >= 0.0)) throw std::invalid_argument("ip_weight must be >= 0");
  }

  KernelFamily family() const override { return KernelFamily::GpPerm; }

  std::vector<std::string> param_names() const override {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < shape_.dv; ++j) names.push_back("log_ell_v" + std::to_string(j));
    for (int c : comps_) names.push_back(std::string("log_ell_") + component_name(c));
    names.push_back("log_out_scale");
    return names;
  }

  PreparedDesign prepare(const Design& x) const override {
    PreparedDesign p = Kernel::prepare(x);
    for (int c : comps_) {
      const PointSet& s = component_set(p, c);
      p.self_cost[static_cast<std::size_t>(c)] = entropic_ot_cost(s, s, opts_.sinkhorn).value;
    }
    return p;
  }

  std::unique_ptr<PairwiseTerms> terms(std::span<const PreparedDesign> rows,
                                       std::span<const PreparedDesign> cols) const override {
    auto t = std::make_unique<ArdTerms>();
    t->rows = idx(rows.size());
    t->cols = idx(cols.size());
    fill_vector_terms(rows, cols, shape_.dv, t->comps);
    const bool sym = aliased(rows, cols);
    for (int c : comps_) {
      const auto cu = static_cast<std::size_t>(c);
      const double w = (c == 2) ? opts_.ip_weight : 1.0;
      Eigen::MatrixXd m(t->rows, t->cols);
      for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = sym ? a : 0; b < cols.size(); ++b) {
          double s = 0.0;
          if (!(sym && a == b)) {
            const DivergenceResult r =
                sinkhorn_divergence(component_set(rows[a], c), component_set(cols[b], c),
                                    rows[a].self_cost[cu], cols[b].self_cost[cu], opts_.sinkhorn);
            if (!r.converged) ++t->sinkhorn_warnings;
            s = w * r.value;
          }
          m(idx(a), idx(b)) = s;
          if (sym) m(idx(b), idx(a)) = s;
        }
      t->comps.push_back(std::move(m));
    }
    return t;
  }

  void gram(const PairwiseTerms& terms, const Eigen::VectorXd& lp, Eigen::MatrixXd& K,
            std::vector<Eigen::MatrixXd>* grads) const override {
    const auto& t = static_cast<const ArdTerms&>(terms);
    if (grads) grads->resize(num_params());
    ard_matern_gram(t.comps, lp.data(), lp[lp.size() - 1], t.rows, t.cols, K, grads, 0,
                    num_params() - 1);
  }

  Eigen::VectorXd initial_log_params(std::span<const PreparedDesign> X) const override {
    Eigen::VectorXd lp = unit_log_params();
    if (X.size() < 2) return lp;
    const auto t = terms(X, X);
    const auto& comps = static_cast<const ArdTerms&>(*t).comps;
    const double factor = std::sqrt(static_cast<double>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c)
      lp[idx(c)] = heuristic_log_scale(comps[c], factor);
    return lp;
  }

 private:
  GpPermOptions opts_;
  std::vector<int> comps_;
};

// -------------------------------------------------------------------- flat

class FlatKernel final : public Kernel {
 public:
  explicit FlatKernel(const DesignShape& shape) : Kernel(shape) {}

  KernelFamily family() const override { return KernelFamily::Flat; }

  std::vector<std::string> param_names() const override {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < shape_.flat_dim(); ++k) names.push_back("log_ell" + std::to_string(k));
    names.push_back("log_out_scale");
    return names;
  }

  std::unique_ptr<PairwiseTerms> terms(std::span<const PreparedDesign> rows,
                                       std::span<const PreparedDesign> cols) const override {
    auto t = std::make_unique<ArdTerms>();
    t->rows = idx(rows.size());
    t->cols = idx(cols.size());
    std::vector<std::vector<double>> fr, fc;
    for (const auto& p : rows) fr.push_back(flatten(p.design));
    for (const auto& p : cols) fc.push_back(flatten(p.design));
    for (std::size_t k = 0; k < shape_.flat_dim(); ++k) {
      Eigen::MatrixXd m(t->rows, t->cols);
      for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b) {
          const double d = fr[a][k] - fc[b][k];
          m(idx(a), idx(b)) = d * d;
        }
      t->comps.push_back(std::move(m));
    }
    return t;
  }

  void gram(const PairwiseTerms& terms, const Eigen::VectorXd& lp, Eigen::MatrixXd& K,
            std::vector<Eigen::MatrixXd>* grads) const override {
    const auto& t = static_cast<const ArdTerms&>(terms);
    if (grads) grads->resize(num_params());
    ard_matern_gram(t.comps, lp.data(), lp[lp.size() - 1], t.rows, t.cols, K, grads, 0,
                    num_params() - 1);
  }

  Eigen::VectorXd initial_log_params(std::span<const PreparedDesign> X) const override {
    Eigen::VectorXd lp = unit_log_params();
    if (X.size() < 2) return lp;
    const auto t = terms(X, X);
    const auto& comps = static_cast<const ArdTerms&>(*t).comps;
    const double factor = std::sqrt(static_cast<double>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c)
      lp[idx(c)] = heuristic_log_scale(comps[c], factor);
    return lp;
  }
};

// ------------------------------------------------------------ DS / DE sets

/// Squared element distances laid out one column per design pair
/// (column index a + rows * b).
Eigen::MatrixXd element_sq_dists(std::span<const PreparedDesign> rows,
                                 std::span<const PreparedDesign> cols, int c) {
  const std::size_t ns = component_set(rows.front(), c).size();
  const std::size_t nt = component_set(cols.front(), c).size();
  Eigen::MatrixXd out(idx(ns * nt), idx(rows.size() * cols.size()));
  for (std::size_t b = 0; b < cols.size(); ++b)
    for (std::size_t a = 0; a < rows.size(); ++a) {
      const PointSet& S = component_set(rows[a], c);
      const PointSet& T = component_set(cols[b], c);
      const Eigen::Index col = idx(a + rows.size() * b);
      Eigen::Index k = 0;
      for (const Point2& s : S)
        for (const Point2& u : T) out(k++, col) = squared_distance(s, u);
    }
  return out;
}

Eigen::MatrixXd self_sq_dists(std::span<const PreparedDesign> ps, int c) {
  const std::size_t ns = component_set(ps.front(), c).size();
  Eigen::MatrixXd out(idx(ns * ns), idx(ps.size()));
  for (std::size_t a = 0; a < ps.size(); ++a) {
    const PointSet& S = component_set(ps[a], c);
    Eigen::Index k = 0;
    for (const Point2& s : S)
      for (const Point2& u : S) out(k++, idx(a)) = squared_distance(s, u);
  }
  return out;
}

class SetTerms : public PairwiseTerms {
 public:
  std::vector<Eigen::MatrixXd> vec_comps;
  std::vector<Eigen::MatrixXd> cross;
  std::vector<Eigen::MatrixXd> row_self;
  std::vector<Eigen::MatrixXd> col_self;
};

/// Column means of exp(-sq / (2 ell^2)) and of its log-ell derivative.
void rbf_means(const Eigen::MatrixXd& sq, double ell, Eigen::RowVectorXd& mean,
               Eigen::RowVectorXd* dmean) {
  const double inv = 1.0 / (ell * ell);
  const Eigen::ArrayXXd e = (-0.5 * inv * sq.array()).exp();
  const double n = static_cast<double>(sq.rows());
  mean = e.colwise().sum().matrix() / n;
  if (dmean) *dmean = (e * sq.array() * inv).colwise().sum().matrix() / n;
}

class SetKernel final : public Kernel {
 public:
  SetKernel(const DesignShape& shape, SetKernelKind kind)
      : Kernel(shape), kind_(kind), comps_(set_components(shape, true)) {
    if (comps_.empty() && shape.dv == 0) throw std::invalid_argument("empty design shape");
  }

  KernelFamily family() const override {
    return kind_ == SetKernelKind::DoubleSum ? KernelFamily::DoubleSum
                                             : KernelFamily::DeepEmbedding;
  }

  std::vector<std::string> param_names() const override {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < shape_.dv; ++j) names.push_back("log_ell_v" + std::to_string(j));
    if (shape_.dv > 0) names.push_back("log_out_scale_vec");
    for (int c : comps_) names.push_back(std::string("log_out_scale_") + component_name(c));
    names.push_back("log_base_ell");
    if (kind_ == SetKernelKind::DeepEmbedding) names.push_back("log_outer_ell");
    return names;
  }

  std::unique_ptr<PairwiseTerms> terms(std::span<const PreparedDesign> rows,
                                       std::span<const PreparedDesign> cols) const override {
    auto t = std::make_unique<SetTerms>();
    t->rows = idx(rows.size());
    t->cols = idx(cols.size());
    fill_vector_terms(rows, cols, shape_.dv, t->vec_comps);
    if (rows.empty() || cols.empty()) return t;
    for (int c : comps_) {
      t->cross.push_back(element_sq_dists(rows, cols, c));
      if (kind_ == SetKernelKind::DeepEmbedding) {
        t->row_self.push_back(self_sq_dists(rows, c));
        t->col_self.push_back(self_sq_dists(cols, c));
      }
    }
    return t;
  }

  void gram(const PairwiseTerms& terms, const Eigen::VectorXd& lp, Eigen::MatrixXd& K,
            std::vector<Eigen::MatrixXd>* grads) const override {
    const auto& t = static_cast<const SetTerms&>(terms);
    const Eigen::Index R = t.rows, C = t.cols;
    const std::size_t np = num_params();
    if (grads) grads->assign(np, Eigen::MatrixXd::Zero(R, C));
    K = Eigen::MatrixXd::Zero(R, C);
    std::size_t p = 0;
    if (shape_.dv > 0) {
      Eigen::MatrixXd kv;
      ard_matern_gram(t.vec_comps, lp.data(), lp[idx(shape_.dv)], R, C, kv, grads, 0, shape_.dv);
      K += kv;
      p = shape_.dv + 1;
    }
    const std::size_t base_idx = np - (kind_ == SetKernelKind::DeepEmbedding ? 2 : 1);
    const double base_ell = std::exp(lp[idx(base_idx)]);
    const double outer_ell =
        kind_ == SetKernelKind::DeepEmbedding ? std::exp(lp[idx(np - 1)]) : 1.0;
    if (R == 0 || C == 0) return;

    for (std::size_t ci = 0; ci < comps_.size(); ++ci, ++p) {
      const double scale = std::exp(lp[idx(p)]);
      Eigen::RowVectorXd cross, dcross;
      rbf_means(t.cross[ci], base_ell, cross, grads ? &dcross : nullptr);
      const Eigen::MatrixXd cm = cross.reshaped(R, C);
      if (kind_ == SetKernelKind::DoubleSum) {
        K += scale * cm;
        if (grads) {
          (*grads)[p] = scale * cm;
          (*grads)[base_idx] += scale * dcross.reshaped(R, C);
        }
        continue;
      }
      Eigen::RowVectorXd rs, drs, cs, dcs;
      rbf_means(t.row_self[ci], base_ell, rs, grads ? &drs : nullptr);
      rbf_means(t.col_self[ci], base_ell, cs, grads ? &dcs : nullptr);
      Eigen::ArrayXXd mmd(R, C);
      for (Eigen::Index b = 0; b < C; ++b)
        for (Eigen::Index a = 0; a < R; ++a) mmd(a, b) = rs[a] + cs[b] - 2.0 * cm(a, b);
      mmd = mmd.max(0.0);
      const double inv2o2 = 0.5 / (outer_ell * outer_ell);
      const Eigen::ArrayXXd kc = (-inv2o2 * mmd).exp();
      K += scale * kc.matrix();
      if (grads) {
        (*grads)[p] = scale * kc.matrix();
        (*grads)[np - 1] += (scale * kc * mmd * 2.0 * inv2o2).matrix();
        Eigen::ArrayXXd dmmd(R, C);
        const Eigen::MatrixXd dcm = dcross.reshaped(R, C);
        for (Eigen::Index b = 0; b < C; ++b)
          for (Eigen::Index a = 0; a < R; ++a) dmmd(a, b) = drs[a] + dcs[b] - 2.0 * dcm(a, b);
        (*grads)[base_idx] += (scale * kc * (-inv2o2) * dmmd).matrix();
      }
    }
  }

  Eigen::VectorXd initial_log_params(std::span<const PreparedDesign> X) const override {
    Eigen::VectorXd lp = unit_log_params();
    const std::size_t np = num_params();
    const double n_terms = static_cast<double>(comps_.size() + (shape_.dv > 0 ? 1 : 0));
    std::size_t p = 0;
    if (shape_.dv > 0) {
      if (X.size() >= 2) {
        std::vector<Eigen::MatrixXd> vc;
        fill_vector_terms(X, X, shape_.dv, vc);
        for (std::size_t j = 0; j < shape_.dv; ++j)
          lp[idx(j)] = heuristic_log_scale(vc[j], std::sqrt(static_cast<double>(shape_.dv)));
      }
      p = shape_.dv;
      lp[idx(p++)] = -std::log(n_terms);
    }
    for (std::size_t ci = 0; ci < comps_.size(); ++ci) lp[idx(p++)] = -std::log(n_terms);

    std::vector<Point2> pooled;
    for (const auto& x : X) {
      pooled.insert(pooled.end(), x.design.inj.begin(), x.design.inj.end());
      pooled.insert(pooled.end(), x.design.prod.begin(), x.design.prod.end());
    }
    std::vector<double> d;
    for (std::size_t a = 0; a < pooled.size(); ++a)
      for (std::size_t b = a + 1; b < pooled.size(); ++b) d.push_back(distance(pooled[a], pooled[b]));
    const double med = median_of(std::move(d));
    const double init = med > 1e-12 ? std::log(med) : 0.0;
    const std::size_t base_idx = np - (kind_ == SetKernelKind::DeepEmbedding ? 2 : 1);
    lp[idx(base_idx)] = init;
    if (kind_ == SetKernelKind::DeepEmbedding) lp[idx(np - 1)] = init;
    return lp;
  }

 private:
  SetKernelKind kind_;
  std::vector<int> comps_;
};

void check_pair(const Design& x, const Design& y) {
  if (shape_of(x) != shape_of(y)) throw std::invalid_argument("designs differ in shape");
}

}  // namespace

// ---------------------------------------------------------------- closed form

double matern52(double d, double out_scale) {
  if (!(d >= 0.0)) throw std::invalid_argument("matern52: distance must be nonnegative");
  if (std::isinf(d)) return 0.0;
  return out_scale * (1.0 + kSqrt5 * d + 5.0 * d * d / 3.0) * std::exp(-kSqrt5 * d);
}

double gp_perm_distance2(const Design& x, const Design& y, const GpPermHyperparams& h,
                         const SinkhornConfig& cfg) {
  check_pair(x, y);
  if (h.ell_v.size() != x.v.size()) throw std::invalid_argument("ell_v length mismatch");
  SinkhornConfig c = cfg;
  c.epsilon = h.eps;
  double d2 = 0.0;
  for (std::size_t j = 0; j < x.v.size(); ++j) {
    const double d = (x.v[j] - y.v[j]) / h.ell_v[j];
    d2 += d * d;
  }
  if (!x.inj.empty()) d2 += sinkhorn_divergence(x.inj, y.inj, c).value / (h.ell_I * h.ell_I);
  if (!x.prod.empty()) d2 += sinkhorn_divergence(x.prod, y.prod, c).value / (h.ell_P * h.ell_P);
  if (h.ip_weight != 0.0 && !x.inj.empty() && !x.prod.empty()) {
    const PointSet rx = interaction_set(x.inj, x.prod);
    const PointSet ry = interaction_set(y.inj, y.prod);
    d2 += h.ip_weight * sinkhorn_divergence(rx, ry, c).value / (h.ell_IP * h.ell_IP);
  }
  return d2;
}

double gp_perm_kernel(const Design& x, const Design& y, const GpPermHyperparams& h,
                      const SinkhornConfig& cfg) {
  return matern52(std::sqrt(gp_perm_distance2(x, y, h, cfg)), h.out_scale);
}

double ds_set_kernel(std::span<const Point2> S, std::span<const Point2> T, double base_ell) {
  if (S.empty() || T.empty()) throw std::invalid_argument("point set must be nonempty");
  const double inv = 1.0 / (2.0 * base_ell * base_ell);
  double s = 0.0;
  for (const Point2& a : S)
    for (const Point2& b : T) s += std::exp(-squared_distance(a, b) * inv);
  return s / static_cast<double>(S.size() * T.size());
}

double de_set_kernel(std::span<const Point2> S, std::span<const Point2> T, double base_ell,
                     double outer_ell) {
  const double mmd = std::max(0.0, ds_set_kernel(S, S, base_ell) + ds_set_kernel(T, T, base_ell) -
                                       2.0 * ds_set_kernel(S, T, base_ell));
  return std::exp(-mmd / (2.0 * outer_ell * outer_ell));
}

double composite_baseline_kernel(const Design& x, const Design& y, const SetKernelHyperparams& h,
                                 SetKernelKind which) {
  check_pair(x, y);
  auto set_term = [&](std::span<const Point2> S, std::span<const Point2> T) {
    return which == SetKernelKind::DoubleSum ? ds_set_kernel(S, T, h.base_ell)
                                             : de_set_kernel(S, T, h.base_ell, h.outer_ell);
  };
  double k = 0.0;
  if (!x.v.empty()) {
    if (h.ell_v.size() != x.v.size()) throw std::invalid_argument("ell_v length mismatch");
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.v.size(); ++j) {
      const double d = (x.v[j] - y.v[j]) / h.ell_v[j];
      d2 += d * d;
    }
    k += matern52(std::sqrt(d2), h.out_scale_vec);
  }
  if (!x.inj.empty()) k += h.out_scale_I * set_term(x.inj, y.inj);
  if (!x.prod.empty()) k += h.out_scale_P * set_term(x.prod, y.prod);
  if (!x.inj.empty() && !x.prod.empty())
    k += h.out_scale_R * set_term(interaction_set(x.inj, x.prod), interaction_set(y.inj, y.prod));
  return k;
}

double flat_baseline_kernel(const Design& x, const Design& y, std::span<const double> ell,
                            double out_scale) {
  const std::vector<double> fx = flatten(x);
  const std::vector<double> fy = flatten(y);
  if (fx.size() != fy.size() || ell.size() != fx.size())
    throw std::invalid_argument("flattened length mismatch");
  double d2 = 0.0;
  for (std::size_t k = 0; k < fx.size(); ++k) {
    const double d = (fx[k] - fy[k]) / ell[k];
    d2 += d * d;
  }
  return matern52(std::sqrt(d2), out_scale);
}

// ------------------------------------------------------------------- objects

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Flat: return "GP_flat";
    case KernelFamily::GpPerm: return "GP_Perm";
    case KernelFamily::DoubleSum: return "DS_GP";
    case KernelFamily::DeepEmbedding: return "DE_GP";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "GP_flat") return KernelFamily::Flat;
  if (name == "GP_Perm") return KernelFamily::GpPerm;
  if (name == "DS_GP") return KernelFamily::DoubleSum;
  if (name == "DE_GP") return KernelFamily::DeepEmbedding;
  throw std::invalid_argument("unknown surrogate family '" + name + "'");
}

PreparedDesign Kernel::prepare(const Design& x) const {
  check_shape(x, shape_);
  PreparedDesign p{x, {}, {}};
  if (shape_.has_interaction()) p.interaction = interaction_set(x.inj, x.prod);
  return p;
}

std::vector<PreparedDesign> Kernel::prepare_all(std::span<const Design> X) const {
  std::vector<PreparedDesign> out;
  out.reserve(X.size());
  for (const Design& x : X) out.push_back(prepare(x));
  return out;
}

double Kernel::evaluate(const Design& x, const Design& y, const Eigen::VectorXd& log_params) const {
  const std::array<PreparedDesign, 2> p{prepare(x), prepare(y)};
  const auto t = terms(std::span(p).first(1), std::span(p).last(1));
  Eigen::MatrixXd K;
  gram(*t, log_params, K, nullptr);
  return K(0, 0);
}

Eigen::MatrixXd Kernel::matrix(std::span<const Design> X, const Eigen::VectorXd& log_params) const {
  const std::vector<PreparedDesign> p = prepare_all(X);
  const auto t = terms(p, p);
  Eigen::MatrixXd K;
  gram(*t, log_params, K, nullptr);
  return K;
}

std::unique_ptr<Kernel> make_gp_perm_kernel(const DesignShape& shape, const GpPermOptions& opts) {
  return std::make_unique<GpPermKernel>(shape, opts);
}

std::unique_ptr<Kernel> make_flat_kernel(const DesignShape& shape) {
  return std::make_unique<FlatKernel>(shape);
}

std::unique_ptr<Kernel> make_set_kernel(const DesignShape& shape, SetKernelKind kind) {
  return std::make_unique<SetKernel>(shape, kind);
}

Eigen::VectorXd gp_perm_log_params(const DesignShape& shape, const GpPermHyperparams& h) {
  std::vector<double> out;
  for (std::size_t j = 0; j < shape.dv; ++j) out.push_back(std::log(h.ell_v.at(j)));
  for (int c : set_components(shape, h.ip_weight != 0.0)) {
    const double ell = c == 0 ? h.ell_I : (c == 1 ? h.ell_P : h.ell_IP);
    out.push_back(std::log(ell));
  }
  out.push_back(std::log(h.out_scale));
  return Eigen::Map<Eigen::VectorXd>(out.data(), idx(out.size()));
}

Eigen::VectorXd set_kernel_log_params(const DesignShape& shape, const SetKernelHyperparams& h,
                                      SetKernelKind kind) {
  std::vector<double> out;
  for (std::size_t j = 0; j < shape.dv; ++j) out.push_back(std::log(h.ell_v.at(j)));
  if (shape.dv > 0) out.push_back(std::log(h.out_scale_vec));
  for (int c : set_components(shape, true)) {
    const double s = c == 0 ? h.out_scale_I : (c == 1 ? h.out_scale_P : h.out_scale_R);
    out.push_back(std::log(s));
  }
  out.push_back(std::log(h.base_ell));
  if (kind == SetKernelKind::DeepEmbedding) out.push_back(std::log(h.outer_ell));
  return Eigen::Map<Eigen::VectorXd>(out.data(), idx(out.size()));
}

}  // namespace permbo

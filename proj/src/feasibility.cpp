#include "permbo/feasibility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <tuple>

namespace permbo {

GridMask::GridMask(std::size_t nx, std::size_t ny, double cell_size, Point2 origin,
                   std::vector<bool> feasible)
    : nx_(nx), ny_(ny), cell_size_(cell_size), origin_(origin), feasible_(std::move(feasible)) {
  if (nx == 0 || ny == 0) throw std::invalid_argument("mask dimensions must be positive");
  if (!(cell_size > 0.0) || !std::isfinite(cell_size))
    throw std::invalid_argument("mask cell_size must be positive");
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y))
    throw std::invalid_argument("mask origin must be finite");
  if (feasible_.size() != nx * ny) throw std::invalid_argument("mask has wrong number of cells");
  for (std::size_t c = 0; c < feasible_.size(); ++c)
    if (feasible_[c]) feasible_cells_.push_back(c);
  if (feasible_cells_.empty()) throw std::invalid_argument("mask has no feasible cell");
}

Point2 GridMask::center(std::size_t cell) const {
  const double i = static_cast<double>(cell % nx_), j = static_cast<double>(cell / nx_);
  return {origin_.x + (i + 0.5) * cell_size_, origin_.y + (j + 0.5) * cell_size_};
}

std::size_t GridMask::locate(Point2 p) const {
  const double u = std::floor((p.x - origin_.x) / cell_size_);
  const double w = std::floor((p.y - origin_.y) / cell_size_);
  if (!(u >= 0.0 && w >= 0.0 && u < static_cast<double>(nx_) && w < static_cast<double>(ny_)))
    return num_cells();
  return index(static_cast<std::size_t>(u), static_cast<std::size_t>(w));
}

std::vector<double> interior_score(const GridMask& mask) {
  // Two-pass chamfer on a grid padded by one infeasible ring; exact for the 8-neighbourhood metric.
  const std::size_t W = mask.nx() + 2, H = mask.ny() + 2;
  const std::size_t big = W + H;
  std::vector<std::size_t> d(W * H, 0);
  for (std::size_t j = 0; j < mask.ny(); ++j)
    for (std::size_t i = 0; i < mask.nx(); ++i)
      if (mask.feasible(i, j)) d[(j + 1) * W + i + 1] = big;
  for (std::size_t j = 1; j + 1 < H; ++j)
    for (std::size_t i = 1; i + 1 < W; ++i) {
      auto& c = d[j * W + i];
      c = std::min({c, d[j * W + i - 1] + 1, d[(j - 1) * W + i - 1] + 1, d[(j - 1) * W + i] + 1,
                    d[(j - 1) * W + i + 1] + 1});
    }
  for (std::size_t j = H - 2; j >= 1; --j)
    for (std::size_t i = W - 2; i >= 1; --i) {
      auto& c = d[j * W + i];
      c = std::min({c, d[j * W + i + 1] + 1, d[(j + 1) * W + i + 1] + 1, d[(j + 1) * W + i] + 1,
                    d[(j + 1) * W + i - 1] + 1});
    }
  std::vector<double> out(mask.num_cells());
  for (std::size_t j = 0; j < mask.ny(); ++j)
    for (std::size_t i = 0; i < mask.nx(); ++i)
      out[mask.index(i, j)] = static_cast<double>(d[(j + 1) * W + i + 1]);
  return out;
}

namespace {

// Exact 1-D squared distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& out) {
  const std::size_t n = f.size();
  std::vector<std::size_t> v(n);
  std::vector<double> z(n + 1);
  std::size_t k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto meet = [&](std::size_t q, std::size_t p) {
    const double dq = static_cast<double>(q), dp = static_cast<double>(p);
    return ((f[q] + dq * dq) - (f[p] + dp * dp)) / (2.0 * dq - 2.0 * dp);
  };
  for (std::size_t q = 1; q < n; ++q) {
    if (std::isinf(f[q])) continue;
    if (std::isinf(f[v[k]])) {
      v[k] = q;
      continue;
    }
    double s = meet(q, v[k]);
    while (k > 0 && s <= z[k]) {
      --k;
      s = meet(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double dq = static_cast<double>(q) - static_cast<double>(v[k]);
    out[q] = std::isinf(f[v[k]]) ? f[v[k]] : dq * dq + f[v[k]];
  }
}

// Squared distance (in cells) to the nearest source cell of a W x H grid.
std::vector<double> edt_2d(const std::vector<bool>& source, std::size_t W, std::size_t H) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(W * H);
  std::vector<double> col(H), colout(H);
  for (std::size_t i = 0; i < W; ++i) {
    for (std::size_t j = 0; j < H; ++j) col[j] = source[j * W + i] ? 0.0 : inf;
    edt_1d(col, colout);
    for (std::size_t j = 0; j < H; ++j) g[j * W + i] = colout[j];
  }
  std::vector<double> row(W), rowout(W);
  for (std::size_t j = 0; j < H; ++j) {
    std::copy_n(g.begin() + static_cast<std::ptrdiff_t>(j * W), W, row.begin());
    edt_1d(row, rowout);
    std::copy_n(rowout.begin(), W, g.begin() + static_cast<std::ptrdiff_t>(j * W));
  }
  return g;
}

}  // namespace

SdfField::SdfField(const GridMask& mask, std::vector<double> values)
    : nx_(mask.nx() + 2),
      ny_(mask.ny() + 2),
      cell_size_(mask.cell_size()),
      origin_{mask.origin().x - mask.cell_size(), mask.origin().y - mask.cell_size()},
      values_(std::move(values)) {
  if (values_.size() != nx_ * ny_) throw std::invalid_argument("sdf expects a padded grid");
}

double SdfField::operator()(Point2 p) const {
  const double u = (p.x - origin_.x) / cell_size_ - 0.5;
  const double w = (p.y - origin_.y) / cell_size_ - 0.5;
  const double umax = static_cast<double>(nx_ - 1), wmax = static_cast<double>(ny_ - 1);
  const double uc = std::clamp(u, 0.0, umax), wc = std::clamp(w, 0.0, wmax);
  const auto i0 = std::min(static_cast<std::size_t>(uc), nx_ - 2);
  const auto j0 = std::min(static_cast<std::size_t>(wc), ny_ - 2);
  const double fu = uc - static_cast<double>(i0), fw = wc - static_cast<double>(j0);
  auto v = [&](std::size_t i, std::size_t j) { return values_[j * nx_ + i]; };
  const double inner = (1 - fu) * (1 - fw) * v(i0, j0) + fu * (1 - fw) * v(i0 + 1, j0) +
                       (1 - fu) * fw * v(i0, j0 + 1) + fu * fw * v(i0 + 1, j0 + 1);
  const double out = std::hypot(u - uc, w - wc) * cell_size_;
  return inner - out;
}

SdfField sdf_from_mask(const GridMask& mask) {
  const std::size_t W = mask.nx() + 2, H = mask.ny() + 2;
  std::vector<bool> feas(W * H, false), infeas(W * H, true);
  for (std::size_t j = 0; j < mask.ny(); ++j)
    for (std::size_t i = 0; i < mask.nx(); ++i) {
      const bool f = mask.feasible(i, j);
      feas[(j + 1) * W + i + 1] = f;
      infeas[(j + 1) * W + i + 1] = !f;
    }
  const auto to_infeasible = edt_2d(infeas, W, H);
  const auto to_feasible = edt_2d(feas, W, H);
  std::vector<double> values(W * H);
  for (std::size_t c = 0; c < W * H; ++c)
    values[c] = feas[c] ? std::sqrt(to_infeasible[c]) * mask.cell_size()
                        : -std::sqrt(to_feasible[c]) * mask.cell_size();
  return SdfField(mask, std::move(values));
}

Design snap_design(const Design& x, const GridMask& mask, const std::vector<double>& interior,
                   std::size_t k_nearest) {
  const std::size_t wells = x.inj.size() + x.prod.size();
  if (wells > mask.num_feasible())
    throw InfeasibleDesignError("fewer feasible cells than wells");
  if (interior.size() != mask.num_cells()) throw std::invalid_argument("interior score size mismatch");
  if (k_nearest == 0) throw std::invalid_argument("k_nearest must be positive");

  std::vector<bool> taken(mask.num_cells(), false);
  std::vector<std::pair<double, std::size_t>> near;
  auto place = [&](Point2 p) {
    const std::size_t home = mask.locate(p);
    std::size_t pick = home;
    if (home == mask.num_cells() || !mask.feasible(home) || taken[home]) {
      near.clear();
      for (std::size_t c : mask.feasible_cells())
        if (!taken[c]) near.emplace_back(squared_distance(p, mask.center(c)), c);
      const std::size_t k = std::min(k_nearest, near.size());
      std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(k), near.end());
      auto key = [&](const std::pair<double, std::size_t>& e) {
        return std::make_tuple(interior[e.second], -e.first, e.second);
      };
      pick = std::max_element(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(k),
                              [&](const auto& a, const auto& b) { return key(a) < key(b); })
                 ->second;
    }
    taken[pick] = true;
    return mask.center(pick);
  };

  Design out{x.v, {}, {}};
  for (const auto& p : x.inj) out.inj.push_back(place(p));
  for (const auto& p : x.prod) out.prod.push_back(place(p));
  return out;
}

std::vector<std::size_t> sample_cells(const GridMask& mask, const std::vector<double>& interior,
                                      std::size_t n, Rng& rng) {
  if (n > mask.num_feasible()) throw InfeasibleDesignError("fewer feasible cells than wells");
  std::vector<std::size_t> pool = mask.feasible_cells();
  std::vector<double> weight;
  for (std::size_t c : pool) weight.push_back(1.0 + interior[c]);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < n; ++k) {
    double total = 0.0;
    for (double w : weight) total += w;
    double u = uniform01(rng) * total;
    std::size_t at = 0;
    while (at + 1 < pool.size() && u >= weight[at]) u -= weight[at++];
    out.push_back(pool[at]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(at));
    weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(at));
  }
  return out;
}

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::Full: return "full";
    case MaskKind::Disk: return "disk";
    case MaskKind::TwoLobes: return "two_lobes";
    case MaskKind::LShape: return "l_shape";
  }
  return "?";
}

MaskKind mask_from_string(const std::string& name) {
  for (MaskKind k : {MaskKind::Full, MaskKind::Disk, MaskKind::TwoLobes, MaskKind::LShape})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown mask kind: " + name);
}

namespace {

double segment_distance(double a, double b, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double t = std::clamp(((a - ax) * dx + (b - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
  return std::hypot(a - ax - t * dx, b - ay - t * dy);
}

}  // namespace

GridMask synthetic_mask(MaskKind kind, std::size_t nx, std::size_t ny, std::uint64_t seed,
                        const SyntheticMaskOptions& opts) {
  if (nx < 4 || ny < 4) throw std::invalid_argument("synthetic masks need nx, ny >= 4");
  if (!(opts.upper > opts.lower)) throw std::invalid_argument("mask bounds must satisfy lower < upper");
  if (kind == MaskKind::Disk && !(opts.disk_radius > 0.0))
    throw std::invalid_argument("disk radius must be positive");

  Rng rng = make_rng(seed, 0x10be5);
  const double c1x = 0.28 + uniform(rng, -0.05, 0.05), c1y = 0.30 + uniform(rng, -0.05, 0.05);
  const double c2x = 0.72 + uniform(rng, -0.05, 0.05), c2y = 0.70 + uniform(rng, -0.05, 0.05);
  const double r1 = uniform(rng, 0.17, 0.23), r2 = uniform(rng, 0.17, 0.23);
  const double corridor = 0.05;

  std::vector<bool> feasible(nx * ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const double a = (static_cast<double>(i) + 0.5) / static_cast<double>(nx);
      const double b = (static_cast<double>(j) + 0.5) / static_cast<double>(ny);
      bool f = true;
      switch (kind) {
        case MaskKind::Full: break;
        case MaskKind::Disk: f = std::hypot(a - 0.5, b - 0.5) <= 0.5 * opts.disk_radius; break;
        case MaskKind::TwoLobes:
          f = std::hypot(a - c1x, b - c1y) <= r1 || std::hypot(a - c2x, b - c2y) <= r2 ||
              segment_distance(a, b, c1x, c1y, c2x, c2y) <= corridor;
          break;
        case MaskKind::LShape: f = a <= 0.5 || b <= 0.5; break;
      }
      feasible[j * nx + i] = f;
    }
  const double cell = (opts.upper - opts.lower) / static_cast<double>(std::max(nx, ny));
  return GridMask(nx, ny, cell, {opts.lower, opts.lower}, std::move(feasible));
}

namespace {

std::string shortest(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace

GridMask read_mask(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::invalid_argument("mask file is empty");
  std::istringstream hs(header);
  long long nx = 0, ny = 0;
  double cell = 0, ox = 0, oy = 0;
  if (!(hs >> nx >> ny >> cell >> ox >> oy) || nx <= 0 || ny <= 0)
    throw std::invalid_argument("mask header must be 'nx ny cell_size origin_x origin_y'");
  const auto NX = static_cast<std::size_t>(nx), NY = static_cast<std::size_t>(ny);
  std::vector<bool> feasible(NX * NY);
  std::string line;
  for (std::size_t j = 0; j < NY; ++j) {
    if (!std::getline(in, line)) throw std::invalid_argument("mask file has too few rows");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() != NX) throw std::invalid_argument("mask row " + std::to_string(j) + " has wrong length");
    for (std::size_t i = 0; i < NX; ++i) {
      if (line[i] != '0' && line[i] != '1')
        throw std::invalid_argument("mask rows may only contain 0 and 1");
      feasible[j * NX + i] = line[i] == '1';
    }
  }
  return GridMask(NX, NY, cell, {ox, oy}, std::move(feasible));
}

GridMask read_mask_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open mask file: " + path);
  return read_mask(in);
}

void write_mask(std::ostream& out, const GridMask& mask) {
  out << mask.nx() << ' ' << mask.ny() << ' ' << shortest(mask.cell_size()) << ' '
      << shortest(mask.origin().x) << ' ' << shortest(mask.origin().y) << '\n';
  for (std::size_t j = 0; j < mask.ny(); ++j) {
    for (std::size_t i = 0; i < mask.nx(); ++i) out << (mask.feasible(i, j) ? '1' : '0');
    out << '\n';
  }
}

}  // namespace permbo

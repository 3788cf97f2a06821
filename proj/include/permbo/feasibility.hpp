#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "permbo/design.hpp"
#include "permbo/sampling.hpp"

namespace permbo {

struct InfeasibleDesignError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cell (i, j) spans origin + [i, i+1) x [j, j+1) times cell_size; j = 0 is the minimum-y row.
class GridMask {
 public:
  GridMask(std::size_t nx, std::size_t ny, double cell_size, Point2 origin, std::vector<bool> feasible);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t num_cells() const { return nx_ * ny_; }
  double cell_size() const { return cell_size_; }
  Point2 origin() const { return origin_; }

  std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }
  bool feasible(std::size_t cell) const { return feasible_[cell]; }
  bool feasible(std::size_t i, std::size_t j) const { return feasible_[index(i, j)]; }
  std::size_t num_feasible() const { return feasible_cells_.size(); }
  /// Feasible cell indices in increasing order.
  const std::vector<std::size_t>& feasible_cells() const { return feasible_cells_; }

  Point2 center(std::size_t cell) const;
  /// Cell containing p, or num_cells() when p lies outside the grid.
  std::size_t locate(Point2 p) const;

  friend bool operator==(const GridMask&, const GridMask&) = default;

 private:
  std::size_t nx_, ny_;
  double cell_size_;
  Point2 origin_;
  std::vector<bool> feasible_;
  std::vector<std::size_t> feasible_cells_;
};

/// Chebyshev distance (in cells) from each feasible cell to the nearest
/// infeasible cell, counting everything outside the grid as infeasible.
std::vector<double> interior_score(const GridMask& mask);

class SdfField {
 public:
  SdfField(const GridMask& mask, std::vector<double> values);

  /// Value at the center of a mask cell.
  double at_cell(std::size_t cell) const {
    return values_[(cell / (nx_ - 2) + 1) * nx_ + cell % (nx_ - 2) + 1];
  }
  /// Includes the infeasible ring around the mask, row-major over (nx+2) x (ny+2).
  const std::vector<double>& padded_values() const { return values_; }
  /// Bilinear between cell centers; beyond the grid the value keeps falling
  /// by the distance to the grid edge.
  double operator()(Point2 p) const;

 private:
  std::size_t nx_, ny_;
  double cell_size_;
  Point2 origin_;
  std::vector<double> values_;
};

/// Signed Euclidean distance between cell centers: a feasible cell gets the
/// distance to the nearest infeasible center (a ring outside the grid counts
/// as infeasible), an infeasible cell minus the distance to the nearest feasible one.
SdfField sdf_from_mask(const GridMask& mask);

/// Moves every well of x (native coordinates) onto a distinct feasible cell
/// center, injectors first. A well already inside a free feasible cell keeps
/// it; otherwise the k_nearest free feasible cells compete on
/// (interior, -distance, index).
Design snap_design(const Design& x, const GridMask& mask, const std::vector<double>& interior,
                   std::size_t k_nearest = 8);

/// n distinct feasible cells drawn without replacement with weight 1 + interior.
std::vector<std::size_t> sample_cells(const GridMask& mask, const std::vector<double>& interior,
                                      std::size_t n, Rng& rng);

enum class MaskKind { Full, Disk, TwoLobes, LShape };

std::string to_string(MaskKind kind);
MaskKind mask_from_string(const std::string& name);

struct SyntheticMaskOptions {
  double lower = -1.0;
  double upper = 1.0;
  /// Disk radius as a fraction of the half-width.
  double disk_radius = 0.8;
};

/// Square cells of size (upper - lower) / max(nx, ny) anchored at (lower, lower).
GridMask synthetic_mask(MaskKind kind, std::size_t nx, std::size_t ny, std::uint64_t seed,
                        const SyntheticMaskOptions& opts = {});

GridMask read_mask(std::istream& in);
GridMask read_mask_file(const std::string& path);
void write_mask(std::ostream& out, const GridMask& mask);

}  // namespace permbo

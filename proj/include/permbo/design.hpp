#pragma once

#include <cstddef>
#include <vector>

#include "permbo/set_divergence.hpp"

namespace permbo {

/// Structured input: auxiliary controls plus injector and producer sets.
/// Single-set problems use an empty v, the set in `inj`, and an empty `prod`.
struct Design {
  std::vector<double> v;
  PointSet inj;
  PointSet prod;

  friend bool operator==(const Design&, const Design&) = default;
};

struct DesignShape {
  std::size_t dv = 0;
  std::size_t n_inj = 0;
  std::size_t n_prod = 0;

  std::size_t num_wells() const { return n_inj + n_prod; }
  /// Length of the flattened vector: v, then injectors, then producers.
  std::size_t flat_dim() const { return dv + 2 * num_wells(); }
  bool has_interaction() const { return n_inj > 0 && n_prod > 0; }

  friend bool operator==(const DesignShape&, const DesignShape&) = default;
};

DesignShape shape_of(const Design& x);
/// Throws std::invalid_argument when x does not have the given shape.
void check_shape(const Design& x, const DesignShape& shape);

std::vector<double> flatten(const Design& x);
Design unflatten(std::span<const double> flat, const DesignShape& shape);

}  // namespace permbo

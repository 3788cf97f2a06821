#include "permbo/design.hpp"

#include <stdexcept>
#include <string>

namespace permbo {

DesignShape shape_of(const Design& x) { return {x.v.size(), x.inj.size(), x.prod.size()}; }

void check_shape(const Design& x, const DesignShape& shape) {
  if (shape_of(x) != shape)
    throw std::invalid_argument("design shape mismatch: expected dv=" + std::to_string(shape.dv) +
                                " n_inj=" + std::to_string(shape.n_inj) +
                                " n_prod=" + std::to_string(shape.n_prod));
}

std::vector<double> flatten(const Design& x) {
  std::vector<double> out(x.v);
  out.reserve(x.v.size() + 2 * (x.inj.size() + x.prod.size()));
  for (const Point2& p : x.inj) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  for (const Point2& p : x.prod) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  return out;
}

Design unflatten(std::span<const double> flat, const DesignShape& shape) {
  if (flat.size() != shape.flat_dim()) throw std::invalid_argument("flat vector length mismatch");
  Design x;
  x.v.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(shape.dv));
  std::size_t k = shape.dv;
  x.inj.resize(shape.n_inj);
  for (Point2& p : x.inj) {
    p = {flat[k], flat[k + 1]};
    k += 2;
  }
  x.prod.resize(shape.n_prod);
  for (Point2& p : x.prod) {
    p = {flat[k], flat[k + 1]};
    k += 2;
  }
  return x;
}

}  // namespace permbo

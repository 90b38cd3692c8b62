#pragma once

#include <cmath>
#include <vector>

#include "strnet/common.hpp"
#include "strnet/tensor.hpp"

namespace strnet {

// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; biases are zero-initialized
// by the callers.
inline Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(double(fan_in == 0 ? 1 : fan_in));
  std::vector<double> d(shape_numel(shape));
  for (auto& v : d) v = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(d));
}

}  // namespace strnet

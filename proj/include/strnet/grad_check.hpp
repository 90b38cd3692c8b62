#pragma once

#include <functional>
#include <string>
#include <vector>

#include "strnet/ops.hpp"
#include "strnet/tensor.hpp"

namespace strnet {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;

  std::string describe() const {
    return "max rel err " + std::to_string(max_rel_err) + " at coordinate " +
           std::to_string(worst_index) + " (analytic " + std::to_string(analytic) +
           ", central diff " + std::to_string(numeric) + ")";
  }
};

// Compares tape gradients of a scalar-valued function against central finite
// differences, coordinate-wise. `max_coords` = 0 checks every coordinate;
// otherwise coordinates are sampled with a fixed stride so the check stays
// deterministic.
inline GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& point, double eps = 1e-5,
                                  std::size_t max_coords = 0) {
  Tensor leaf(Shape(point.shape()),
              std::vector<double>(point.values().begin(), point.values().end()),
              /*requires_grad=*/true);
  Tensor y = f(leaf);
  if (y.size() != 1) throw ShapeError("grad_check expects a scalar-valued function");
  backward(y);
  const std::vector<double> analytic = leaf.grad();

  const std::size_t n = point.size();
  std::size_t stride = 1;
  if (max_coords > 0 && n > max_coords) stride = (n + max_coords - 1) / max_coords;

  GradCheckResult res;
  std::vector<double> base(point.values().begin(), point.values().end());
  for (std::size_t i = 0; i < n; i += stride) {
    std::vector<double> plus = base, minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    double fp = f(Tensor(Shape(point.shape()), std::move(plus))).value();
    double fm = f(Tensor(Shape(point.shape()), std::move(minus))).value();
    double numeric = (fp - fm) / (2.0 * eps);
    double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_index = i;
      res.analytic = analytic[i];
      res.numeric = numeric;
    }
  }
  return res;
}

}  // namespace strnet

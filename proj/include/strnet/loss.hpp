#pragma once

#include "strnet/ops.hpp"

namespace strnet {

struct LossWeights {
  double w_3d = 300.0;
  double w_2d = 300.0;
  double w_shape = 0.06;
  double w_pose = 60.0;

  void validate() const {
    if (w_3d < 0 || w_2d < 0 || w_shape < 0 || w_pose < 0)
      throw ValueError("loss weights must be nonnegative");
  }
};

struct LossTerms {
  Tensor total;  // scalar, differentiable
  double l3d = 0.0;
  double l2d = 0.0;
  double lshape = 0.0;
  double lpose = 0.0;
};

namespace loss_detail {

// Sum of per-row Euclidean norms of (a - b).
inline Tensor row_norm_sum(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("loss residual: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor diff = sub(a, b);
  const std::size_t rows = diff.dim(0);
  Tensor acc = Tensor::zeros({1});
  for (std::size_t r = 0; r < rows; ++r) acc = add(acc, euclid_norm(slice0(diff, r, r + 1)));
  return acc;
}

}  // namespace loss_detail

// L2 supervision of 3D joints, 2D joints, shape and pose:
//   L = w_3d sum_j |X_j - X^_j| + w_2d sum_j |x_j - x^_j|
//     + w_shape |beta - beta^| + w_pose sum_j |theta_j - theta^_j|
// Per-frame terms are scaled by `frame_count` when one prediction supervises
// a tiled window; the shape term is per-window and never scaled.
inline LossTerms loss_lg(const Tensor& pred_j3d, const Tensor& pred_j2d,
                         const Tensor& pred_theta, const Tensor& pred_beta,
                         const Tensor& gt_j3d, const Tensor& gt_j2d, const Tensor& gt_theta,
                         const Tensor& gt_beta, const LossWeights& w,
                         std::size_t frame_count = 1) {
  w.validate();
  if (frame_count == 0) throw ValueError("loss frame_count must be >= 1");
  Tensor t3d = loss_detail::row_norm_sum(pred_j3d, gt_j3d);
  Tensor t2d = loss_detail::row_norm_sum(pred_j2d, gt_j2d);
  Tensor tpose = loss_detail::row_norm_sum(pred_theta, gt_theta);
  Tensor tshape = euclid_norm(sub(pred_beta, gt_beta));

  const double fm = double(frame_count);
  LossTerms out;
  out.l3d = t3d.value();
  out.l2d = t2d.value();
  out.lpose = tpose.value();
  out.lshape = tshape.value();
  out.total = add(add(scale(t3d, w.w_3d * fm), scale(t2d, w.w_2d * fm)),
                  add(scale(tshape, w.w_shape), scale(tpose, w.w_pose * fm)));
  return out;
}

}  // namespace strnet

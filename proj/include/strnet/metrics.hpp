#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "strnet/common.hpp"
#include "strnet/tensor.hpp"

namespace strnet {

struct MetricsReport {
  double mpjpe = 0.0;
  double pa_mpjpe = 0.0;
  double mpvpe = 0.0;
  double accel_err = 0.0;
  std::size_t sample_count = 0;

  std::string csv() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%zu", mpjpe, pa_mpjpe, mpvpe,
                  accel_err, sample_count);
    return std::string("mpjpe,pa_mpjpe,mpvpe,accel_err,n\n") + buf + "\n";
  }
};

namespace metrics_detail {

inline void check_points(const Tensor& pred, const Tensor& gt, const char* what) {
  if (pred.rank() != 2 || pred.dim(1) != 3)
    throw ShapeError(std::string(what) + ": expected [Nx3] points, got " +
                     shape_str(pred.shape()));
  if (pred.shape() != gt.shape())
    throw ShapeError(std::string(what) + ": prediction " + shape_str(pred.shape()) +
                     " vs ground truth " + shape_str(gt.shape()));
}

// Jacobi eigenvalue iteration for a symmetric 4x4; returns the eigenvector of
// the largest eigenvalue. Converges to machine precision in a few sweeps.
inline std::array<double, 4> max_eigenvector_sym4(std::array<double, 16> a) {
  std::array<double, 16> v{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) off = std::max(off, std::abs(a[i * 4 + j]));
    if (off < 1e-15) break;
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) {
        if (std::abs(a[p * 4 + q]) < 1e-18) continue;
        double app = a[p * 4 + p], aqq = a[q * 4 + q], apq = a[p * 4 + q];
        double phi = 0.5 * std::atan2(2.0 * apq, aqq - app);
        double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < 4; ++k) {
          double akp = a[k * 4 + p], akq = a[k * 4 + q];
          a[k * 4 + p] = c * akp - s * akq;
          a[k * 4 + q] = s * akp + c * akq;
        }
        for (int k = 0; k < 4; ++k) {
          double apk = a[p * 4 + k], aqk = a[q * 4 + k];
          a[p * 4 + k] = c * apk - s * aqk;
          a[q * 4 + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 4; ++k) {
          double vkp = v[k * 4 + p], vkq = v[k * 4 + q];
          v[k * 4 + p] = c * vkp - s * vkq;
          v[k * 4 + q] = s * vkp + c * vkq;
        }
      }
  }
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (a[i * 4 + i] > a[best * 4 + best]) best = i;
  std::array<double, 4> q{v[0 * 4 + best], v[1 * 4 + best], v[2 * 4 + best], v[3 * 4 + best]};
  double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (auto& x : q) x /= n;
  return q;
}

inline std::array<double, 9> quat_to_rot(const std::array<double, 4>& q) {
  double w = q[0], x = q[1], y = q[2], z = q[3];
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w), 1 - 2 * (x * x + y * y)};
}

}  // namespace metrics_detail

// Optimal similarity transform (rotation, scale, translation) mapping src
// onto dst in the least-squares sense; rotation solved in closed form by the
// quaternion eigenvalue method, which always yields a proper rotation.
struct SimilarityTransform {
  std::array<double, 9> rot{1, 0, 0, 0, 1, 0, 0, 0, 1};
  double scale = 1.0;
  std::array<double, 3> trans{0, 0, 0};

  std::array<double, 3> apply(const double* p) const {
    std::array<double, 3> out;
    for (int a = 0; a < 3; ++a)
      out[a] = scale * (rot[a * 3] * p[0] + rot[a * 3 + 1] * p[1] + rot[a * 3 + 2] * p[2]) +
               trans[a];
    return out;
  }
};

inline SimilarityTransform solve_similarity(const Tensor& src, const Tensor& dst) {
  metrics_detail::check_points(src, dst, "solve_similarity");
  const std::size_t n = src.dim(0);
  if (n == 0) throw ValueError("solve_similarity with no points");

  double mu_s[3] = {0, 0, 0}, mu_d[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) {
      mu_s[a] += src.at(i, a) / double(n);
      mu_d[a] += dst.at(i, a) / double(n);
    }

  // cross-covariance of the centered point sets
  double s[9] = {0};
  double src_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double ps[3], pd[3];
    for (int a = 0; a < 3; ++a) {
      ps[a] = src.at(i, a) - mu_s[a];
      pd[a] = dst.at(i, a) - mu_d[a];
      src_var += ps[a] * ps[a];
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) s[a * 3 + b] += ps[a] * pd[b];
  }

  double sxx = s[0], sxy = s[1], sxz = s[2];
  double syx = s[3], syy = s[4], syz = s[5];
  double szx = s[6], szy = s[7], szz = s[8];
  std::array<double, 16> nmat{
      sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
      syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
      szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
      sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz};
  auto q = metrics_detail::max_eigenvector_sym4(nmat);

  SimilarityTransform t;
  t.rot = metrics_detail::quat_to_rot(q);

  // optimal scale given the rotation
  double num = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double ps[3], pd[3];
    for (int a = 0; a < 3; ++a) {
      ps[a] = src.at(i, a) - mu_s[a];
      pd[a] = dst.at(i, a) - mu_d[a];
    }
    for (int a = 0; a < 3; ++a)
      num += pd[a] * (t.rot[a * 3] * ps[0] + t.rot[a * 3 + 1] * ps[1] + t.rot[a * 3 + 2] * ps[2]);
  }
  t.scale = src_var > 1e-30 ? num / src_var : 1.0;

  for (int a = 0; a < 3; ++a)
    t.trans[a] = mu_d[a] - t.scale * (t.rot[a * 3] * mu_s[0] + t.rot[a * 3 + 1] * mu_s[1] +
                                      t.rot[a * 3 + 2] * mu_s[2]);
  return t;
}

// Mean per-joint position error after root-joint (joint 0) alignment.
inline double mpjpe(const Tensor& pred, const Tensor& gt) {
  metrics_detail::check_points(pred, gt, "mpjpe");
  const std::size_t n = pred.dim(0);
  if (n == 0) throw ValueError("mpjpe with no joints");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      double d = (pred.at(i, a) - pred.at(0, a)) - (gt.at(i, a) - gt.at(0, a));
      d2 += d * d;
    }
    acc += std::sqrt(d2);
  }
  return acc / double(n);
}

// MPJPE after the optimal closed-form similarity alignment.
inline double pa_mpjpe(const Tensor& pred, const Tensor& gt) {
  metrics_detail::check_points(pred, gt, "pa_mpjpe");
  const std::size_t n = pred.dim(0);
  if (n == 0) throw ValueError("pa_mpjpe with no joints");
  SimilarityTransform t = solve_similarity(pred, gt);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p[3] = {pred.at(i, 0), pred.at(i, 1), pred.at(i, 2)};
    auto q = t.apply(p);
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      double d = q[a] - gt.at(i, a);
      d2 += d * d;
    }
    acc += std::sqrt(d2);
  }
  return acc / double(n);
}

// Mean per-vertex position error, no alignment.
inline double mpvpe(const Tensor& pred_mesh, const Tensor& gt_mesh) {
  metrics_detail::check_points(pred_mesh, gt_mesh, "mpvpe");
  const std::size_t n = pred_mesh.dim(0);
  if (n == 0) throw ValueError("mpvpe with no vertices");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      double d = pred_mesh.at(i, a) - gt_mesh.at(i, a);
      d2 += d * d;
    }
    acc += std::sqrt(d2);
  }
  return acc / double(n);
}

// Mean joint-wise distance between predicted and ground-truth second
// temporal differences a(t) = p(t+1) - 2 p(t) + p(t-1); endpoints excluded.
inline double accel_error(const std::vector<Tensor>& pred_seq,
                          const std::vector<Tensor>& gt_seq) {
  if (pred_seq.size() != gt_seq.size())
    throw ShapeError("accel_error: sequence lengths differ");
  if (pred_seq.size() < 3)
    throw ValueError("accel_error needs at least 3 frames, got " +
                     std::to_string(pred_seq.size()));
  const std::size_t joints = pred_seq[0].dim(0);
  for (std::size_t f = 0; f < pred_seq.size(); ++f)
    metrics_detail::check_points(pred_seq[f], gt_seq[f], "accel_error");

  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 1; t + 1 < pred_seq.size(); ++t) {
    for (std::size_t j = 0; j < joints; ++j) {
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        double ap = pred_seq[t + 1].at(j, a) - 2.0 * pred_seq[t].at(j, a) +
                    pred_seq[t - 1].at(j, a);
        double ag = gt_seq[t + 1].at(j, a) - 2.0 * gt_seq[t].at(j, a) + gt_seq[t - 1].at(j, a);
        double d = ap - ag;
        d2 += d * d;
      }
      acc += std::sqrt(d2);
      ++count;
    }
  }
  return acc / double(count);
}

}  // namespace strnet

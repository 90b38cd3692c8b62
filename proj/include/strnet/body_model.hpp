#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "strnet/container.hpp"
#include "strnet/init.hpp"
#include "strnet/ops.hpp"

namespace strnet {

// Toy linear-blend body model: a procedurally generated vertex template,
// linear shape basis, acyclic kinematic tree with rest offsets, skinning
// weights and a joint regressor whose rows lie on the simplex. Small enough
// that every downstream number is reproducible from a seed.
struct ToyBodyModel {
  std::size_t n_vertices = 0;
  std::size_t n_joints = 0;
  std::size_t n_shape = 10;
  std::vector<double> template_verts;  // [Nv*3]
  std::vector<double> shape_basis;     // [n_shape*Nv*3]
  std::vector<int> parents;            // [J], parents[0] == -1, parents[j] < j
  std::vector<double> offsets;         // [J*3], offset from parent (root: absolute)
  std::vector<double> skin_weights;    // [Nv*J], rows sum to 1
  std::vector<double> joint_reg;       // [J*Nv], rows sum to 1

  // Rest-pose global joint positions from chaining offsets.
  std::vector<double> rest_joints() const {
    std::vector<double> pos(n_joints * 3, 0.0);
    for (std::size_t j = 0; j < n_joints; ++j) {
      for (int a = 0; a < 3; ++a) pos[j * 3 + a] = offsets[j * 3 + a];
      if (parents[j] >= 0)
        for (int a = 0; a < 3; ++a) pos[j * 3 + a] += pos[std::size_t(parents[j]) * 3 + a];
    }
    return pos;
  }

  void validate() const {
    if (n_joints == 0 || n_vertices == 0) throw ValueError("empty body model");
    if (parents.size() != n_joints || parents[0] != -1)
      throw ValueError("body model needs a single root at joint 0");
    for (std::size_t j = 1; j < n_joints; ++j)
      if (parents[j] < 0 || std::size_t(parents[j]) >= j)
        throw ValueError("body model kinematic tree is not topologically ordered");
    auto check_simplex = [](const std::vector<double>& m, std::size_t rows, std::size_t cols,
                            const char* what) {
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          if (m[r * cols + c] < -1e-12) throw ValueError(std::string(what) + ": negative weight");
          s += m[r * cols + c];
        }
        if (std::abs(s - 1.0) > 1e-9)
          throw ValueError(std::string(what) + ": row " + std::to_string(r) +
                           " does not sum to 1");
      }
    };
    check_simplex(skin_weights, n_vertices, n_joints, "skin weights");
    check_simplex(joint_reg, n_joints, n_vertices, "joint regressor");
  }

  static ToyBodyModel procedural(std::uint64_t seed, std::size_t joints = 6,
                                 std::size_t vertices = 30) {
    if (joints < 2) throw ValueError("toy body model needs at least 2 joints");
    if (vertices < joints) throw ValueError("toy body model needs at least one vertex per joint");
    Rng rng(seed ^ 0x5b0d1e9fULL);
    ToyBodyModel m;
    m.n_joints = joints;
    m.n_vertices = vertices;

    // heap-ordered tree, root at the origin
    m.parents.assign(joints, -1);
    m.offsets.assign(joints * 3, 0.0);
    for (std::size_t j = 1; j < joints; ++j) {
      m.parents[j] = int((j - 1) / 2);
      double len = rng.uniform(0.25, 0.45);
      double ax = rng.normal(), ay = rng.normal(), az = rng.normal();
      double n = std::sqrt(ax * ax + ay * ay + az * az) + 1e-12;
      m.offsets[j * 3 + 0] = len * ax / n;
      m.offsets[j * 3 + 1] = len * ay / n;
      m.offsets[j * 3 + 2] = len * az / n;
    }
    std::vector<double> rest = m.rest_joints();

    // vertices scattered around their anchor joints
    m.template_verts.assign(vertices * 3, 0.0);
    std::vector<std::size_t> anchor(vertices);
    for (std::size_t i = 0; i < vertices; ++i) {
      anchor[i] = i % joints;
      for (int a = 0; a < 3; ++a)
        m.template_verts[i * 3 + a] = rest[anchor[i] * 3 + a] + rng.uniform(-0.18, 0.18);
    }

    // skinning: softmax of negative distance to each joint
    m.skin_weights.assign(vertices * joints, 0.0);
    const double tau = 0.15;
    for (std::size_t i = 0; i < vertices; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < joints; ++j) {
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          double d = m.template_verts[i * 3 + a] - rest[j * 3 + a];
          d2 += d * d;
        }
        double w = std::exp(-std::sqrt(d2) / tau);
        m.skin_weights[i * joints + j] = w;
        denom += w;
      }
      for (std::size_t j = 0; j < joints; ++j) m.skin_weights[i * joints + j] /= denom;
    }

    // joint regressor: softmax over vertices, sharper so joints track their
    // own vertex cluster
    m.joint_reg.assign(joints * vertices, 0.0);
    const double tau_w = 0.08;
    for (std::size_t j = 0; j < joints; ++j) {
      double denom = 0.0;
      for (std::size_t i = 0; i < vertices; ++i) {
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          double d = m.template_verts[i * 3 + a] - rest[j * 3 + a];
          d2 += d * d;
        }
        double w = std::exp(-std::sqrt(d2) / tau_w);
        m.joint_reg[j * vertices + i] = w;
        denom += w;
      }
      for (std::size_t i = 0; i < vertices; ++i) m.joint_reg[j * vertices + i] /= denom;
    }

    m.shape_basis.assign(m.n_shape * vertices * 3, 0.0);
    for (auto& v : m.shape_basis) v = 0.06 * rng.normal();

    m.validate();
    return m;
  }

  void save(const std::string& path) const {
    ArrayContainer c;
    c.add_scalar("meta/n_vertices", double(n_vertices));
    c.add_scalar("meta/n_joints", double(n_joints));
    c.add_scalar("meta/n_shape", double(n_shape));
    c.add("template", {n_vertices, 3}, template_verts);
    c.add("basis", {n_shape, n_vertices, 3}, shape_basis);
    std::vector<double> par(parents.begin(), parents.end());
    c.add("parents", {n_joints}, std::move(par));
    c.add("offsets", {n_joints, 3}, offsets);
    c.add("skin_weights", {n_vertices, n_joints}, skin_weights);
    c.add("joint_regressor", {n_joints, n_vertices}, joint_reg);
    c.save(path);
  }

  static ToyBodyModel load(const std::string& path) {
    ArrayContainer c = ArrayContainer::load(path);
    ToyBodyModel m;
    m.n_vertices = std::size_t(c.get_scalar("meta/n_vertices"));
    m.n_joints = std::size_t(c.get_scalar("meta/n_joints"));
    m.n_shape = std::size_t(c.get_scalar("meta/n_shape"));
    m.template_verts = c.get("template").data;
    m.shape_basis = c.get("basis").data;
    for (double v : c.get("parents").data) m.parents.push_back(int(v));
    m.offsets = c.get("offsets").data;
    m.skin_weights = c.get("skin_weights").data;
    m.joint_reg = c.get("joint_regressor").data;
    m.validate();
    return m;
  }
};

// Pose/shape/camera for one frame. The weak-perspective camera backs the 2D
// joint term of the loss.
struct BodyParams {
  std::vector<double> theta;  // [J*3] axis-angle
  std::vector<double> beta;   // [10]
  double cam_s = 1.0;
  double cam_tx = 0.0;
  double cam_ty = 0.0;

  static BodyParams rest(std::size_t joints, std::size_t shapes = 10) {
    BodyParams p;
    p.theta.assign(joints * 3, 0.0);
    p.beta.assign(shapes, 0.0);
    return p;
  }
};

// Tracked counterpart used inside the differentiable pipeline.
struct BodyParamsT {
  Tensor theta;  // [J x 3]
  Tensor beta;   // [10]
  Tensor cam;    // [3] = (s, tx, ty)
};

// Axis-angle to rotation matrix. Both Rodrigues coefficients are smooth
// functions of theta^2, and the small-angle branch evaluates their Taylor
// series in theta^2 directly, so the map stays differentiable at zero.
inline Tensor rodrigues(const Tensor& axis_angle) {
  if (axis_angle.size() != 3) throw ShapeError("rodrigues expects 3 components");
  Tensor w = reshape(axis_angle, {3});
  Tensor theta_sq = sum_all(mul(w, w));
  double tsq = theta_sq.value();

  Tensor c1, c2;  // sin(t)/t and (1-cos(t))/t^2
  if (tsq < 1e-16) {
    Tensor t4 = mul(theta_sq, theta_sq);
    c1 = add(add_const(scale(theta_sq, -1.0 / 6.0), 1.0), scale(t4, 1.0 / 120.0));
    c2 = add(add_const(scale(theta_sq, -1.0 / 24.0), 0.5), scale(t4, 1.0 / 720.0));
  } else {
    Tensor theta = sqrt_op(theta_sq);
    c1 = div(sin_op(theta), theta);
    c2 = div(add_const(neg(cos_op(theta)), 1.0), theta_sq);
  }

  // skew(w) in row-major order: [[0,-wz,wy],[wz,0,-wx],[-wy,wx,0]]
  Tensor k = linear_map(w, {3, 3}, {{1, 2, -1.0},
                                    {2, 1, 1.0},
                                    {3, 2, 1.0},
                                    {5, 0, -1.0},
                                    {6, 1, -1.0},
                                    {7, 0, 1.0}});
  Tensor k2 = matmul(k, k);
  return add(Tensor::identity(3), add(mul_scalar_t(k, c1), mul_scalar_t(k2, c2)));
}

// Forward kinematics followed by linear blend skinning of the shaped
// template. Linear in beta at fixed theta.
inline Tensor body_forward(const ToyBodyModel& m, const Tensor& theta, const Tensor& beta) {
  if (theta.size() != m.n_joints * 3)
    throw ShapeError("body_forward: theta has " + std::to_string(theta.size()) +
                     " values, expected " + std::to_string(m.n_joints * 3));
  if (beta.size() != m.n_shape)
    throw ShapeError("body_forward: beta has " + std::to_string(beta.size()) +
                     " values, expected " + std::to_string(m.n_shape));

  const std::size_t nv = m.n_vertices, nj = m.n_joints;
  Tensor theta_rows = reshape(theta, {nj, 3});
  Tensor beta_vec = reshape(beta, {m.n_shape});

  // shaped template
  Tensor shaped(Shape{nv, 3}, std::vector<double>(m.template_verts));
  for (std::size_t k = 0; k < m.n_shape; ++k) {
    Tensor basis_k(Shape{nv, 3},
                   std::vector<double>(m.shape_basis.begin() + k * nv * 3,
                                       m.shape_basis.begin() + (k + 1) * nv * 3));
    shaped = add(shaped, mul_scalar_t(basis_k, slice0(beta_vec, k, k + 1)));
  }

  // forward kinematics
  std::vector<double> rest = m.rest_joints();
  std::vector<Tensor> glob_rot(nj), glob_pos(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    Tensor local = rodrigues(row(theta_rows, j));
    Tensor off(Shape{3, 1}, {m.offsets[j * 3], m.offsets[j * 3 + 1], m.offsets[j * 3 + 2]});
    if (m.parents[j] < 0) {
      glob_rot[j] = local;
      glob_pos[j] = off;
    } else {
      std::size_t par = std::size_t(m.parents[j]);
      glob_rot[j] = matmul(glob_rot[par], local);
      glob_pos[j] = add(matmul(glob_rot[par], off), glob_pos[par]);
    }
  }

  // blend skinning: sum_j w_ij * (Rg_j (v - rest_j) + pos_j)
  Tensor mesh = Tensor::zeros({nv, 3});
  for (std::size_t j = 0; j < nj; ++j) {
    std::vector<double> rest_tile(nv * 3);
    for (std::size_t i = 0; i < nv; ++i)
      for (int a = 0; a < 3; ++a) rest_tile[i * 3 + a] = rest[j * 3 + a];
    Tensor centered = sub(shaped, Tensor({nv, 3}, std::move(rest_tile)));
    Tensor posed = add_rowvec(matmul(centered, transpose(glob_rot[j])),
                              reshape(glob_pos[j], {3}));
    std::vector<double> w_col(nv);
    for (std::size_t i = 0; i < nv; ++i) w_col[i] = m.skin_weights[i * nj + j];
    mesh = add(mesh, scale_rows(posed, Tensor({nv}, std::move(w_col))));
  }
  return mesh;
}

inline Tensor body_forward(const ToyBodyModel& m, const BodyParams& p) {
  return body_forward(m, Tensor({m.n_joints, 3}, std::vector<double>(p.theta)),
                      Tensor({m.n_shape}, std::vector<double>(p.beta)));
}

// J = W * M
inline Tensor joints_from_mesh(const ToyBodyModel& m, const Tensor& mesh) {
  if (mesh.rank() != 2 || mesh.dim(0) != m.n_vertices || mesh.dim(1) != 3)
    throw ShapeError("joints_from_mesh: mesh shaped " + shape_str(mesh.shape()) +
                     ", expected [" + std::to_string(m.n_vertices) + "x3]");
  Tensor w(Shape{m.n_joints, m.n_vertices}, std::vector<double>(m.joint_reg));
  return matmul(w, mesh);
}

// j2d = s * (x, y) + (tx, ty); scale must be positive.
inline Tensor project_weak_perspective(const Tensor& j3d, const Tensor& cam) {
  if (j3d.rank() != 2 || j3d.dim(1) != 3)
    throw ShapeError("project_weak_perspective expects [Jx3]");
  if (cam.size() != 3) throw ShapeError("camera is (s, tx, ty)");
  double s = cam.values()[0];
  if (!(s > 0.0)) throw ValueError("weak-perspective scale must be > 0, got " +
                                   std::to_string(s));
  Tensor cam_vec = reshape(cam, {3});
  Tensor drop_z({3, 2}, {1, 0, 0, 1, 0, 0});
  Tensor xy = matmul(j3d, drop_z);
  return add_rowvec(mul_scalar_t(xy, slice0(cam_vec, 0, 1)), slice0(cam_vec, 1, 3));
}

inline Tensor project_weak_perspective(const Tensor& j3d, const BodyParams& p) {
  return project_weak_perspective(j3d, Tensor({3}, {p.cam_s, p.cam_tx, p.cam_ty}));
}

// FC stack mapping (pooled feature, current params) to an additive parameter
// update, applied for a fixed number of refinement iterations.
struct RegressorParams {
  std::size_t feature_dim = 0;  // C
  std::size_t joints = 0;
  std::size_t hidden = 64;
  std::size_t iterations = 3;
  Tensor w1, b1, w2, b2, w3, b3;

  std::size_t param_dim() const { return joints * 3 + 10 + 3; }

  static RegressorParams init(std::size_t feature_dim, std::size_t joints, std::size_t hidden,
                              std::size_t iterations, Rng& rng) {
    RegressorParams p;
    p.feature_dim = feature_dim;
    p.joints = joints;
    p.hidden = hidden;
    p.iterations = iterations;
    const std::size_t in = feature_dim + p.param_dim();
    p.w1 = uniform_init({in, hidden}, in, rng);
    p.b1 = Tensor::zeros({hidden});
    p.w2 = uniform_init({hidden, hidden}, hidden, rng);
    p.b2 = Tensor::zeros({hidden});
    p.w3 = uniform_init({hidden, p.param_dim()}, hidden, rng);
    p.b3 = Tensor::zeros({p.param_dim()});
    return p;
  }

  static RegressorParams zeros(std::size_t feature_dim, std::size_t joints,
                               std::size_t hidden = 64, std::size_t iterations = 3) {
    RegressorParams p;
    p.feature_dim = feature_dim;
    p.joints = joints;
    p.hidden = hidden;
    p.iterations = iterations;
    const std::size_t in = feature_dim + p.param_dim();
    p.w1 = Tensor::zeros({in, hidden});
    p.b1 = Tensor::zeros({hidden});
    p.w2 = Tensor::zeros({hidden, hidden});
    p.b2 = Tensor::zeros({hidden});
    p.w3 = Tensor::zeros({hidden, p.param_dim()});
    p.b3 = Tensor::zeros({p.param_dim()});
    return p;
  }
};

inline BodyParamsT regress_params(const Tensor& z_pooled, const BodyParams& init,
                                  const RegressorParams& p) {
  if (z_pooled.size() != p.feature_dim)
    throw ShapeError("regress_params: feature dim " + std::to_string(z_pooled.size()) +
                     " vs regressor input " + std::to_string(p.feature_dim));
  const std::size_t nj = p.joints, pd = p.param_dim();
  if (init.theta.size() != nj * 3 || init.beta.size() != 10)
    throw ShapeError("regress_params: init params sized for a different body");

  std::vector<double> s0;
  s0.insert(s0.end(), init.theta.begin(), init.theta.end());
  s0.insert(s0.end(), init.beta.begin(), init.beta.end());
  s0.push_back(init.cam_s);
  s0.push_back(init.cam_tx);
  s0.push_back(init.cam_ty);
  Tensor state(Shape{pd}, std::move(s0));
  Tensor z = reshape(z_pooled, {p.feature_dim});

  for (std::size_t it = 0; it < p.iterations; ++it) {
    Tensor x = reshape(concat0({z, state}), {1, p.feature_dim + pd});
    Tensor h1 = relu(add_rowvec(matmul(x, p.w1), p.b1));
    Tensor h2 = relu(add_rowvec(matmul(h1, p.w2), p.b2));
    Tensor delta = add_rowvec(matmul(h2, p.w3), p.b3);
    state = add(state, reshape(delta, {pd}));
    if (!state.all_finite()) throw NumericError("regressor update diverged");
  }

  BodyParamsT out;
  out.theta = reshape(slice0(state, 0, nj * 3), {nj, 3});
  out.beta = slice0(state, nj * 3, nj * 3 + 10);
  out.cam = slice0(state, nj * 3 + 10, pd);
  return out;
}

}  // namespace strnet

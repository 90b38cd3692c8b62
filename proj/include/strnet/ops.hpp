#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "strnet/fft.hpp"
#include "strnet/tensor.hpp"

// Differentiable primitives. Every op computes its forward value eagerly and
// attaches a closure that distributes the output gradient to its inputs; the
// analytic backwards are checked against central finite differences in the
// test suite.

namespace strnet {

namespace ops_detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

inline std::size_t row_stride(const Tensor& t) {
  return t.dim(0) == 0 ? 0 : t.size() / t.dim(0);
}

}  // namespace ops_detail

// --- elementwise binary ----------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  ops_detail::require_same_shape(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto an = a.node(), bn = b.node();
  return Tensor::from_op(a.shape(), std::move(out), {an, bn},
                         [an, bn](detail::TapeNode& self) {
                           if (an) an->accumulate(self.grad.data(), self.grad.size());
                           if (bn) bn->accumulate(self.grad.data(), self.grad.size());
                         });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  ops_detail::require_same_shape(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  auto an = a.node(), bn = b.node();
  return Tensor::from_op(a.shape(), std::move(out), {an, bn},
                         [an, bn](detail::TapeNode& self) {
                           if (an) an->accumulate(self.grad.data(), self.grad.size());
                           if (bn) {
                             std::vector<double> g(self.grad.size());
                             for (std::size_t i = 0; i < g.size(); ++i) g[i] = -self.grad[i];
                             bn->accumulate(g.data(), g.size());
                           }
                         });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  ops_detail::require_same_shape(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto an = a.node(), bn = b.node();
  auto ad = a.data_ptr(), bd = b.data_ptr();
  return Tensor::from_op(a.shape(), std::move(out), {an, bn},
                         [an, bn, ad, bd](detail::TapeNode& self) {
                           std::vector<double> g(self.grad.size());
                           if (an) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               g[i] = self.grad[i] * (*bd)[i];
                             an->accumulate(g.data(), g.size());
                           }
                           if (bn) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               g[i] = self.grad[i] * (*ad)[i];
                             bn->accumulate(g.data(), g.size());
                           }
                         });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  ops_detail::require_same_shape(a, b, "div");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  auto an = a.node(), bn = b.node();
  auto ad = a.data_ptr(), bd = b.data_ptr();
  return Tensor::from_op(a.shape(), std::move(out), {an, bn},
                         [an, bn, ad, bd](detail::TapeNode& self) {
                           std::vector<double> g(self.grad.size());
                           if (an) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               g[i] = self.grad[i] / (*bd)[i];
                             an->accumulate(g.data(), g.size());
                           }
                           if (bn) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               g[i] = -self.grad[i] * (*ad)[i] / ((*bd)[i] * (*bd)[i]);
                             bn->accumulate(g.data(), g.size());
                           }
                         });
}

// --- scalar-constant and unary ops ------------------------------------------

inline Tensor scale(const Tensor& a, double c) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  auto an = a.node();
  return Tensor::from_op(a.shape(), std::move(out), {an},
                         [an, c](detail::TapeNode& self) {
                           std::vector<double> g(self.grad.size());
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * c;
                           an->accumulate(g.data(), g.size());
                         });
}

inline Tensor add_const(const Tensor& a, double c) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
  auto an = a.node();
  return Tensor::from_op(a.shape(), std::move(out), {an},
                         [an](detail::TapeNode& self) {
                           an->accumulate(self.grad.data(), self.grad.size());
                         });
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

namespace ops_detail {

// dfdx receives (x_i, y_i) and returns dy_i/dx_i.
template <class Fwd, class Dfdx>
Tensor unary_op(const Tensor& x, Fwd fwd, Dfdx dfdx) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  auto out_sp = std::make_shared<const std::vector<double>>(std::move(out));
  auto xn = x.node();
  auto xd = x.data_ptr();
  return Tensor::from_op(x.shape(), out_sp, {xn},
                         [xn, xd, out_sp, dfdx](detail::TapeNode& self) {
                           std::vector<double> g(self.grad.size());
                           for (std::size_t i = 0; i < g.size(); ++i)
                             g[i] = self.grad[i] * dfdx((*xd)[i], (*out_sp)[i]);
                           xn->accumulate(g.data(), g.size());
                         });
}

}  // namespace ops_detail

inline Tensor sigmoid(const Tensor& x) {
  return ops_detail::unary_op(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh_op(const Tensor& x) {
  return ops_detail::unary_op(x, [](double v) { return std::tanh(v); },
                              [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& x) {
  return ops_detail::unary_op(x, [](double v) { return v > 0.0 ? v : 0.0; },
                              [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor exp_op(const Tensor& x) {
  return ops_detail::unary_op(x, [](double v) { return std::exp(v); },
                              [](double, double y) { return y; });
}

inline Tensor sqrt_op(const Tensor& x) {
  return ops_detail::unary_op(x, [](double v) { return std::sqrt(v); },
                              [](double, double y) { return 0.5 / y; });
}

inline Tensor sin_op(const Tensor& x) {
  return ops_detail::unary_op(x, [](double v) { return std::sin(v); },
                              [](double v, double) { return std::cos(v); });
}

inline Tensor cos_op(const Tensor& x) {
  return ops_detail::unary_op(x, [](double v) { return std::cos(v); },
                              [](double v, double) { return -std::sin(v); });
}

// --- reductions --------------------------------------------------------------

inline Tensor sum_all(const Tensor& x) {
  auto xv = x.values();
  double s = 0.0;
  for (double v : xv) s += v;
  auto xn = x.node();
  std::size_t n = xv.size();
  return Tensor::from_op({1}, std::vector<double>{s}, {xn},
                         [xn, n](detail::TapeNode& self) {
                           std::vector<double> g(n, self.grad[0]);
                           xn->accumulate(g.data(), g.size());
                         });
}

inline Tensor mean_all(const Tensor& x) {
  if (x.size() == 0) throw ValueError("mean_all of an empty tensor");
  return scale(sum_all(x), 1.0 / double(x.size()));
}

// Euclidean norm of all entries; subgradient 0 at the origin.
inline Tensor euclid_norm(const Tensor& x) {
  auto xv = x.values();
  double ss = 0.0;
  for (double v : xv) ss += v * v;
  double n = std::sqrt(ss);
  auto xn = x.node();
  auto xd = x.data_ptr();
  return Tensor::from_op({1}, std::vector<double>{n}, {xn},
                         [xn, xd, n](detail::TapeNode& self) {
                           double inv = self.grad[0] / std::max(n, 1e-12);
                           std::vector<double> g(xd->size());
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] = inv * (*xd)[i];
                           xn->accumulate(g.data(), g.size());
                         });
}

// --- linear algebra -----------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul expects rank-2 tensors, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      double aval = av[i * k + l];
      if (aval == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += aval * bv[l * p + j];
    }
  auto an = a.node(), bn = b.node();
  auto ad = a.data_ptr(), bd = b.data_ptr();
  return Tensor::from_op(
      {m, p}, std::move(out), {an, bn}, [an, bn, ad, bd, m, k, p](detail::TapeNode& self) {
        const std::vector<double>& g = self.grad;
        if (an) {  // dA = G * B^T
          std::vector<double> ga(m * k, 0.0);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < p; ++j) {
              double gv = g[i * p + j];
              if (gv == 0.0) continue;
              for (std::size_t l = 0; l < k; ++l) ga[i * k + l] += gv * (*bd)[l * p + j];
            }
          an->accumulate(ga.data(), ga.size());
        }
        if (bn) {  // dB = A^T * G
          std::vector<double> gb(k * p, 0.0);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t l = 0; l < k; ++l) {
              double aval = (*ad)[i * k + l];
              if (aval == 0.0) continue;
              for (std::size_t j = 0; j < p; ++j) gb[l * p + j] += aval * g[i * p + j];
            }
          bn->accumulate(gb.data(), gb.size());
        }
      });
}

inline Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose expects a rank-2 tensor");
  const std::size_t r = x.dim(0), c = x.dim(1);
  auto xv = x.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  auto xn = x.node();
  return Tensor::from_op({c, r}, std::move(out), {xn},
                         [xn, r, c](detail::TapeNode& self) {
                           std::vector<double> g(r * c);
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               g[i * c + j] = self.grad[j * r + i];
                           xn->accumulate(g.data(), g.size());
                         });
}

// Fixed sparse linear map; used to assemble structured matrices (e.g. the
// skew-symmetric cross-product matrix) from tensor entries.
struct LinEntry {
  std::size_t dst;
  std::size_t src;
  double coeff;
};

inline Tensor linear_map(const Tensor& x, Shape out_shape, std::vector<LinEntry> entries) {
  auto xv = x.values();
  std::vector<double> out(shape_numel(out_shape), 0.0);
  for (const auto& e : entries) out.at(e.dst) += e.coeff * xv[e.src];
  auto xn = x.node();
  std::size_t in_n = xv.size();
  return Tensor::from_op(std::move(out_shape), std::move(out), {xn},
                         [xn, in_n, entries = std::move(entries)](detail::TapeNode& self) {
                           std::vector<double> g(in_n, 0.0);
                           for (const auto& e : entries) g[e.src] += e.coeff * self.grad[e.dst];
                           xn->accumulate(g.data(), g.size());
                         });
}

// --- shape ops -----------------------------------------------------------------

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size())
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  auto xn = x.node();
  return Tensor::from_op(std::move(shape), x.data_ptr(), {xn},
                         [xn](detail::TapeNode& self) {
                           xn->accumulate(self.grad.data(), self.grad.size());
                         });
}

// Slice along axis 0 (rows of a matrix, elements of a vector).
inline Tensor slice0(const Tensor& x, std::size_t r0, std::size_t r1) {
  if (x.rank() == 0 || r1 > x.dim(0) || r0 > r1)
    throw ShapeError("slice0 [" + std::to_string(r0) + ", " + std::to_string(r1) +
                     ") out of range for " + shape_str(x.shape()));
  const std::size_t stride = ops_detail::row_stride(x);
  Shape shape = x.shape();
  shape[0] = r1 - r0;
  auto xv = x.values();
  std::vector<double> out(xv.begin() + r0 * stride, xv.begin() + r1 * stride);
  auto xn = x.node();
  const std::size_t total = x.size();
  return Tensor::from_op(std::move(shape), std::move(out), {xn},
                         [xn, r0, stride, total](detail::TapeNode& self) {
                           std::vector<double> g(total, 0.0);
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             g[r0 * stride + i] = self.grad[i];
                           xn->accumulate(g.data(), g.size());
                         });
}

// Concatenate along axis 0; trailing dimensions must agree.
inline Tensor concat0(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValueError("concat0 of an empty list");
  Shape shape = parts[0].shape();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1))
      throw ShapeError("concat0: incompatible part shape " + shape_str(p.shape()));
    rows += p.dim(0);
  }
  shape[0] = rows;
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  std::vector<detail::NodePtr> nodes;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    auto pv = p.values();
    out.insert(out.end(), pv.begin(), pv.end());
    nodes.push_back(p.node());
    sizes.push_back(p.size());
  }
  auto nodes_copy = nodes;
  return Tensor::from_op(std::move(shape), std::move(out), std::move(nodes),
                         [nodes = std::move(nodes_copy), sizes](detail::TapeNode& self) {
                           std::size_t off = 0;
                           for (std::size_t i = 0; i < nodes.size(); ++i) {
                             if (nodes[i]) nodes[i]->accumulate(self.grad.data() + off, sizes[i]);
                             off += sizes[i];
                           }
                         });
}

// Repeat the whole tensor `times` along axis 0.
inline Tensor tile0(const Tensor& x, std::size_t times) {
  if (times == 0) throw ValueError("tile0 with times == 0");
  Shape shape = x.shape();
  shape[0] *= times;
  auto xv = x.values();
  std::vector<double> out;
  out.reserve(xv.size() * times);
  for (std::size_t r = 0; r < times; ++r) out.insert(out.end(), xv.begin(), xv.end());
  auto xn = x.node();
  const std::size_t block = xv.size();
  return Tensor::from_op(std::move(shape), std::move(out), {xn},
                         [xn, times, block](detail::TapeNode& self) {
                           std::vector<double> g(block, 0.0);
                           for (std::size_t r = 0; r < times; ++r)
                             for (std::size_t i = 0; i < block; ++i)
                               g[i] += self.grad[r * block + i];
                           xn->accumulate(g.data(), g.size());
                         });
}

inline Tensor row(const Tensor& x, std::size_t t) {
  Tensor r = slice0(x, t, t + 1);
  Shape s(r.shape().begin() + 1, r.shape().end());
  if (s.empty()) s = {1};
  return reshape(r, s);
}

// --- broadcast ops --------------------------------------------------------------

// out[t, c] = x[t, c] * gate[c]  (channel-wise gate broadcast over time)
inline Tensor mul_channels(const Tensor& x, const Tensor& gate) {
  if (x.rank() != 2 || gate.rank() != 1 || gate.dim(0) != x.dim(1))
    throw ShapeError("mul_channels: need [TxC] and [C], got " + shape_str(x.shape()) +
                     " and " + shape_str(gate.shape()));
  const std::size_t t_len = x.dim(0), c_len = x.dim(1);
  auto xv = x.values();
  auto gv = gate.values();
  std::vector<double> out(xv.size());
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t c = 0; c < c_len; ++c) out[t * c_len + c] = xv[t * c_len + c] * gv[c];
  auto xn = x.node(), gn = gate.node();
  auto xd = x.data_ptr(), gd = gate.data_ptr();
  return Tensor::from_op({t_len, c_len}, std::move(out), {xn, gn},
                         [xn, gn, xd, gd, t_len, c_len](detail::TapeNode& self) {
                           if (xn) {
                             std::vector<double> g(t_len * c_len);
                             for (std::size_t t = 0; t < t_len; ++t)
                               for (std::size_t c = 0; c < c_len; ++c)
                                 g[t * c_len + c] = self.grad[t * c_len + c] * (*gd)[c];
                             xn->accumulate(g.data(), g.size());
                           }
                           if (gn) {
                             std::vector<double> g(c_len, 0.0);
                             for (std::size_t t = 0; t < t_len; ++t)
                               for (std::size_t c = 0; c < c_len; ++c)
                                 g[c] += self.grad[t * c_len + c] * (*xd)[t * c_len + c];
                             gn->accumulate(g.data(), g.size());
                           }
                         });
}

// out[t, c] = x[t, c] + v[c]
inline Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  if (x.rank() != 2 || v.rank() != 1 || v.dim(0) != x.dim(1))
    throw ShapeError("add_rowvec: need [TxC] and [C], got " + shape_str(x.shape()) +
                     " and " + shape_str(v.shape()));
  const std::size_t t_len = x.dim(0), c_len = x.dim(1);
  auto xv = x.values();
  auto vv = v.values();
  std::vector<double> out(xv.size());
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t c = 0; c < c_len; ++c) out[t * c_len + c] = xv[t * c_len + c] + vv[c];
  auto xn = x.node(), vn = v.node();
  return Tensor::from_op({t_len, c_len}, std::move(out), {xn, vn},
                         [xn, vn, t_len, c_len](detail::TapeNode& self) {
                           if (xn) xn->accumulate(self.grad.data(), self.grad.size());
                           if (vn) {
                             std::vector<double> g(c_len, 0.0);
                             for (std::size_t t = 0; t < t_len; ++t)
                               for (std::size_t c = 0; c < c_len; ++c)
                                 g[c] += self.grad[t * c_len + c];
                             vn->accumulate(g.data(), g.size());
                           }
                         });
}

// out[t, c] = x[t, c] * w[t]
inline Tensor scale_rows(const Tensor& x, const Tensor& w) {
  if (x.rank() != 2 || w.rank() != 1 || w.dim(0) != x.dim(0))
    throw ShapeError("scale_rows: need [TxC] and [T], got " + shape_str(x.shape()) +
                     " and " + shape_str(w.shape()));
  const std::size_t t_len = x.dim(0), c_len = x.dim(1);
  auto xv = x.values();
  auto wv = w.values();
  std::vector<double> out(xv.size());
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t c = 0; c < c_len; ++c) out[t * c_len + c] = xv[t * c_len + c] * wv[t];
  auto xn = x.node(), wn = w.node();
  auto xd = x.data_ptr(), wd = w.data_ptr();
  return Tensor::from_op({t_len, c_len}, std::move(out), {xn, wn},
                         [xn, wn, xd, wd, t_len, c_len](detail::TapeNode& self) {
                           if (xn) {
                             std::vector<double> g(t_len * c_len);
                             for (std::size_t t = 0; t < t_len; ++t)
                               for (std::size_t c = 0; c < c_len; ++c)
                                 g[t * c_len + c] = self.grad[t * c_len + c] * (*wd)[t];
                             xn->accumulate(g.data(), g.size());
                           }
                           if (wn) {
                             std::vector<double> g(t_len, 0.0);
                             for (std::size_t t = 0; t < t_len; ++t)
                               for (std::size_t c = 0; c < c_len; ++c)
                                 g[t] += self.grad[t * c_len + c] * (*xd)[t * c_len + c];
                             wn->accumulate(g.data(), g.size());
                           }
                         });
}

// out = s * x with s a single-element tensor.
inline Tensor mul_scalar_t(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw ShapeError("mul_scalar_t: scalar operand has shape " +
                                      shape_str(s.shape()));
  double sv = s.values()[0];
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * sv;
  auto xn = x.node(), sn = s.node();
  auto xd = x.data_ptr();
  return Tensor::from_op(x.shape(), std::move(out), {xn, sn},
                         [xn, sn, xd, sv](detail::TapeNode& self) {
                           if (xn) {
                             std::vector<double> g(self.grad.size());
                             for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * sv;
                             xn->accumulate(g.data(), g.size());
                           }
                           if (sn) {
                             double g = 0.0;
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               g += self.grad[i] * (*xd)[i];
                             sn->accumulate(&g, 1);
                           }
                         });
}

// --- sequence ops ------------------------------------------------------------------

// Numerically stable softmax over a vector; output lies on the probability
// simplex.
inline Tensor softmax(const Tensor& v) {
  if (v.rank() != 1 || v.dim(0) == 0)
    throw ShapeError("softmax expects a non-empty vector, got " + shape_str(v.shape()));
  auto xv = v.values();
  double mx = xv[0];
  for (double x : xv) mx = std::max(mx, x);
  std::vector<double> out(xv.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(xv[i] - mx);
    denom += out[i];
  }
  for (auto& y : out) y /= denom;
  auto out_sp = std::make_shared<const std::vector<double>>(std::move(out));
  auto vn = v.node();
  return Tensor::from_op(v.shape(), out_sp, {vn},
                         [vn, out_sp](detail::TapeNode& self) {
                           const auto& y = *out_sp;
                           double dot = 0.0;
                           for (std::size_t i = 0; i < y.size(); ++i) dot += self.grad[i] * y[i];
                           std::vector<double> g(y.size());
                           for (std::size_t i = 0; i < y.size(); ++i)
                             g[i] = y[i] * (self.grad[i] - dot);
                           vn->accumulate(g.data(), g.size());
                         });
}

// Mean over the time axis of a [TxC] tensor.
inline Tensor global_avg_pool_time(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("global_avg_pool_time expects [TxC]");
  const std::size_t t_len = x.dim(0), c_len = x.dim(1);
  if (t_len == 0) throw ValueError("global_avg_pool_time over zero frames");
  auto xv = x.values();
  std::vector<double> out(c_len, 0.0);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t c = 0; c < c_len; ++c) out[c] += xv[t * c_len + c];
  for (auto& o : out) o /= double(t_len);
  auto xn = x.node();
  return Tensor::from_op({c_len}, std::move(out), {xn},
                         [xn, t_len, c_len](detail::TapeNode& self) {
                           std::vector<double> g(t_len * c_len);
                           for (std::size_t t = 0; t < t_len; ++t)
                             for (std::size_t c = 0; c < c_len; ++c)
                               g[t * c_len + c] = self.grad[c] / double(t_len);
                           xn->accumulate(g.data(), g.size());
                         });
}

// Temporal convolution over the time axis with zero padding, full channel
// mixing, odd kernel width. kernels: [C_out x C_in x K], bias: [C_out].
inline Tensor conv1d_same(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
  if (x.rank() != 2 || kernels.rank() != 3 || bias.rank() != 1)
    throw ShapeError("conv1d_same: need x[TxC_in], kernels[C_out x C_in x K], bias[C_out]");
  const std::size_t t_len = x.dim(0), c_in = x.dim(1);
  const std::size_t c_out = kernels.dim(0), k_w = kernels.dim(2);
  if (kernels.dim(1) != c_in)
    throw ShapeError("conv1d_same: kernel input channels " + std::to_string(kernels.dim(1)) +
                     " vs feature channels " + std::to_string(c_in));
  if (bias.dim(0) != c_out) throw ShapeError("conv1d_same: bias size mismatch");
  if (k_w % 2 == 0) throw ValueError("conv1d_same requires an odd kernel width");
  const std::ptrdiff_t half = std::ptrdiff_t(k_w / 2);

  auto xv = x.values();
  auto kv = kernels.values();
  auto bv = bias.values();
  std::vector<double> out(t_len * c_out);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t co = 0; co < c_out; ++co) {
      double acc = bv[co];
      for (std::size_t dk = 0; dk < k_w; ++dk) {
        std::ptrdiff_t src = std::ptrdiff_t(t) + std::ptrdiff_t(dk) - half;
        if (src < 0 || src >= std::ptrdiff_t(t_len)) continue;
        for (std::size_t ci = 0; ci < c_in; ++ci)
          acc += xv[std::size_t(src) * c_in + ci] * kv[(co * c_in + ci) * k_w + dk];
      }
      out[t * c_out + co] = acc;
    }

  auto xn = x.node(), kn = kernels.node(), bn = bias.node();
  auto xd = x.data_ptr(), kd = kernels.data_ptr();
  return Tensor::from_op(
      {t_len, c_out}, std::move(out), {xn, kn, bn},
      [xn, kn, bn, xd, kd, t_len, c_in, c_out, k_w, half](detail::TapeNode& self) {
        const auto& g = self.grad;
        if (xn) {
          std::vector<double> gx(t_len * c_in, 0.0);
          for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t co = 0; co < c_out; ++co) {
              double gv = g[t * c_out + co];
              if (gv == 0.0) continue;
              for (std::size_t dk = 0; dk < k_w; ++dk) {
                std::ptrdiff_t src = std::ptrdiff_t(t) + std::ptrdiff_t(dk) - half;
                if (src < 0 || src >= std::ptrdiff_t(t_len)) continue;
                for (std::size_t ci = 0; ci < c_in; ++ci)
                  gx[std::size_t(src) * c_in + ci] += gv * (*kd)[(co * c_in + ci) * k_w + dk];
              }
            }
          xn->accumulate(gx.data(), gx.size());
        }
        if (kn) {
          std::vector<double> gk(c_out * c_in * k_w, 0.0);
          for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t co = 0; co < c_out; ++co) {
              double gv = g[t * c_out + co];
              if (gv == 0.0) continue;
              for (std::size_t dk = 0; dk < k_w; ++dk) {
                std::ptrdiff_t src = std::ptrdiff_t(t) + std::ptrdiff_t(dk) - half;
                if (src < 0 || src >= std::ptrdiff_t(t_len)) continue;
                for (std::size_t ci = 0; ci < c_in; ++ci)
                  gk[(co * c_in + ci) * k_w + dk] += gv * (*xd)[std::size_t(src) * c_in + ci];
              }
            }
          kn->accumulate(gk.data(), gk.size());
        }
        if (bn) {
          std::vector<double> gb(c_out, 0.0);
          for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t co = 0; co < c_out; ++co) gb[co] += g[t * c_out + co];
          bn->accumulate(gb.data(), gb.size());
        }
      });
}

// Per-channel DFT along time, optional spectral mask, inverse DFT, real part.
// The masked round-trip is a real symmetric linear operator, so the backward
// pass applies the same transform to the gradient.
inline Tensor fft_roundtrip(const Tensor& x, const fft::SpectralMask& mask = {}) {
  if (x.rank() != 2) throw ShapeError("fft_roundtrip expects [TxC]");
  const std::size_t t_len = x.dim(0), c_len = x.dim(1);
  if (t_len == 0) throw ValueError("fft_roundtrip over zero frames");
  x.assert_finite("fft_roundtrip input");

  const auto binw = fft::mask_weights(mask, t_len);
  auto xv = x.values();
  std::vector<double> out(t_len * c_len);
  std::vector<double> col(t_len);
  for (std::size_t c = 0; c < c_len; ++c) {
    for (std::size_t t = 0; t < t_len; ++t) col[t] = xv[t * c_len + c];
    auto res = fft::roundtrip_real(col, binw);
    for (std::size_t t = 0; t < t_len; ++t) out[t * c_len + c] = res[t];
  }
  auto xn = x.node();
  return Tensor::from_op({t_len, c_len}, std::move(out), {xn},
                         [xn, binw, t_len, c_len](detail::TapeNode& self) {
                           std::vector<double> g(t_len * c_len);
                           std::vector<double> col(t_len);
                           for (std::size_t c = 0; c < c_len; ++c) {
                             for (std::size_t t = 0; t < t_len; ++t)
                               col[t] = self.grad[t * c_len + c];
                             auto res = fft::roundtrip_real(col, binw);
                             for (std::size_t t = 0; t < t_len; ++t)
                               g[t * c_len + c] = res[t];
                           }
                           xn->accumulate(g.data(), g.size());
                         });
}

// Forward first difference along time: out[t] = x[t+1] - x[t].
inline Tensor diff_sequence(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("diff_sequence expects [TxC]");
  const std::size_t t_len = x.dim(0), c_len = x.dim(1);
  if (t_len < 2) throw ValueError("diff_sequence needs at least 2 frames, got " +
                                  std::to_string(t_len));
  auto xv = x.values();
  std::vector<double> out((t_len - 1) * c_len);
  for (std::size_t t = 0; t + 1 < t_len; ++t)
    for (std::size_t c = 0; c < c_len; ++c)
      out[t * c_len + c] = xv[(t + 1) * c_len + c] - xv[t * c_len + c];
  auto xn = x.node();
  return Tensor::from_op({t_len - 1, c_len}, std::move(out), {xn},
                         [xn, t_len, c_len](detail::TapeNode& self) {
                           std::vector<double> g(t_len * c_len, 0.0);
                           for (std::size_t t = 0; t + 1 < t_len; ++t)
                             for (std::size_t c = 0; c < c_len; ++c) {
                               double gv = self.grad[t * c_len + c];
                               g[(t + 1) * c_len + c] += gv;
                               g[t * c_len + c] -= gv;
                             }
                           xn->accumulate(g.data(), g.size());
                         });
}

}  // namespace strnet

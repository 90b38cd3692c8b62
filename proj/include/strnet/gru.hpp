#pragma once

#include <string>
#include <utility>
#include <vector>

#include "strnet/init.hpp"
#include "strnet/ops.hpp"
#include "strnet/tensor.hpp"

namespace strnet {

// Gated recurrent unit:
//   z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
//   r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
//   n_t = tanh(x_t W_n + (r_t (*) h_{t-1}) U_n + b_n)
//   h_t = (1 - z_t) (*) n_t + z_t (*) h_{t-1}
// Weights are stored input-major so row vectors multiply on the left.
struct GruParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor w_z, u_z, b_z;  // w: [in x hid], u: [hid x hid], b: [hid]
  Tensor w_r, u_r, b_r;
  Tensor w_n, u_n, b_n;

  static GruParams init(std::size_t in, std::size_t hid, Rng& rng) {
    GruParams p;
    p.input_size = in;
    p.hidden_size = hid;
    p.w_z = uniform_init({in, hid}, in, rng);
    p.u_z = uniform_init({hid, hid}, hid, rng);
    p.b_z = Tensor::zeros({hid});
    p.w_r = uniform_init({in, hid}, in, rng);
    p.u_r = uniform_init({hid, hid}, hid, rng);
    p.b_r = Tensor::zeros({hid});
    p.w_n = uniform_init({in, hid}, in, rng);
    p.u_n = uniform_init({hid, hid}, hid, rng);
    p.b_n = Tensor::zeros({hid});
    return p;
  }

  static GruParams zeros(std::size_t in, std::size_t hid) {
    GruParams p;
    p.input_size = in;
    p.hidden_size = hid;
    p.w_z = Tensor::zeros({in, hid});
    p.u_z = Tensor::zeros({hid, hid});
    p.b_z = Tensor::zeros({hid});
    p.w_r = Tensor::zeros({in, hid});
    p.u_r = Tensor::zeros({hid, hid});
    p.b_r = Tensor::zeros({hid});
    p.w_n = Tensor::zeros({in, hid});
    p.u_n = Tensor::zeros({hid, hid});
    p.b_n = Tensor::zeros({hid});
    return p;
  }

  void check() const {
    auto expect = [](const Tensor& t, Shape s, const char* name) {
      if (t.shape() != s)
        throw ShapeError(std::string("GruParams.") + name + " has shape " +
                         shape_str(t.shape()) + ", expected " + shape_str(s));
    };
    expect(w_z, {input_size, hidden_size}, "w_z");
    expect(u_z, {hidden_size, hidden_size}, "u_z");
    expect(b_z, {hidden_size}, "b_z");
    expect(w_r, {input_size, hidden_size}, "w_r");
    expect(u_r, {hidden_size, hidden_size}, "u_r");
    expect(b_r, {hidden_size}, "b_r");
    expect(w_n, {input_size, hidden_size}, "w_n");
    expect(u_n, {hidden_size, hidden_size}, "u_n");
    expect(b_n, {hidden_size}, "b_n");
  }
};

// One cell step; x and h are [1 x in] / [1 x hid] row matrices.
inline Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p) {
  Tensor z = sigmoid(add_rowvec(add(matmul(x, p.w_z), matmul(h, p.u_z)), p.b_z));
  Tensor r = sigmoid(add_rowvec(add(matmul(x, p.w_r), matmul(h, p.u_r)), p.b_r));
  Tensor n = tanh_op(add_rowvec(add(matmul(x, p.w_n), matmul(mul(r, h), p.u_n)), p.b_n));
  Tensor one_minus_z = add_const(neg(z), 1.0);
  return add(mul(one_minus_z, n), mul(z, h));
}

// Runs the recurrence over a [T x C_in] sequence and returns the hidden state
// at every step as [T x H].
inline Tensor gru_forward(const Tensor& seq, const GruParams& p, const Tensor& h0) {
  if (seq.rank() != 2) throw ShapeError("gru_forward expects a [TxC] sequence");
  if (seq.dim(1) != p.input_size)
    throw ShapeError("gru_forward: sequence channels " + std::to_string(seq.dim(1)) +
                     " vs params input_size " + std::to_string(p.input_size));
  if (h0.size() != p.hidden_size)
    throw ShapeError("gru_forward: h0 size " + std::to_string(h0.size()) +
                     " vs hidden_size " + std::to_string(p.hidden_size));
  p.check();

  const std::size_t t_len = seq.dim(0);
  Tensor h = reshape(h0, {1, p.hidden_size});
  std::vector<Tensor> steps;
  steps.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    Tensor x = slice0(seq, t, t + 1);
    h = gru_cell(x, h, p);
    steps.push_back(h);
  }
  return concat0(steps);
}

inline Tensor gru_forward(const Tensor& seq, const GruParams& p) {
  return gru_forward(seq, p, Tensor::zeros({p.hidden_size}));
}

}  // namespace strnet

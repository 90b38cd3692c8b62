#pragma once

#include <string>
#include <vector>

#include "strnet/gru.hpp"
#include "strnet/ops.hpp"

namespace strnet {

// Temporal tendency reasoning: the feature sequence is split evenly into k
// temporal sub-fragments; fragment 1 passes through untouched, fragments
// 2..k are encoded by a GRU and added to the previous fragment's output,
// forming a hierarchical residual cascade. The concatenated cascade is added
// back onto the input features.
struct TtrParams {
  std::size_t fragment_count = 4;
  std::size_t channels = 0;
  bool share_weights = false;    // one weight set reused by every branch
  std::vector<GruParams> grus;   // fragment_count - 1 entries (branches 2..k)

  static TtrParams init(std::size_t channels, std::size_t fragments, bool share, Rng& rng) {
    TtrParams p;
    p.fragment_count = fragments;
    p.channels = channels;
    p.share_weights = share;
    std::size_t distinct = share ? 1 : fragments - 1;
    for (std::size_t i = 0; i < distinct; ++i)
      p.grus.push_back(GruParams::init(channels, channels, rng));
    return p;
  }

  const GruParams& branch(std::size_t i) const {  // i in [0, fragment_count-2]
    return share_weights ? grus.at(0) : grus.at(i);
  }
};

// Contiguous order-preserving temporal partition; concat of the result
// reproduces the input exactly.
inline std::vector<Tensor> split_fragments(const Tensor& f, std::size_t k) {
  if (f.rank() != 2) throw ShapeError("split_fragments expects [TxC]");
  if (k == 0) throw ValueError("split_fragments with k == 0");
  const std::size_t t_len = f.dim(0);
  if (t_len % k != 0)
    throw ValueError("split_fragments: T=" + std::to_string(t_len) +
                     " is not divisible by k=" + std::to_string(k));
  const std::size_t step = t_len / k;
  std::vector<Tensor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(slice0(f, i * step, (i + 1) * step));
  return out;
}

// The cascade outputs F_i^o per fragment (before the global residual add).
inline std::vector<Tensor> ttr_fragment_outputs(const Tensor& f, const TtrParams& p) {
  auto fragments = split_fragments(f, p.fragment_count);
  std::vector<Tensor> outs;
  outs.reserve(fragments.size());
  outs.push_back(fragments[0]);
  for (std::size_t i = 1; i < fragments.size(); ++i) {
    const GruParams& g = p.branch(i - 1);
    if (g.input_size != f.dim(1) || g.hidden_size != f.dim(1))
      throw ShapeError("ttr branch " + std::to_string(i + 1) + " expects square " +
                       std::to_string(f.dim(1)) + "-channel GRU");
    outs.push_back(add(gru_forward(fragments[i], g), outs.back()));
  }
  return outs;
}

inline Tensor ttr_forward(const Tensor& f, const TtrParams& p) {
  return add(f, concat0(ttr_fragment_outputs(f, p)));
}

}  // namespace strnet

#pragma once

#include <utility>
#include <vector>

#include "strnet/gru.hpp"
#include "strnet/ops.hpp"

namespace strnet {

// Softmax-weighted convex fusion of K same-shape features. Each feature is
// time-pooled, the pooled vectors are concatenated and pushed through an
// FC/ReLU stack ending in K logits; the softmax weights multiply the original
// features and the results are summed.
struct IntegrationNetParams {
  std::size_t feature_count = 0;  // K
  std::size_t channels = 0;       // C
  std::size_t hidden = 0;         // FC width, 2*C by default
  Tensor w1, b1;                  // [K*C x H], [H]
  Tensor w2, b2;                  // [H x H], [H]
  Tensor w3, b3;                  // [H x K], [K]

  static IntegrationNetParams init(std::size_t k, std::size_t channels, Rng& rng,
                                   std::size_t hidden = 0) {
    IntegrationNetParams p;
    p.feature_count = k;
    p.channels = channels;
    p.hidden = hidden == 0 ? 2 * channels : hidden;
    p.w1 = uniform_init({k * channels, p.hidden}, k * channels, rng);
    p.b1 = Tensor::zeros({p.hidden});
    p.w2 = uniform_init({p.hidden, p.hidden}, p.hidden, rng);
    p.b2 = Tensor::zeros({p.hidden});
    p.w3 = uniform_init({p.hidden, k}, p.hidden, rng);
    p.b3 = Tensor::zeros({k});
    return p;
  }

  static IntegrationNetParams zeros(std::size_t k, std::size_t channels,
                                    std::size_t hidden = 0) {
    IntegrationNetParams p;
    p.feature_count = k;
    p.channels = channels;
    p.hidden = hidden == 0 ? 2 * channels : hidden;
    p.w1 = Tensor::zeros({k * channels, p.hidden});
    p.b1 = Tensor::zeros({p.hidden});
    p.w2 = Tensor::zeros({p.hidden, p.hidden});
    p.b2 = Tensor::zeros({p.hidden});
    p.w3 = Tensor::zeros({p.hidden, k});
    p.b3 = Tensor::zeros({k});
    return p;
  }
};

// The per-window fusion weights (on the probability simplex).
inline Tensor integration_weights(const std::vector<Tensor>& features,
                                  const IntegrationNetParams& p) {
  if (features.empty()) throw ValueError("integrate over an empty feature list");
  if (features.size() != p.feature_count)
    throw ShapeError("integrate: got " + std::to_string(features.size()) +
                     " features for a net built for K=" + std::to_string(p.feature_count));
  const Shape& shape = features[0].shape();
  for (const auto& f : features)
    if (f.shape() != shape)
      throw ShapeError("integrate: heterogeneous feature shapes " + shape_str(shape) +
                       " vs " + shape_str(f.shape()));
  std::vector<Tensor> pooled;
  pooled.reserve(features.size());
  for (const auto& f : features) pooled.push_back(global_avg_pool_time(f));
  Tensor x = reshape(concat0(pooled), {1, p.feature_count * p.channels});
  Tensor h1 = relu(add_rowvec(matmul(x, p.w1), p.b1));
  Tensor h2 = relu(add_rowvec(matmul(h1, p.w2), p.b2));
  Tensor logits = reshape(add_rowvec(matmul(h2, p.w3), p.b3), {p.feature_count});
  return softmax(logits);
}

inline Tensor integrate(const std::vector<Tensor>& features, const IntegrationNetParams& p) {
  Tensor w = integration_weights(features, p);
  Tensor out = mul_scalar_t(features[0], slice0(w, 0, 1));
  for (std::size_t k = 1; k < features.size(); ++k)
    out = add(out, mul_scalar_t(features[k], slice0(w, k, k + 1)));
  return out;
}

inline Tensor fuse_str(const Tensor& f_ttr, const Tensor& stef1, const Tensor& stef2,
                       const IntegrationNetParams& p) {
  return integrate({f_ttr, stef1, stef2}, p);
}

inline Tensor fuse_final(const Tensor& f_sf, const Tensor& f_str, const Tensor& f_cf,
                         const IntegrationNetParams& p) {
  return integrate({f_sf, f_str, f_cf}, p);
}

// Two-phase refinement of temporally split, GRU-encoded feature halves.
// Self-integration at iteration i fuses the encoded half with the previous
// refinement, starting from the raw (pre-encoding) half — starting from the
// encoded half itself would telescope to the identity, because a convex
// combination of a tensor with itself is that tensor for every iteration.
// `literal` instead applies a K=1 integration of the encoded half per
// iteration, which is the identity under a singleton softmax.
struct StrategyParams {
  std::size_t channels = 0;
  std::size_t iterations = 3;  // N
  bool literal = false;
  GruParams gru_c1, gru_c2;
  IntegrationNetParams net_self_c1, net_self_c2;  // K=2 (K=1 when literal)
  IntegrationNetParams net_sf, net_cf;            // K=2

  static StrategyParams init(std::size_t channels, std::size_t iterations, bool literal,
                             Rng& rng) {
    StrategyParams p;
    p.channels = channels;
    p.iterations = iterations;
    p.literal = literal;
    p.gru_c1 = GruParams::init(channels, channels, rng);
    p.gru_c2 = GruParams::init(channels, channels, rng);
    const std::size_t self_k = literal ? 1 : 2;
    p.net_self_c1 = IntegrationNetParams::init(self_k, channels, rng);
    p.net_self_c2 = IntegrationNetParams::init(self_k, channels, rng);
    p.net_sf = IntegrationNetParams::init(2, channels, rng);
    p.net_cf = IntegrationNetParams::init(2, channels, rng);
    return p;
  }
};

struct StrategyOutputs {
  Tensor self_fused;   // F_SF lifted back to T frames
  Tensor cross_fused;  // F_CF lifted back to T frames
};

namespace integ_detail {

inline Tensor refine_half(const Tensor& raw, const Tensor& encoded,
                          const IntegrationNetParams& net, std::size_t iterations,
                          bool literal) {
  if (iterations == 0) throw ValueError("strategy iterations must be >= 1");
  if (literal) {
    Tensor cur = encoded;
    for (std::size_t i = 0; i < iterations; ++i) cur = integrate({cur}, net);
    return cur;
  }
  Tensor cur = raw;
  for (std::size_t i = 0; i < iterations; ++i) cur = integrate({encoded, cur}, net);
  return cur;
}

}  // namespace integ_detail

inline StrategyOutputs integration_strategies(const Tensor& f, const StrategyParams& p) {
  if (f.rank() != 2 || f.dim(1) != p.channels)
    throw ShapeError("integration_strategies expects [TxC] with C=" +
                     std::to_string(p.channels));
  const std::size_t t_len = f.dim(0);
  if (t_len % 2 != 0)
    throw ValueError("integration_strategies: T=" + std::to_string(t_len) + " is odd");

  Tensor raw1 = slice0(f, 0, t_len / 2);
  Tensor raw2 = slice0(f, t_len / 2, t_len);
  Tensor half1 = gru_forward(raw1, p.gru_c1);
  Tensor half2 = gru_forward(raw2, p.gru_c2);

  Tensor refined1 =
      integ_detail::refine_half(raw1, half1, p.net_self_c1, p.iterations, p.literal);
  Tensor refined2 =
      integ_detail::refine_half(raw2, half2, p.net_self_c2, p.iterations, p.literal);

  StrategyOutputs out;
  out.self_fused = tile0(integrate({refined1, refined2}, p.net_sf), 2);
  out.cross_fused = tile0(integrate({half1, half2}, p.net_cf), 2);
  return out;
}

}  // namespace strnet

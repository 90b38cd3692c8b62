#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "strnet/common.hpp"

namespace strnet {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void ensure(const std::vector<std::vector<double>*>& params) {
    if (m.empty()) {
      m.resize(params.size());
      v.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i].assign(params[i]->size(), 0.0);
        v[i].assign(params[i]->size(), 0.0);
      }
    }
    if (m.size() != params.size())
      throw ShapeError("adam state built for a different parameter list");
  }
};

// Standard bias-corrected Adam update, applied in place.
inline void adam_step(const std::vector<std::vector<double>*>& params,
                      const std::vector<std::vector<double>>& grads, AdamState& state,
                      double lr, const AdamConfig& cfg = {}) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " grads");
  state.ensure(params);
  for (const auto& g : grads)
    for (double v : g)
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in adam_step");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    if (grads[i].size() != p.size())
      throw ShapeError("adam_step: grad " + std::to_string(i) + " size mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      double g = grads[i][j];
      state.m[i][j] = cfg.beta1 * state.m[i][j] + (1.0 - cfg.beta1) * g;
      state.v[i][j] = cfg.beta2 * state.v[i][j] + (1.0 - cfg.beta2) * g * g;
      double m_hat = state.m[i][j] / bc1;
      double v_hat = state.v[i][j] / bc2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

// Reduce-on-plateau: divide the rate by `factor` after `patience` consecutive
// epochs without improvement of the tracked metric; the stall counter resets
// on improvement and after each reduction.
struct PlateauSchedule {
  double lr = 5e-5;
  double factor = 10.0;
  std::size_t patience = 5;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stall = 0;

  double observe(double metric) {
    if (metric < best) {
      best = metric;
      stall = 0;
    } else if (++stall >= patience) {
      lr /= factor;
      stall = 0;
    }
    return lr;
  }
};

}  // namespace strnet

// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef PROSFDA_OPTIM_HPP
#define PROSFDA_OPTIM_HPP

#include <cmath>
#include <string>
#include <vector>

#include "prosfda/tensor.hpp"

namespace prosfda {

// Polynomial decay lr0 * (1 - t/T)^0.9 with t the current epoch.
inline double poly_decay_lr(double lr0, int t, int T) {
  if (T <= 0) throw ValueError("poly_decay_lr: max epoch T must be > 0, got " + std::to_string(T));
  if (t < 0 || t > T) {
    throw ValueError("poly_decay_lr: epoch " + std::to_string(t) + " outside [0, " +
                     std::to_string(T) + "]");
  }
  return lr0 * std::pow(1.0 - static_cast<double>(t) / static_cast<double>(T), 0.9);
}

// Heavy-ball SGD state: one velocity buffer per parameter tensor.
template <class Real>
struct OptimizerState {
  std::vector<std::vector<Real>> velocity;
  Real momentum = Real(0.99);
  Real lr0 = Real(0.01);
  int t = 0;
  int T = 1;
};

template <class Real>
OptimizerState<Real> make_optimizer(const std::vector<Tensor<Real>>& params, Real momentum,
                                    Real lr0, int max_epoch) {
  OptimizerState<Real> state;
  state.momentum = momentum;
  state.lr0 = lr0;
  state.T = max_epoch;
  state.velocity.reserve(params.size());
  for (const auto& p : params) {
    state.velocity.emplace_back(p.values().size(), Real(0));
  }
  return state;
}

// v <- momentum*v + g; p <- p - lr*v. Gradients are read from each parameter's
// grad buffer and left untouched (callers zero them per step).
template <class Real>
void sgd_momentum_step(std::vector<Tensor<Real>>& params, OptimizerState<Real>& state, Real lr) {
  if (params.size() != state.velocity.size()) {
    throw ShapeError("sgd_momentum_step: " + std::to_string(params.size()) +
                     " params vs " + std::to_string(state.velocity.size()) + " velocity buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].values();
    const auto& g = params[i].grad();
    auto& v = state.velocity[i];
    if (v.size() != p.size() || g.size() != p.size()) {
      throw ShapeError("sgd_momentum_step: size mismatch at parameter " + std::to_string(i));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = state.momentum * v[j] + g[j];
      p[j] -= lr * v[j];
    }
  }
}

}  // namespace prosfda

#endif  // PROSFDA_OPTIM_HPP

// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef PROSFDA_BATCHNORM_HPP
#define PROSFDA_BATCHNORM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "prosfda/tensor.hpp"

namespace prosfda {

enum class BnMode { train, eval, stat_collect };

// Per-layer batch-norm state. Running buffers are plain arrays (never on the
// graph); the affine scale/shift are learnable tensors. running_std holds a
// standard deviation, not a variance.
template <class Real>
struct BnLayerState {
  int channels = 0;
  std::vector<Real> running_mean;
  std::vector<Real> running_std;
  Tensor<Real> scale;
  Tensor<Real> shift;
  Real momentum = Real(0.1);  // weight of the new batch statistic
  Real eps = Real(1e-5);
};

template <class Real>
BnLayerState<Real> make_bn_layer(int channels) {
  BnLayerState<Real> layer;
  layer.channels = channels;
  layer.running_mean.assign(channels, Real(0));
  layer.running_std.assign(channels, Real(1));
  layer.scale = Tensor<Real>::ones({channels}, true);
  layer.shift = Tensor<Real>::zeros({channels}, true);
  return layer;
}

// Per-channel batch statistics; tensors so the statistic alignment loss can
// differentiate through them back to the layer input.
template <class Real>
struct BatchStats {
  Tensor<Real> mean;
  Tensor<Real> std;
};

// Normalizes an NCHW batch. train: batch statistics, running buffers updated.
// eval: running statistics, nothing mutated. stat_collect: train arithmetic
// with differentiable statistics but no buffer update.
template <class Real>
std::pair<Tensor<Real>, BatchStats<Real>> batchnorm_apply(const Tensor<Real>& input,
                                                          BnLayerState<Real>& layer,
                                                          BnMode mode) {
  const auto& s = input.shape();
  if (s.size() != 4) {
    throw ShapeError("batchnorm_apply: expected NCHW input, got " + detail::shape_str(s));
  }
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  if (c != layer.channels) {
    throw ShapeError("batchnorm_apply: input channels " + std::to_string(c) +
                     " != layer channels " + std::to_string(layer.channels));
  }
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t m = static_cast<std::int64_t>(n) * plane;
  const auto& x = input.values();
  const auto& gamma = layer.scale.values();
  const auto& beta = layer.shift.values();

  if (mode == BnMode::eval) {
    std::vector<Real> out(x.size());
    for (int ci = 0; ci < c; ++ci) {
      const Real mu = layer.running_mean[ci];
      const Real sd = layer.running_std[ci];
      const Real g = gamma[ci], b = beta[ci];
      for (int i = 0; i < n; ++i) {
        const Real* xp = x.data() + (static_cast<std::int64_t>(i) * c + ci) * plane;
        Real* op = out.data() + (static_cast<std::int64_t>(i) * c + ci) * plane;
        for (std::int64_t j = 0; j < plane; ++j) op[j] = g * (xp[j] - mu) / sd + b;
      }
    }
    auto xn = input.node();
    auto gn = layer.scale.node();
    auto bn = layer.shift.node();
    std::vector<Real> rm = layer.running_mean;
    std::vector<Real> rs = layer.running_std;
    auto y = detail::make_op<Real>(
        s, std::move(out), {input, layer.scale, layer.shift},
        [xn, gn, bn, rm, rs, n, c, plane](detail::TensorNode<Real>& self) {
          if (xn->requires_grad) xn->ensure_grad();
          if (gn->requires_grad) gn->ensure_grad();
          if (bn->requires_grad) bn->ensure_grad();
          for (int ci = 0; ci < c; ++ci) {
            const Real inv = Real(1) / rs[ci];
            double dg = 0.0, db = 0.0;
            for (int i = 0; i < n; ++i) {
              const std::int64_t off = (static_cast<std::int64_t>(i) * c + ci) * plane;
              for (std::int64_t j = 0; j < plane; ++j) {
                const Real g = self.grad[off + j];
                if (xn->requires_grad) xn->grad[off + j] += g * gn->values[ci] * inv;
                dg += static_cast<double>(g) * (xn->values[off + j] - rm[ci]) * inv;
                db += static_cast<double>(g);
              }
            }
            if (gn->requires_grad) gn->grad[ci] += static_cast<Real>(dg);
            if (bn->requires_grad) bn->grad[ci] += static_cast<Real>(db);
          }
        });
    BatchStats<Real> stats{Tensor<Real>::from_values({c}, layer.running_mean),
                           Tensor<Real>::from_values({c}, layer.running_std)};
    return {y, stats};
  }

  // train / stat_collect
  if (m < 2) {
    throw ShapeError("batchnorm_apply: batch statistics need N*H*W >= 2, got " +
                     std::to_string(m));
  }
  std::vector<Real> mu(c), sd(c);
  for (int ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const Real* xp = x.data() + (static_cast<std::int64_t>(i) * c + ci) * plane;
      for (std::int64_t j = 0; j < plane; ++j) acc += static_cast<double>(xp[j]);
    }
    const double mean = acc / static_cast<double>(m);
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const Real* xp = x.data() + (static_cast<std::int64_t>(i) * c + ci) * plane;
      for (std::int64_t j = 0; j < plane; ++j) {
        const double d = static_cast<double>(xp[j]) - mean;
        var += d * d;
      }
    }
    var /= static_cast<double>(m);  // biased
    mu[ci] = static_cast<Real>(mean);
    sd[ci] = static_cast<Real>(std::sqrt(var + static_cast<double>(layer.eps)));
  }

  std::vector<Real> out(x.size());
  for (int ci = 0; ci < c; ++ci) {
    const Real inv = Real(1) / sd[ci];
    const Real g = gamma[ci], b = beta[ci];
    for (int i = 0; i < n; ++i) {
      const Real* xp = x.data() + (static_cast<std::int64_t>(i) * c + ci) * plane;
      Real* op = out.data() + (static_cast<std::int64_t>(i) * c + ci) * plane;
      for (std::int64_t j = 0; j < plane; ++j) op[j] = g * (xp[j] - mu[ci]) * inv + b;
    }
  }

  auto xn = input.node();
  auto gn = layer.scale.node();
  auto bn = layer.shift.node();
  auto y = detail::make_op<Real>(
      s, std::move(out), {input, layer.scale, layer.shift},
      [xn, gn, bn, mu, sd, n, c, plane, m](detail::TensorNode<Real>& self) {
        if (xn->requires_grad) xn->ensure_grad();
        if (gn->requires_grad) gn->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        const double mm = static_cast<double>(m);
        for (int ci = 0; ci < c; ++ci) {
          const Real inv = Real(1) / sd[ci];
          double sum_g = 0.0, sum_gx = 0.0;
          for (int i = 0; i < n; ++i) {
            const std::int64_t off = (static_cast<std::int64_t>(i) * c + ci) * plane;
            for (std::int64_t j = 0; j < plane; ++j) {
              const Real g = self.grad[off + j];
              const Real xh = (xn->values[off + j] - mu[ci]) * inv;
              sum_g += static_cast<double>(g);
              sum_gx += static_cast<double>(g) * static_cast<double>(xh);
            }
          }
          if (gn->requires_grad) gn->grad[ci] += static_cast<Real>(sum_gx);
          if (bn->requires_grad) bn->grad[ci] += static_cast<Real>(sum_g);
          if (xn->requires_grad) {
            const Real mean_g = static_cast<Real>(sum_g / mm);
            const Real mean_gx = static_cast<Real>(sum_gx / mm);
            const Real gscale = gn->values[ci] * inv;
            for (int i = 0; i < n; ++i) {
              const std::int64_t off = (static_cast<std::int64_t>(i) * c + ci) * plane;
              for (std::int64_t j = 0; j < plane; ++j) {
                const Real xh = (xn->values[off + j] - mu[ci]) * inv;
                xn->grad[off + j] += gscale * (self.grad[off + j] - mean_g - xh * mean_gx);
              }
            }
          }
        }
      });

  auto mean_t = detail::make_op<Real>(
      {c}, std::vector<Real>(mu), {input}, [xn, n, c, plane, m](detail::TensorNode<Real>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int ci = 0; ci < c; ++ci) {
          const Real g = self.grad[ci] / static_cast<Real>(m);
          for (int i = 0; i < n; ++i) {
            const std::int64_t off = (static_cast<std::int64_t>(i) * c + ci) * plane;
            for (std::int64_t j = 0; j < plane; ++j) xn->grad[off + j] += g;
          }
        }
      });

  auto std_t = detail::make_op<Real>(
      {c}, std::vector<Real>(sd), {input},
      [xn, mu, sd, n, c, plane, m](detail::TensorNode<Real>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int ci = 0; ci < c; ++ci) {
          const Real g = self.grad[ci] / (static_cast<Real>(m) * sd[ci]);
          for (int i = 0; i < n; ++i) {
            const std::int64_t off = (static_cast<std::int64_t>(i) * c + ci) * plane;
            for (std::int64_t j = 0; j < plane; ++j) {
              xn->grad[off + j] += g * (xn->values[off + j] - mu[ci]);
            }
          }
        }
      });

  if (mode == BnMode::train) {
    for (int ci = 0; ci < c; ++ci) {
      layer.running_mean[ci] =
          (Real(1) - layer.momentum) * layer.running_mean[ci] + layer.momentum * mu[ci];
      layer.running_std[ci] =
          (Real(1) - layer.momentum) * layer.running_std[ci] + layer.momentum * sd[ci];
    }
  }
  return {y, BatchStats<Real>{mean_t, std_t}};
}

}  // namespace prosfda

#endif  // PROSFDA_BATCHNORM_HPP

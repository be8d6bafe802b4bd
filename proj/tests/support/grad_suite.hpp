// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Randomized finite-difference sweep over every differentiable primitive.
// Shared between the unit tests and the acceptance suite.

#ifndef PROSFDA_TESTS_GRAD_SUITE_HPP
#define PROSFDA_TESTS_GRAD_SUITE_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "prosfda/batchnorm.hpp"
#include "prosfda/gradcheck.hpp"
#include "prosfda/ops.hpp"
#include "prosfda/rng.hpp"
#include "prosfda/tensor.hpp"

namespace prosfda_tests {

inline prosfda::Tensor<double> random_tensor(std::vector<int> shape, prosfda::Rng& rng,
                                             double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(prosfda::detail::shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return prosfda::Tensor<double>::from_values(std::move(shape), std::move(v));
}

// Keeps values away from the relu/l1 kinks so central differences stay valid.
inline prosfda::Tensor<double> random_tensor_off_kinks(std::vector<int> shape,
                                                       prosfda::Rng& rng) {
  auto t = random_tensor(std::move(shape), rng);
  for (auto& x : t.values()) {
    if (std::abs(x) < 0.05) x += (x >= 0.0 ? 0.1 : -0.1);
  }
  return t;
}

// Max relative FD error across all differentiable primitives for one seed.
inline double run_grad_suite_seed(std::uint64_t seed) {
  using prosfda::Tensor;
  using T = Tensor<double>;
  prosfda::Rng rng(prosfda::Rng::derive(seed, 7001));
  double worst = 0.0;
  auto track = [&](double e) { worst = std::max(worst, e); };

  // conv2d wrt input, kernel, and bias
  {
    auto input = random_tensor({2, 3, 6, 6}, rng);
    auto kernel = random_tensor({4, 3, 3, 3}, rng);
    auto bias = random_tensor({4}, rng);
    track(prosfda::grad_check<double>(
        [&](const T& x) { return prosfda::mean_all(prosfda::conv2d(x, kernel, bias, 1, 1)); },
        input));
    track(prosfda::grad_check<double>(
        [&](const T& k) { return prosfda::mean_all(prosfda::conv2d(input, k, bias, 1, 1)); },
        kernel));
    track(prosfda::grad_check<double>(
        [&](const T& b) { return prosfda::mean_all(prosfda::conv2d(input, kernel, b, 2, 1)); },
        bias));
  }

  // batchnorm: output path and differentiable statistics, train + stat_collect
  for (auto mode : {prosfda::BnMode::train, prosfda::BnMode::stat_collect}) {
    auto input = random_tensor({3, 2, 4, 4}, rng);
    auto fn = [&, mode](const T& x) {
      auto layer = prosfda::make_bn_layer<double>(2);
      for (int i = 0; i < 2; ++i) {
        layer.scale.values()[i] = 0.5 + 0.1 * i;
        layer.shift.values()[i] = -0.2 + 0.3 * i;
        layer.running_mean[i] = 0.1 * i;
        layer.running_std[i] = 1.0 + 0.2 * i;
      }
      auto [y, stats] = prosfda::batchnorm_apply(x, layer, mode);
      auto target_m = T::zeros({2});
      auto target_s = T::ones({2});
      auto loss = prosfda::add(prosfda::mean_all(y),
                               prosfda::add(prosfda::l1_distance(stats.mean, target_m),
                                            prosfda::l1_distance(stats.std, target_s)));
      return loss;
    };
    track(prosfda::grad_check<double>(fn, input));
  }

  // activations
  {
    auto input = random_tensor_off_kinks({2, 3, 4, 4}, rng);
    track(prosfda::grad_check<double>(
        [](const T& x) { return prosfda::mean_all(prosfda::relu(x)); }, input));
    track(prosfda::grad_check<double>(
        [](const T& x) { return prosfda::mean_all(prosfda::sigmoid(x)); }, input));
  }

  // resampling
  {
    auto input = random_tensor({2, 2, 4, 4}, rng);
    track(prosfda::grad_check<double>(
        [](const T& x) {
          return prosfda::mean_all(prosfda::resample(x, prosfda::Resample::down2_avg));
        },
        input));
    track(prosfda::grad_check<double>(
        [](const T& x) {
          return prosfda::mean_all(prosfda::resample(x, prosfda::Resample::up2_nearest));
        },
        input));
  }

  // l1 distance, both arguments, away from ties
  {
    auto a = random_tensor({3, 5}, rng);
    auto b = random_tensor({3, 5}, rng, 2.0, 4.0);
    track(prosfda::grad_check<double>(
        [&](const T& x) { return prosfda::l1_distance(x, b); }, a));
    track(prosfda::grad_check<double>(
        [&](const T& x) { return prosfda::l1_distance(a, x); }, b));
  }

  // binary cross-entropy wrt predictions, away from the clamp boundaries
  {
    auto pred = random_tensor({4, 6}, rng, 0.05, 0.95);
    std::vector<double> tv(24);
    for (auto& t : tv) t = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    auto target = T::from_values({4, 6}, std::move(tv));
    track(prosfda::grad_check<double>(
        [&](const T& p) { return prosfda::binary_cross_entropy(p, target); }, pred));
  }

  return worst;
}

}  // namespace prosfda_tests

#endif  // PROSFDA_TESTS_GRAD_SUITE_HPP

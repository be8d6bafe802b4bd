// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "prosfda/batchnorm.hpp"
#include "prosfda/gradcheck.hpp"
#include "prosfda/ops.hpp"
#include "prosfda/optim.hpp"
#include "prosfda/rng.hpp"
#include "prosfda/tensor.hpp"
#include "support/grad_suite.hpp"

using prosfda::Tensor;
using T = Tensor<double>;
namespace pf = prosfda;

// Independent 6-loop cross-correlation oracle.
static std::vector<double> conv_oracle(const std::vector<double>& x, int n, int cin, int h, int w,
                                       const std::vector<double>& k, int cout, int ks,
                                       const std::vector<double>& bias, int stride, int pad,
                                       int& ho, int& wo) {
  ho = (h + 2 * pad - ks) / stride + 1;
  wo = (w + 2 * pad - ks) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(n) * cout * ho * wo, 0.0);
  for (int i = 0; i < n; ++i)
    for (int co = 0; co < cout; ++co)
      for (int oh = 0; oh < ho; ++oh)
        for (int ow = 0; ow < wo; ++ow) {
          double acc = bias[co];
          for (int ci = 0; ci < cin; ++ci)
            for (int ki = 0; ki < ks; ++ki)
              for (int kj = 0; kj < ks; ++kj) {
                const int ih = oh * stride + ki - pad;
                const int iw = ow * stride + kj - pad;
                if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                acc += x[((static_cast<std::size_t>(i) * cin + ci) * h + ih) * w + iw] *
                       k[((static_cast<std::size_t>(co) * cin + ci) * ks + ki) * ks + kj];
              }
          y[((static_cast<std::size_t>(i) * cout + co) * ho + oh) * wo + ow] = acc;
        }
  return y;
}

TEST(Conv2d, AllOnesSumsKernelFootprint) {
  auto x = T::ones({1, 1, 3, 3});
  auto k = T::ones({1, 1, 3, 3});
  auto b = T::zeros({1});
  auto y = pf::conv2d(x, k, b, 1, 0);
  ASSERT_EQ(y.shape(), (std::vector<int>{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.values()[0], 9.0);
}

TEST(Conv2d, IdentityKernelWithSamePadding) {
  pf::Rng rng(3);
  auto x = prosfda_tests::random_tensor({2, 1, 4, 4}, rng);
  auto k = T::zeros({1, 1, 3, 3});
  k.values()[4] = 1.0;  // center tap
  auto b = T::zeros({1});
  auto y = pf::conv2d(x, k, b, 1, 1);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.values().size(); ++i) {
    EXPECT_DOUBLE_EQ(y.values()[i], x.values()[i]);
  }
}

TEST(Conv2d, MatchesSixLoopOracle) {
  pf::Rng rng(11);
  auto x = prosfda_tests::random_tensor({2, 3, 8, 8}, rng);
  auto k = prosfda_tests::random_tensor({4, 3, 3, 3}, rng);
  auto b = prosfda_tests::random_tensor({4}, rng);
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{1, 0}, std::pair{2, 1}}) {
    auto y = pf::conv2d(x, k, b, stride, pad);
    int ho = 0, wo = 0;
    auto ref = conv_oracle(x.values(), 2, 3, 8, 8, k.values(), 4, 3, b.values(), stride, pad,
                           ho, wo);
    ASSERT_EQ(y.shape(), (std::vector<int>{2, 4, ho, wo}));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_NEAR(y.values()[i], ref[i], 1e-12);
    }
  }
}

TEST(Conv2d, RejectsBadShapes) {
  auto x = T::ones({1, 2, 4, 4});
  auto b1 = T::zeros({1});
  EXPECT_THROW(pf::conv2d(x, T::ones({1, 3, 3, 3}), b1, 1, 1), pf::ShapeError);  // cin mismatch
  EXPECT_THROW(pf::conv2d(x, T::ones({1, 2, 2, 2}), b1, 1, 0), pf::ShapeError);  // even kernel
  EXPECT_THROW(pf::conv2d(x, T::ones({1, 2, 3, 3}), T::zeros({2}), 1, 1), pf::ShapeError);
  EXPECT_THROW(pf::conv2d(x, T::ones({1, 2, 3, 3}), b1, 0, 1), pf::ShapeError);  // stride 0
}

TEST(BatchNorm, AlreadyNormalizedBatchPassesThrough) {
  // Per channel the batch holds {-1, +1}: mean 0, biased variance 1.
  std::vector<double> v = {-1, -1, 1, 1};
  auto x = T::from_values({2, 2, 1, 1}, v);
  auto layer = pf::make_bn_layer<double>(2);
  auto [y, stats] = pf::batchnorm_apply(x, layer, pf::BnMode::train);
  const double expect_std = std::sqrt(1.0 + 1e-5);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(y.values()[i], v[i], 1e-4);
  }
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(stats.mean.values()[c], 0.0, 1e-15);
    EXPECT_NEAR(stats.std.values()[c], expect_std, 1e-15);
  }
}

TEST(BatchNorm, EvalUsesRunningStatsAndAffine) {
  auto x = T::full({1, 1, 2, 2}, 5.0);
  auto layer = pf::make_bn_layer<double>(1);
  layer.running_mean[0] = 5.0;
  layer.running_std[0] = 1.0;
  layer.scale.values()[0] = 2.0;
  layer.shift.values()[0] = 3.0;
  auto [y, stats] = pf::batchnorm_apply(x, layer, pf::BnMode::eval);
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 3.0);
  EXPECT_DOUBLE_EQ(stats.mean.values()[0], 5.0);
  EXPECT_DOUBLE_EQ(stats.std.values()[0], 1.0);
}

TEST(BatchNorm, TrainStatsMatchDirectOracle) {
  pf::Rng rng(21);
  auto x = prosfda_tests::random_tensor({4, 2, 3, 3}, rng);
  auto layer = pf::make_bn_layer<double>(2);
  auto [y, stats] = pf::batchnorm_apply(x, layer, pf::BnMode::train);
  const int m = 4 * 3 * 3;
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 9; ++j) mean += x.values()[(i * 2 + c) * 9 + j];
    mean /= m;
    double var = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 9; ++j) {
        const double d = x.values()[(i * 2 + c) * 9 + j] - mean;
        var += d * d;
      }
    var /= m;
    EXPECT_NEAR(stats.mean.values()[c], mean, 1e-12);
    EXPECT_NEAR(stats.std.values()[c], std::sqrt(var + 1e-5), 1e-12);
    // train mode folds the batch statistic into the running buffers
    EXPECT_NEAR(layer.running_mean[c], 0.1 * mean, 1e-12);
    EXPECT_NEAR(layer.running_std[c], 0.9 * 1.0 + 0.1 * std::sqrt(var + 1e-5), 1e-12);
  }
}

TEST(BatchNorm, StatCollectLeavesBuffersUntouched) {
  pf::Rng rng(22);
  auto x = prosfda_tests::random_tensor({2, 2, 2, 2}, rng);
  auto layer = pf::make_bn_layer<double>(2);
  auto [y, stats] = pf::batchnorm_apply(x, layer, pf::BnMode::stat_collect);
  for (int c = 0; c < 2; ++c) {
    EXPECT_DOUBLE_EQ(layer.running_mean[c], 0.0);
    EXPECT_DOUBLE_EQ(layer.running_std[c], 1.0);
  }
}

TEST(BatchNorm, RejectsChannelMismatch) {
  auto x = T::ones({1, 3, 2, 2});
  auto layer = pf::make_bn_layer<double>(2);
  EXPECT_THROW(pf::batchnorm_apply(x, layer, pf::BnMode::train), pf::ShapeError);
}

TEST(Activation, ReluAndSigmoidValues) {
  auto x = T::from_values({3}, {-1.0, 0.0, 2.0});
  auto y = pf::activation(x, pf::Activation::relu);
  EXPECT_DOUBLE_EQ(y.values()[0], 0.0);
  EXPECT_DOUBLE_EQ(y.values()[1], 0.0);
  EXPECT_DOUBLE_EQ(y.values()[2], 2.0);
  auto s = pf::activation(T::zeros({1}), pf::Activation::sigmoid);
  EXPECT_DOUBLE_EQ(s.values()[0], 0.5);
}

TEST(Activation, SigmoidGradientMatchesFiniteDifferences) {
  pf::Rng rng(31);
  auto x = prosfda_tests::random_tensor({2, 7}, rng, -3.0, 3.0);
  double err = pf::grad_check<double>(
      [](const T& t) { return pf::sum_all(pf::sigmoid(t)); }, x);
  EXPECT_LE(err, 1e-6);
}

TEST(Resample, ConstantImageStaysConstant) {
  auto x = T::full({1, 1, 4, 4}, 2.5);
  auto y = pf::resample(x, pf::Resample::down2_avg);
  ASSERT_EQ(y.shape(), (std::vector<int>{1, 1, 2, 2}));
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(Resample, UpThenDownIsIdentity) {
  pf::Rng rng(41);
  auto x = prosfda_tests::random_tensor({2, 3, 4, 4}, rng);
  auto y = pf::resample(pf::resample(x, pf::Resample::up2_nearest), pf::Resample::down2_avg);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.values().size(); ++i) {
    EXPECT_DOUBLE_EQ(y.values()[i], x.values()[i]);
  }
}

TEST(Resample, RejectsOddSpatialSize) {
  auto x = T::ones({1, 1, 3, 4});
  EXPECT_THROW(pf::resample(x, pf::Resample::down2_avg), pf::ShapeError);
}

TEST(L1Distance, Examples) {
  pf::Rng rng(51);
  auto a = prosfda_tests::random_tensor({3, 3}, rng);
  EXPECT_DOUBLE_EQ(pf::l1_distance(a, a).item(), 0.0);
  auto p = T::from_values({2}, {0.0, 0.0});
  auto q = T::from_values({2}, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(pf::l1_distance(p, q).item(), 2.0);
  EXPECT_THROW(pf::l1_distance(p, T::zeros({3})), pf::ShapeError);
}

TEST(Bce, PerfectPredictionIsNearZero) {
  auto target = T::from_values({4}, {0.0, 1.0, 1.0, 0.0});
  auto loss = pf::binary_cross_entropy(target, target);
  EXPECT_LE(loss.item(), 1e-6);
}

TEST(Bce, HalfEverywhereIsLn2) {
  auto pred = T::full({2, 3}, 0.5);
  auto target = T::from_values({2, 3}, {0, 1, 0, 1, 1, 0});
  EXPECT_NEAR(pf::binary_cross_entropy(pred, target).item(), std::log(2.0), 1e-12);
}

TEST(Bce, RejectsNonBinaryTarget) {
  auto pred = T::full({2}, 0.5);
  auto target = T::from_values({2}, {0.0, 0.5});
  EXPECT_THROW(pf::binary_cross_entropy(pred, target), pf::ValueError);
}

TEST(Backward, SumGivesOnes) {
  auto x = T::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  auto loss = pf::sum_all(x);
  pf::backward(loss);
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Backward, UnrelatedLeafKeepsZeroGrad) {
  auto x = T::ones({4}, true);
  auto z = T::ones({4}, true);
  auto loss = pf::sum_all(x);
  pf::backward(loss);
  for (double g : z.grad()) EXPECT_DOUBLE_EQ(g, 0.0);
}

TEST(Backward, NonScalarLossRejected) {
  auto x = T::ones({4}, true);
  EXPECT_THROW(pf::backward(pf::relu(x)), pf::ShapeError);
}

TEST(Backward, SumOfLossesEqualsSummedGradients) {
  pf::Rng rng(61);
  auto make_inputs = [&rng]() {
    pf::Rng local(777);
    return prosfda_tests::random_tensor({2, 2, 4, 4}, local);
  };
  auto k = prosfda_tests::random_tensor({2, 2, 3, 3}, rng);
  auto b = prosfda_tests::random_tensor({2}, rng);
  auto build = [&](const T& x, int which) {
    auto c = pf::conv2d(x, k, b, 1, 1);
    auto l1 = pf::mean_all(pf::relu(c));
    auto l2 = pf::l1_distance(c, T::zeros(c.shape()));
    if (which == 0) return l1;
    if (which == 1) return l2;
    return pf::add(l1, l2);
  };
  auto xa = make_inputs();
  xa.set_requires_grad(true);
  pf::backward(build(xa, 0));
  std::vector<double> g1 = xa.grad();
  xa.zero_grad();
  pf::backward(build(xa, 1));
  std::vector<double> g2 = xa.grad();

  auto xb = make_inputs();
  xb.set_requires_grad(true);
  pf::backward(build(xb, 2));
  for (std::size_t i = 0; i < g1.size(); ++i) {
    EXPECT_DOUBLE_EQ(xb.grad()[i], g1[i] + g2[i]);
  }
}

TEST(Backward, AccumulatesAcrossCalls) {
  auto x = T::ones({3}, true);
  pf::backward(pf::sum_all(x));
  pf::backward(pf::sum_all(x));
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 2.0);
}

TEST(Determinism, ForwardAndBackwardBitIdenticalAcrossRuns) {
  auto run = []() {
    pf::Rng rng(99);
    auto x = prosfda_tests::random_tensor({2, 2, 4, 4}, rng);
    x.set_requires_grad(true);
    auto k = prosfda_tests::random_tensor({3, 2, 3, 3}, rng);
    auto b = prosfda_tests::random_tensor({3}, rng);
    auto layer = pf::make_bn_layer<double>(3);
    auto [y, stats] = pf::batchnorm_apply(pf::conv2d(x, k, b, 1, 1), layer, pf::BnMode::train);
    auto loss = pf::mean_all(pf::sigmoid(y));
    pf::backward(loss);
    std::pair<std::vector<double>, std::vector<double>> out{loss.values(), x.grad()};
    return out;
  };
  auto a = run();
  auto b = run();
  ASSERT_EQ(a.first.size(), b.first.size());
  for (std::size_t i = 0; i < a.first.size(); ++i) EXPECT_EQ(a.first[i], b.first[i]);
  for (std::size_t i = 0; i < a.second.size(); ++i) EXPECT_EQ(a.second[i], b.second[i]);
}

TEST(GradCheck, LinearFunctionIsExact) {
  pf::Rng rng(71);
  auto x = prosfda_tests::random_tensor({3, 4}, rng);
  double err = pf::grad_check<double>(
      [](const T& t) { return pf::sum_all(pf::scale(t, 3.0)); }, x);
  EXPECT_LE(err, 1e-10);
}

TEST(GradCheck, ConvReluMeanPipeline) {
  pf::Rng rng(72);
  auto x = prosfda_tests::random_tensor({2, 2, 6, 6}, rng);
  auto k = prosfda_tests::random_tensor({3, 2, 3, 3}, rng);
  auto b = prosfda_tests::random_tensor({3}, rng);
  double err = pf::grad_check<double>(
      [&](const T& t) { return pf::mean_all(pf::relu(pf::conv2d(t, k, b, 1, 1))); }, x);
  EXPECT_LE(err, 1e-5);
}

TEST(GradCheck, DetectsCorruptedGradient) {
  // Identity op whose backward deliberately doubles the gradient.
  auto corrupted_identity = [](const T& x) {
    auto xn = x.node();
    auto y = pf::detail::make_op<double>(
        x.shape(), x.values(), {x}, [xn](pf::detail::TensorNode<double>& self) {
          if (!xn->requires_grad) return;
          xn->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            xn->grad[i] += 2.0 * self.grad[i];
          }
        });
    return pf::sum_all(y);
  };
  pf::Rng rng(73);
  auto x = prosfda_tests::random_tensor({5}, rng);
  double err = pf::grad_check<double>(corrupted_identity, x);
  EXPECT_GE(err, 0.5);
}

TEST(GradSuite, TwentySeedsStayUnderTolerance) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    worst = std::max(worst, prosfda_tests::run_grad_suite_seed(seed));
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(Sgd, FirstStepIsPlainGradientStep) {
  auto p = T::from_values({3}, {1.0, 2.0, 3.0}, true);
  p.node()->grad = {0.5, -0.5, 1.0};
  std::vector<T> params{p};
  auto state = pf::make_optimizer<double>(params, 0.99, 0.01, 10);
  pf::sgd_momentum_step(params, state, 0.1);
  EXPECT_DOUBLE_EQ(p.values()[0], 1.0 - 0.1 * 0.5);
  EXPECT_DOUBLE_EQ(p.values()[1], 2.0 + 0.1 * 0.5);
  EXPECT_DOUBLE_EQ(p.values()[2], 3.0 - 0.1 * 1.0);
}

TEST(Sgd, ZeroGradientNeverMoves) {
  auto p = T::from_values({2}, {1.0, -1.0}, true);
  std::vector<T> params{p};
  auto state = pf::make_optimizer<double>(params, 0.99, 0.01, 10);
  for (int i = 0; i < 5; ++i) pf::sgd_momentum_step(params, state, 0.1);
  EXPECT_DOUBLE_EQ(p.values()[0], 1.0);
  EXPECT_DOUBLE_EQ(p.values()[1], -1.0);
}

TEST(Sgd, TwoConstantGradientSteps) {
  const double momentum = 0.99, lr = 0.05, g = 0.7;
  auto p = T::from_values({1}, {2.0}, true);
  std::vector<T> params{p};
  auto state = pf::make_optimizer<double>(params, momentum, 0.01, 10);
  p.node()->grad = {g};
  pf::sgd_momentum_step(params, state, lr);
  p.node()->grad = {g};
  pf::sgd_momentum_step(params, state, lr);
  // v1 = g, v2 = m*g + g => total displacement lr*g*(2+m)
  EXPECT_NEAR(p.values()[0], 2.0 - lr * g * (2.0 + momentum), 1e-15);
}

TEST(PolyDecay, Examples) {
  EXPECT_DOUBLE_EQ(pf::poly_decay_lr(0.01, 0, 100), 0.01);
  EXPECT_DOUBLE_EQ(pf::poly_decay_lr(0.01, 100, 100), 0.0);
  EXPECT_NEAR(pf::poly_decay_lr(0.01, 50, 100), 0.01 * std::pow(0.5, 0.9), 1e-12);
  EXPECT_NEAR(pf::poly_decay_lr(0.01, 50, 100), 0.005359, 1e-6);
  EXPECT_THROW(pf::poly_decay_lr(0.01, 101, 100), pf::ValueError);
  EXPECT_THROW(pf::poly_decay_lr(0.01, 1, 0), pf::ValueError);
}

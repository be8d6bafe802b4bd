// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef PROSFDA_GRADCHECK_HPP
#define PROSFDA_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "prosfda/tensor.hpp"

namespace prosfda {

// Central-difference check of a tensor-to-scalar computation. Returns the
// maximum elementwise relative error between the analytic gradient and
// (f(x+he) - f(x-he)) / 2h, with denominator max(|analytic|, |numeric|, 1e-8).
// Meant for Real = double.
template <class Real>
Real grad_check(const std::function<Tensor<Real>(const Tensor<Real>&)>& fn,
                const Tensor<Real>& input, Real step = Real(1e-4)) {
  Tensor<Real> x = Tensor<Real>::from_values(input.shape(), input.values(), true);
  Tensor<Real> y = fn(x);
  backward(y);
  std::vector<Real> analytic = x.grad();

  Tensor<Real> probe = input.detached_clone();
  Real max_err = Real(0);
  for (std::size_t i = 0; i < probe.values().size(); ++i) {
    const Real orig = probe.values()[i];
    Real fplus, fminus;
    {
      NoGradGuard ng;
      probe.values()[i] = orig + step;
      fplus = fn(probe).item();
      probe.values()[i] = orig - step;
      fminus = fn(probe).item();
      probe.values()[i] = orig;
    }
    const Real numeric = (fplus - fminus) / (Real(2) * step);
    const Real denom = std::max({std::abs(analytic[i]), std::abs(numeric), Real(1e-8)});
    max_err = std::max(max_err, std::abs(analytic[i] - numeric) / denom);
  }
  return max_err;
}

}  // namespace prosfda

#endif  // PROSFDA_GRADCHECK_HPP

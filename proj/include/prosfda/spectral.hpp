// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef PROSFDA_SPECTRAL_HPP
#define PROSFDA_SPECTRAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "prosfda/fft.hpp"
#include "prosfda/image.hpp"
#include "prosfda/rng.hpp"

namespace prosfda {

// Frequency-domain style augmentation settings.
struct AugConfig {
  double beta_max = 0.15;  // cut-off ratio upper bound, drawn from (0, beta_max]
  std::uint64_t seed = 0;
};

// DC-centered rectangle marking the low-frequency band for cut-off ratio beta.
// Odd side lengths keep the DC bin included and the region conjugate-symmetric.
inline std::vector<std::uint8_t> low_freq_mask(int height, int width, double beta) {
  if (!(beta > 0.0 && beta <= 0.5)) {
    throw ValueError("low_freq_mask: beta must be in (0, 0.5], got " + std::to_string(beta));
  }
  if (height < 2 || width < 2) {
    throw ShapeError("low_freq_mask: sides must be >= 2");
  }
  const int rh = static_cast<int>(beta * height / 2.0);
  const int rw = static_cast<int>(beta * width / 2.0);
  const int ch = height / 2, cw = width / 2;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(height) * width, 0);
  for (int y = ch - rh; y <= ch + rh; ++y) {
    for (int x = cw - rw; x <= cw + rw; ++x) {
      mask[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }
  return mask;
}

// Replaces the low-frequency amplitude of x with x_ref's, keeping x's phase
// everywhere, and transforms back. Styles move, structure stays.
template <class Real>
Image<Real> amplitude_swap(const Image<Real>& x, const Image<Real>& x_ref, double beta) {
  check_same_image_shape(x, x_ref, "amplitude_swap");
  const auto mask = low_freq_mask(x.height, x.width, beta);
  Image<Real> out = x;
  for (int c = 0; c < x.channels; ++c) {
    auto spec = fft2_forward(x.channel(c), x.height, x.width);
    const auto ref = fft2_forward(x_ref.channel(c), x.height, x.width);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) spec.amplitude[i] = ref.amplitude[i];
    }
    out.set_channel(c, fft2_inverse(spec));
  }
  return out;
}

// Pairs each batch member with a randomly permuted peer and swaps styles.
// The permutation is resampled a few times to avoid fixed points; each sample
// draws its own cut-off ratio from (0, beta_max].
template <class Real>
std::vector<Image<Real>> batch_style_permute(const std::vector<Image<Real>>& batch,
                                             const AugConfig& config) {
  if (batch.empty()) throw ValueError("batch_style_permute: empty batch");
  if (!(config.beta_max > 0.0 && config.beta_max <= 0.5)) {
    throw ValueError("batch_style_permute: beta_max must be in (0, 0.5], got " +
                     std::to_string(config.beta_max));
  }
  Rng rng(config.seed);
  const std::size_t n = batch.size();
  std::vector<std::size_t> perm(n);
  for (int attempt = 0; attempt < 8; ++attempt) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    bool derangement = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (perm[i] == i) {
        derangement = false;
        break;
      }
    }
    if (derangement || n < 2) break;
  }
  std::vector<Image<Real>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double beta = rng.uniform_open0(config.beta_max);
    out.push_back(amplitude_swap(batch[i], batch[perm[i]], beta));
  }
  return out;
}

}  // namespace prosfda

#endif  // PROSFDA_SPECTRAL_HPP

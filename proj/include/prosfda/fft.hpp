// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef PROSFDA_FFT_HPP
#define PROSFDA_FFT_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "prosfda/common.hpp"

namespace prosfda {

// DC-centered amplitude/phase decomposition of one real channel. Amplitude is
// the unnormalized transform magnitude, phase lies in (-pi, pi].
template <class Real>
struct Spectrum {
  int height = 0;
  int width = 0;
  std::vector<Real> amplitude;
  std::vector<Real> phase;
};

namespace detail {

inline bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey; unnormalized in both directions.
template <class Real>
void fft_radix2(std::complex<Real>* a, int n, bool inverse) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / len;
    const std::complex<Real> wlen(static_cast<Real>(std::cos(ang)),
                                  static_cast<Real>(std::sin(ang)));
    for (int i = 0; i < n; i += len) {
      std::complex<Real> w(Real(1), Real(0));
      for (int j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// O(n^2) fallback for non-power-of-two sides.
template <class Real>
void dft_direct(std::complex<Real>* a, int n, bool inverse) {
  std::vector<std::complex<Real>> out(n);
  const double sign = inverse ? 2.0 : -2.0;
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int t = 0; t < n; ++t) {
      const double ang = sign * std::numbers::pi * k * t / n;
      acc += std::complex<double>(a[t].real(), a[t].imag()) *
             std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = std::complex<Real>(static_cast<Real>(acc.real()), static_cast<Real>(acc.imag()));
  }
  for (int k = 0; k < n; ++k) a[k] = out[k];
}

template <class Real>
void fft1d(std::complex<Real>* a, int n, bool inverse) {
  if (is_pow2(n)) {
    fft_radix2(a, n, inverse);
  } else {
    dft_direct(a, n, inverse);
  }
}

// Unnormalized 2D transform, rows then columns.
template <class Real>
void fft2_complex(std::vector<std::complex<Real>>& z, int h, int w, bool inverse) {
  for (int y = 0; y < h; ++y) fft1d(z.data() + static_cast<std::size_t>(y) * w, w, inverse);
  std::vector<std::complex<Real>> col(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = z[static_cast<std::size_t>(y) * w + x];
    fft1d(col.data(), h, inverse);
    for (int y = 0; y < h; ++y) z[static_cast<std::size_t>(y) * w + x] = col[y];
  }
}

}  // namespace detail

// Forward transform of a real field into a DC-centered spectrum.
template <class Real>
Spectrum<Real> fft2_forward(const std::vector<Real>& field, int h, int w) {
  if (h < 2 || w < 2) {
    throw ShapeError("fft2_forward: sides must be >= 2, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  if (static_cast<std::size_t>(h) * w != field.size()) {
    throw ShapeError("fft2_forward: field size does not match " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  for (Real v : field) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw ValueError("fft2_forward: non-finite input value");
    }
  }
  std::vector<std::complex<Real>> z(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) z[i] = std::complex<Real>(field[i], Real(0));
  detail::fft2_complex(z, h, w, false);

  Spectrum<Real> spec;
  spec.height = h;
  spec.width = w;
  spec.amplitude.resize(field.size());
  spec.phase.resize(field.size());
  const int sh = h / 2, sw = w / 2;
  for (int y = 0; y < h; ++y) {
    const int ry = (y - sh + h) % h;  // centered row y reads raw row ry
    for (int x = 0; x < w; ++x) {
      const int rx = (x - sw + w) % w;
      const auto v = z[static_cast<std::size_t>(ry) * w + rx];
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      spec.amplitude[i] = std::abs(v);
      Real ph = std::atan2(v.imag(), v.real());
      if (ph == static_cast<Real>(-std::numbers::pi)) ph = static_cast<Real>(std::numbers::pi);
      spec.phase[i] = ph;
    }
  }
  return spec;
}

// Inverse transform back to a real field. The spectrum must describe a real
// signal; the imaginary residual is checked against the signal magnitude.
template <class Real>
std::vector<Real> fft2_inverse(const Spectrum<Real>& spec) {
  const int h = spec.height, w = spec.width;
  if (h < 2 || w < 2) throw ShapeError("fft2_inverse: spectrum sides must be >= 2");
  std::vector<std::complex<Real>> z(static_cast<std::size_t>(h) * w);
  const int sh = h / 2, sw = w / 2;
  for (int y = 0; y < h; ++y) {
    const int ry = (y - sh + h) % h;
    for (int x = 0; x < w; ++x) {
      const int rx = (x - sw + w) % w;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      z[static_cast<std::size_t>(ry) * w + rx] =
          std::polar(spec.amplitude[i], spec.phase[i]);
    }
  }
  detail::fft2_complex(z, h, w, true);
  const Real norm = Real(1) / static_cast<Real>(static_cast<std::int64_t>(h) * w);
  Real max_mag = Real(0), max_imag = Real(0);
  std::vector<Real> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = z[i].real() * norm;
    max_mag = std::max(max_mag, std::abs(z[i].real() * norm));
    max_imag = std::max(max_imag, std::abs(z[i].imag() * norm));
  }
  const Real residual_tol = std::is_same_v<Real, float> ? Real(1e-3) : Real(1e-6);
  if (max_imag > residual_tol * std::max(max_mag, Real(1))) {
    throw ValueError("fft2_inverse: spectrum is not conjugate-symmetric (imaginary residual " +
                     std::to_string(static_cast<double>(max_imag)) + ")");
  }
  return out;
}

}  // namespace prosfda

#endif  // PROSFDA_FFT_HPP

// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef PROSFDA_OPS_HPP
#define PROSFDA_OPS_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "prosfda/tensor.hpp"

namespace prosfda {

enum class Activation { relu, sigmoid };
enum class Resample { down2_avg, up2_nearest };

namespace detail {

template <class Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Real>
using MatMap = Eigen::Map<RowMat<Real>>;

template <class Real>
using ConstMatMap = Eigen::Map<const RowMat<Real>>;

inline void check_same_shape(const std::vector<int>& a, const std::vector<int>& b,
                             const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
  }
}

// True when b's shape equals a's shape with the leading batch axis dropped.
inline bool broadcasts_over_batch(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() + 1) return false;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (a[i + 1] != b[i]) return false;
  }
  return true;
}

// col layout: rows = C*k*k, cols = Ho*Wo, row-major.
template <class Real>
void im2col(const Real* x, int C, int H, int W, int k, int stride, int padding,
            int Ho, int Wo, Real* col) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        Real* row = col + (static_cast<std::int64_t>(c) * k * k + ki * k + kj) *
                              (static_cast<std::int64_t>(Ho) * Wo);
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * stride + ki - padding;
          Real* dst = row + static_cast<std::int64_t>(oh) * Wo;
          if (ih < 0 || ih >= H) {
            for (int ow = 0; ow < Wo; ++ow) dst[ow] = Real(0);
            continue;
          }
          const Real* src = x + (static_cast<std::int64_t>(c) * H + ih) * W;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * stride + kj - padding;
            dst[ow] = (iw >= 0 && iw < W) ? src[iw] : Real(0);
          }
        }
      }
    }
  }
}

template <class Real>
void col2im_accumulate(const Real* col, int C, int H, int W, int k, int stride,
                       int padding, int Ho, int Wo, Real* x) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const Real* row = col + (static_cast<std::int64_t>(c) * k * k + ki * k + kj) *
                                    (static_cast<std::int64_t>(Ho) * Wo);
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * stride + ki - padding;
          if (ih < 0 || ih >= H) continue;
          const Real* src = row + static_cast<std::int64_t>(oh) * Wo;
          Real* dst = x + (static_cast<std::int64_t>(c) * H + ih) * W;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * stride + kj - padding;
            if (iw >= 0 && iw < W) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic
// ---------------------------------------------------------------------------

// a + b, either same-shape or with b broadcast across a's leading batch axis.
template <class Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const bool bcast = detail::broadcasts_over_batch(sa, sb);
  if (!bcast) detail::check_same_shape(sa, sb, "add");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(av.size());
  if (bcast) {
    const std::int64_t inner = static_cast<std::int64_t>(bv.size());
    const std::int64_t n = static_cast<std::int64_t>(av.size()) / inner;
    for (std::int64_t i = 0; i < n; ++i) {
      const Real* ap = av.data() + i * inner;
      Real* op = out.data() + i * inner;
      for (std::int64_t j = 0; j < inner; ++j) op[j] = ap[j] + bv[j];
    }
  } else {
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<Real>(
      sa, std::move(out), {a, b}, [an, bn, bcast](detail::TensorNode<Real>& self) {
        if (an->requires_grad) detail::accumulate_grad(*an, self.grad);
        if (bn->requires_grad) {
          bn->ensure_grad();
          if (bcast) {
            const std::int64_t inner = static_cast<std::int64_t>(bn->values.size());
            const std::int64_t n = static_cast<std::int64_t>(self.grad.size()) / inner;
            for (std::int64_t i = 0; i < n; ++i) {
              const Real* gp = self.grad.data() + i * inner;
              for (std::int64_t j = 0; j < inner; ++j) bn->grad[j] += gp[j];
            }
          } else {
            detail::accumulate_grad(*bn, self.grad);
          }
        }
      });
}

template <class Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "sub");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<Real>(a.shape(), std::move(out), {a, b},
                               [an, bn](detail::TensorNode<Real>& self) {
                                 if (an->requires_grad) detail::accumulate_grad(*an, self.grad);
                                 if (bn->requires_grad) {
                                   bn->ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                     bn->grad[i] -= self.grad[i];
                                   }
                                 }
                               });
}

// a * b elementwise, same broadcast rule as add.
template <class Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const bool bcast = detail::broadcasts_over_batch(sa, sb);
  if (!bcast) detail::check_same_shape(sa, sb, "mul");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(av.size());
  const std::int64_t inner = static_cast<std::int64_t>(bv.size());
  if (bcast) {
    const std::int64_t n = static_cast<std::int64_t>(av.size()) / inner;
    for (std::int64_t i = 0; i < n; ++i) {
      const Real* ap = av.data() + i * inner;
      Real* op = out.data() + i * inner;
      for (std::int64_t j = 0; j < inner; ++j) op[j] = ap[j] * bv[j];
    }
  } else {
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<Real>(
      sa, std::move(out), {a, b}, [an, bn, bcast, inner](detail::TensorNode<Real>& self) {
        const auto& av = an->values;
        const auto& bv = bn->values;
        if (an->requires_grad) {
          an->ensure_grad();
          if (bcast) {
            const std::int64_t n = static_cast<std::int64_t>(self.grad.size()) / inner;
            for (std::int64_t i = 0; i < n; ++i) {
              for (std::int64_t j = 0; j < inner; ++j) {
                an->grad[i * inner + j] += self.grad[i * inner + j] * bv[j];
              }
            }
          } else {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
              an->grad[i] += self.grad[i] * bv[i];
            }
          }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          if (bcast) {
            const std::int64_t n = static_cast<std::int64_t>(self.grad.size()) / inner;
            for (std::int64_t i = 0; i < n; ++i) {
              for (std::int64_t j = 0; j < inner; ++j) {
                bn->grad[j] += self.grad[i * inner + j] * av[i * inner + j];
              }
            }
          } else {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
              bn->grad[i] += self.grad[i] * av[i];
            }
          }
        }
      });
}

template <class Real>
Tensor<Real> scale(const Tensor<Real>& a, Real c) {
  const auto& av = a.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  auto an = a.node();
  return detail::make_op<Real>(a.shape(), std::move(out), {a},
                               [an, c](detail::TensorNode<Real>& self) {
                                 if (!an->requires_grad) return;
                                 an->ensure_grad();
                                 for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                   an->grad[i] += self.grad[i] * c;
                                 }
                               });
}

template <class Real>
Tensor<Real> sum_all(const Tensor<Real>& a) {
  double acc = 0.0;
  for (Real v : a.values()) acc += static_cast<double>(v);
  auto an = a.node();
  return detail::make_op<Real>({1}, {static_cast<Real>(acc)}, {a},
                               [an](detail::TensorNode<Real>& self) {
                                 if (!an->requires_grad) return;
                                 an->ensure_grad();
                                 const Real g = self.grad[0];
                                 for (auto& v : an->grad) v += g;
                               });
}

template <class Real>
Tensor<Real> mean_all(const Tensor<Real>& a) {
  double acc = 0.0;
  for (Real v : a.values()) acc += static_cast<double>(v);
  const auto n = static_cast<double>(a.values().size());
  auto an = a.node();
  return detail::make_op<Real>({1}, {static_cast<Real>(acc / n)}, {a},
                               [an, n](detail::TensorNode<Real>& self) {
                                 if (!an->requires_grad) return;
                                 an->ensure_grad();
                                 const Real g = static_cast<Real>(self.grad[0] / n);
                                 for (auto& v : an->grad) v += g;
                               });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

template <class Real>
Tensor<Real> relu(const Tensor<Real>& a) {
  const auto& av = a.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > Real(0) ? av[i] : Real(0);
  auto an = a.node();
  return detail::make_op<Real>(a.shape(), std::move(out), {a},
                               [an](detail::TensorNode<Real>& self) {
                                 if (!an->requires_grad) return;
                                 an->ensure_grad();
                                 for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                   if (an->values[i] > Real(0)) an->grad[i] += self.grad[i];
                                 }
                               });
}

template <class Real>
Tensor<Real> sigmoid(const Tensor<Real>& a) {
  const auto& av = a.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = Real(1) / (Real(1) + std::exp(-av[i]));
  }
  auto an = a.node();
  return detail::make_op<Real>(a.shape(), std::move(out), {a},
                               [an](detail::TensorNode<Real>& self) {
                                 if (!an->requires_grad) return;
                                 an->ensure_grad();
                                 for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                   const Real y = self.values[i];
                                   an->grad[i] += self.grad[i] * y * (Real(1) - y);
                                 }
                               });
}

template <class Real>
Tensor<Real> activation(const Tensor<Real>& a, Activation kind) {
  return kind == Activation::relu ? relu(a) : sigmoid(a);
}

// ---------------------------------------------------------------------------
// Structure ops
// ---------------------------------------------------------------------------

template <class Real>
Tensor<Real> concat_channels(const Tensor<Real>& a, const Tensor<Real>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw ShapeError("concat_channels: incompatible shapes " + detail::shape_str(sa) +
                     " vs " + detail::shape_str(sb));
  }
  const int n = sa[0], ca = sa[1], cb = sb[1], h = sa[2], w = sa[3];
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<Real> out(static_cast<std::size_t>(n) * (ca + cb) * plane);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < n; ++i) {
    std::copy_n(av.data() + static_cast<std::int64_t>(i) * ca * plane, ca * plane,
                out.data() + static_cast<std::int64_t>(i) * (ca + cb) * plane);
    std::copy_n(bv.data() + static_cast<std::int64_t>(i) * cb * plane, cb * plane,
                out.data() + (static_cast<std::int64_t>(i) * (ca + cb) + ca) * plane);
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<Real>(
      {n, ca + cb, h, w}, std::move(out), {a, b},
      [an, bn, n, ca, cb, plane](detail::TensorNode<Real>& self) {
        for (int i = 0; i < n; ++i) {
          const Real* g = self.grad.data() + static_cast<std::int64_t>(i) * (ca + cb) * plane;
          if (an->requires_grad) {
            an->ensure_grad();
            Real* ga = an->grad.data() + static_cast<std::int64_t>(i) * ca * plane;
            for (std::int64_t j = 0; j < ca * plane; ++j) ga[j] += g[j];
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            Real* gb = bn->grad.data() + static_cast<std::int64_t>(i) * cb * plane;
            for (std::int64_t j = 0; j < cb * plane; ++j) gb[j] += g[ca * plane + j];
          }
        }
      });
}

template <class Real>
Tensor<Real> resample(const Tensor<Real>& input, Resample kind) {
  const auto& s = input.shape();
  if (s.size() != 4) throw ShapeError("resample: expected NCHW input, got " + detail::shape_str(s));
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  auto in_node = input.node();
  if (kind == Resample::down2_avg) {
    if (h % 2 != 0 || w % 2 != 0) {
      throw ShapeError("down2_avg: spatial size " + std::to_string(h) + "x" +
                       std::to_string(w) + " is not even");
    }
    const int ho = h / 2, wo = w / 2;
    std::vector<Real> out(static_cast<std::size_t>(n) * c * ho * wo);
    const auto& x = input.values();
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(n) * c; ++p) {
      const Real* xp = x.data() + p * h * w;
      Real* op = out.data() + p * ho * wo;
      for (int i = 0; i < ho; ++i) {
        for (int j = 0; j < wo; ++j) {
          op[i * wo + j] = (xp[(2 * i) * w + 2 * j] + xp[(2 * i) * w + 2 * j + 1] +
                            xp[(2 * i + 1) * w + 2 * j] + xp[(2 * i + 1) * w + 2 * j + 1]) /
                           Real(4);
        }
      }
    }
    return detail::make_op<Real>(
        {n, c, ho, wo}, std::move(out), {input},
        [in_node, n, c, h, w, ho, wo](detail::TensorNode<Real>& self) {
          if (!in_node->requires_grad) return;
          in_node->ensure_grad();
          for (std::int64_t p = 0; p < static_cast<std::int64_t>(n) * c; ++p) {
            const Real* gp = self.grad.data() + p * ho * wo;
            Real* gx = in_node->grad.data() + p * h * w;
            for (int i = 0; i < ho; ++i) {
              for (int j = 0; j < wo; ++j) {
                const Real g = gp[i * wo + j] / Real(4);
                gx[(2 * i) * w + 2 * j] += g;
                gx[(2 * i) * w + 2 * j + 1] += g;
                gx[(2 * i + 1) * w + 2 * j] += g;
                gx[(2 * i + 1) * w + 2 * j + 1] += g;
              }
            }
          }
        });
  }
  // up2_nearest
  const int ho = h * 2, wo = w * 2;
  std::vector<Real> out(static_cast<std::size_t>(n) * c * ho * wo);
  const auto& x = input.values();
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(n) * c; ++p) {
    const Real* xp = x.data() + p * h * w;
    Real* op = out.data() + p * ho * wo;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const Real v = xp[i * w + j];
        op[(2 * i) * wo + 2 * j] = v;
        op[(2 * i) * wo + 2 * j + 1] = v;
        op[(2 * i + 1) * wo + 2 * j] = v;
        op[(2 * i + 1) * wo + 2 * j + 1] = v;
      }
    }
  }
  return detail::make_op<Real>(
      {n, c, ho, wo}, std::move(out), {input},
      [in_node, n, c, h, w, ho, wo](detail::TensorNode<Real>& self) {
        if (!in_node->requires_grad) return;
        in_node->ensure_grad();
        for (std::int64_t p = 0; p < static_cast<std::int64_t>(n) * c; ++p) {
          const Real* gp = self.grad.data() + p * ho * wo;
          Real* gx = in_node->grad.data() + p * h * w;
          for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
              gx[i * w + j] += gp[(2 * i) * wo + 2 * j] + gp[(2 * i) * wo + 2 * j + 1] +
                               gp[(2 * i + 1) * wo + 2 * j] + gp[(2 * i + 1) * wo + 2 * j + 1];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

// Cross-correlation over NCHW batches; GEMM-backed via im2col.
template <class Real>
Tensor<Real> conv2d(const Tensor<Real>& input, const Tensor<Real>& kernel,
                    const Tensor<Real>& bias, int stride = 1, int padding = 0) {
  const auto& si = input.shape();
  const auto& sk = kernel.shape();
  const auto& sb = bias.shape();
  if (si.size() != 4) throw ShapeError("conv2d: input must be NCHW, got " + detail::shape_str(si));
  if (sk.size() != 4) throw ShapeError("conv2d: kernel must be [Cout,Cin,k,k], got " + detail::shape_str(sk));
  if (sk[2] != sk[3]) throw ShapeError("conv2d: kernel must be square, got " + detail::shape_str(sk));
  if (sk[2] % 2 != 1) throw ShapeError("conv2d: kernel size must be odd, got " + std::to_string(sk[2]));
  if (si[1] != sk[1]) {
    throw ShapeError("conv2d: input channels " + std::to_string(si[1]) +
                     " != kernel channels " + std::to_string(sk[1]));
  }
  if (sb.size() != 1 || sb[0] != sk[0]) {
    throw ShapeError("conv2d: bias shape " + detail::shape_str(sb) + " != [Cout=" +
                     std::to_string(sk[0]) + "]");
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1, got " + std::to_string(stride));
  if (padding < 0) throw ShapeError("conv2d: padding must be >= 0, got " + std::to_string(padding));

  const int n = si[0], cin = si[1], h = si[2], w = si[3];
  const int cout = sk[0], k = sk[2];
  if (h + 2 * padding < k || w + 2 * padding < k) {
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " exceeds padded input " +
                     detail::shape_str(si) + " with padding " + std::to_string(padding));
  }
  const int ho = (h + 2 * padding - k) / stride + 1;
  const int wo = (w + 2 * padding - k) / stride + 1;
  const std::int64_t opix = static_cast<std::int64_t>(ho) * wo;
  const std::int64_t krows = static_cast<std::int64_t>(cin) * k * k;
  const bool direct = (k == 1 && padding == 0 && stride == 1);

  std::vector<Real> out(static_cast<std::size_t>(n) * cout * opix);
  const auto& x = input.values();
  detail::ConstMatMap<Real> wmat(kernel.values().data(), cout, krows);
  std::vector<Real> colbuf;
  if (!direct) colbuf.resize(static_cast<std::size_t>(krows) * opix);
  for (int i = 0; i < n; ++i) {
    const Real* xs = x.data() + static_cast<std::int64_t>(i) * cin * h * w;
    const Real* col = xs;
    if (!direct) {
      detail::im2col(xs, cin, h, w, k, stride, padding, ho, wo, colbuf.data());
      col = colbuf.data();
    }
    detail::ConstMatMap<Real> cmat(col, krows, opix);
    detail::MatMap<Real> ymat(out.data() + static_cast<std::int64_t>(i) * cout * opix, cout, opix);
    ymat.noalias() = wmat * cmat;
  }
  const auto& bv = bias.values();
  for (int i = 0; i < n; ++i) {
    for (int co = 0; co < cout; ++co) {
      Real* yp = out.data() + (static_cast<std::int64_t>(i) * cout + co) * opix;
      const Real b = bv[co];
      for (std::int64_t j = 0; j < opix; ++j) yp[j] += b;
    }
  }

  auto xn = input.node();
  auto kn = kernel.node();
  auto bn = bias.node();
  return detail::make_op<Real>(
      {n, cout, ho, wo}, std::move(out), {input, kernel, bias},
      [xn, kn, bn, n, cin, h, w, cout, k, stride, padding, ho, wo, opix, krows,
       direct](detail::TensorNode<Real>& self) {
        detail::ConstMatMap<Real> wmat(kn->values.data(), cout, krows);
        std::vector<Real> colbuf, dcolbuf;
        if (!direct) {
          if (kn->requires_grad) colbuf.resize(static_cast<std::size_t>(krows) * opix);
          if (xn->requires_grad) dcolbuf.resize(static_cast<std::size_t>(krows) * opix);
        }
        if (kn->requires_grad) kn->ensure_grad();
        if (xn->requires_grad) xn->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        for (int i = 0; i < n; ++i) {
          detail::ConstMatMap<Real> g(self.grad.data() + static_cast<std::int64_t>(i) * cout * opix,
                                      cout, opix);
          if (kn->requires_grad) {
            const Real* xs = xn->values.data() + static_cast<std::int64_t>(i) * cin * h * w;
            const Real* col = xs;
            if (!direct) {
              detail::im2col(xs, cin, h, w, k, stride, padding, ho, wo, colbuf.data());
              col = colbuf.data();
            }
            detail::ConstMatMap<Real> cmat(col, krows, opix);
            detail::MatMap<Real> gw(kn->grad.data(), cout, krows);
            gw.noalias() += g * cmat.transpose();
          }
          if (xn->requires_grad) {
            if (direct) {
              detail::MatMap<Real> gx(xn->grad.data() + static_cast<std::int64_t>(i) * cin * h * w,
                                      krows, opix);
              gx.noalias() += wmat.transpose() * g;
            } else {
              detail::MatMap<Real> gcol(dcolbuf.data(), krows, opix);
              gcol.noalias() = wmat.transpose() * g;
              detail::col2im_accumulate(dcolbuf.data(), cin, h, w, k, stride, padding, ho, wo,
                                        xn->grad.data() + static_cast<std::int64_t>(i) * cin * h * w);
            }
          }
          if (bn->requires_grad) {
            for (int co = 0; co < cout; ++co) {
              double acc = 0.0;
              const Real* gp = self.grad.data() + (static_cast<std::int64_t>(i) * cout + co) * opix;
              for (std::int64_t j = 0; j < opix; ++j) acc += static_cast<double>(gp[j]);
              bn->grad[co] += static_cast<Real>(acc);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean absolute difference; subgradient 0 at ties.
template <class Real>
Tensor<Real> l1_distance(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "l1_distance");
  const auto& av = a.values();
  const auto& bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    acc += std::abs(static_cast<double>(av[i]) - static_cast<double>(bv[i]));
  }
  const auto n = static_cast<double>(av.size());
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<Real>(
      {1}, {static_cast<Real>(acc / n)}, {a, b}, [an, bn, n](detail::TensorNode<Real>& self) {
        const Real g = static_cast<Real>(self.grad[0] / n);
        if (an->requires_grad) an->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        for (std::size_t i = 0; i < an->values.size(); ++i) {
          const Real d = an->values[i] - bn->values[i];
          const Real s = d > Real(0) ? Real(1) : (d < Real(0) ? Real(-1) : Real(0));
          if (an->requires_grad) an->grad[i] += g * s;
          if (bn->requires_grad) bn->grad[i] -= g * s;
        }
      });
}

// Mean binary cross-entropy with internal prediction clamping.
template <class Real>
Tensor<Real> binary_cross_entropy(const Tensor<Real>& pred, const Tensor<Real>& target) {
  detail::check_same_shape(pred.shape(), target.shape(), "binary_cross_entropy");
  const Real eps = Real(1e-7);
  const auto& pv = pred.values();
  const auto& tv = target.values();
  for (std::size_t i = 0; i < tv.size(); ++i) {
    if (tv[i] != Real(0) && tv[i] != Real(1)) {
      throw ValueError("binary_cross_entropy: target value " + std::to_string(tv[i]) +
                       " at index " + std::to_string(i) + " is not in {0,1}");
    }
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    Real p = pv[i];
    if (p < eps) p = eps;
    if (p > Real(1) - eps) p = Real(1) - eps;
    acc -= static_cast<double>(tv[i]) * std::log(static_cast<double>(p)) +
           (1.0 - static_cast<double>(tv[i])) * std::log(1.0 - static_cast<double>(p));
  }
  const auto n = static_cast<double>(pv.size());
  auto pn = pred.node();
  auto tn = target.node();
  return detail::make_op<Real>(
      {1}, {static_cast<Real>(acc / n)}, {pred, target},
      [pn, tn, n, eps](detail::TensorNode<Real>& self) {
        if (!pn->requires_grad) return;
        pn->ensure_grad();
        const Real g = static_cast<Real>(self.grad[0] / n);
        for (std::size_t i = 0; i < pn->values.size(); ++i) {
          const Real p = pn->values[i];
          if (p <= eps || p >= Real(1) - eps) continue;  // clamped: flat region
          const Real y = tn->values[i];
          pn->grad[i] += g * (p - y) / (p * (Real(1) - p));
        }
      });
}

}  // namespace prosfda

#endif  // PROSFDA_OPS_HPP

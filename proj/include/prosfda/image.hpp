// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef PROSFDA_IMAGE_HPP
#define PROSFDA_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "prosfda/common.hpp"

namespace prosfda {

// Dense H x W x C raster, channel index fastest.
template <class Real>
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<Real> data;

  static Image zeros(int h, int w, int c) {
    Image img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.data.assign(static_cast<std::size_t>(h) * w * c, Real(0));
    return img;
  }

  Real& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  Real at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::vector<Real> channel(int c) const {
    std::vector<Real> out(static_cast<std::size_t>(height) * width);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = data[i * channels + c];
    return out;
  }

  void set_channel(int c, const std::vector<Real>& field) {
    for (std::size_t i = 0; i < field.size(); ++i) data[i * channels + c] = field[i];
  }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
};

template <class Real>
void check_same_image_shape(const Image<Real>& a, const Image<Real>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": image shape mismatch " + std::to_string(a.height) +
                     "x" + std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
                     std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                     std::to_string(b.channels));
  }
}

}  // namespace prosfda

#endif  // PROSFDA_IMAGE_HPP

#pragma once

// Bilinear interpolation over [H, W, C] buffers (half-pixel centre convention).
// Shared by image preprocessing and position-table resizing.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "sviptr/tensor.hpp"

namespace sviptr {

template <typename T>
Tensor<T> bilinear_resize_hwc(const Tensor<T>& in, int64_t H0, int64_t W0, int64_t H1,
                              int64_t W1) {
  const int64_t C = in.numel() / (H0 * W0);
  Tensor<T> out({H1, W1, C});
  const T* src = in.data();
  T* dst = out.data();
  const double sy = static_cast<double>(H0) / static_cast<double>(H1);
  const double sx = static_cast<double>(W0) / static_cast<double>(W1);
  for (int64_t y = 0; y < H1; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(fy), H0 - 1);
    const int64_t y1 = std::min<int64_t>(y0 + 1, H0 - 1);
    const double wy = fy - static_cast<double>(y0);
    for (int64_t x = 0; x < W1; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(fx), W0 - 1);
      const int64_t x1 = std::min<int64_t>(x0 + 1, W0 - 1);
      const double wx = fx - static_cast<double>(x0);
      for (int64_t c = 0; c < C; ++c) {
        const double v00 = src[(y0 * W0 + x0) * C + c];
        const double v01 = src[(y0 * W0 + x1) * C + c];
        const double v10 = src[(y1 * W0 + x0) * C + c];
        const double v11 = src[(y1 * W0 + x1) * C + c];
        const double top = v00 + (v01 - v00) * wx;
        const double bot = v10 + (v11 - v10) * wx;
        dst[(y * W1 + x) * C + c] = static_cast<T>(top + (bot - top) * wy);
      }
    }
  }
  return out;
}

}  // namespace sviptr

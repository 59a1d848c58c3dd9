#pragma once

// Image input (binary PGM/PPM), model-input preprocessing, and simple raw
// tensor dumps for debugging and attention-map export.

#include <cstdint>
#include <string>
#include <vector>

#include "sviptr/tensor.hpp"

namespace sviptr {

struct Image {
  int64_t h = 0, w = 0, c = 0;      // c is 1 (grey) or 3 (RGB)
  std::vector<float> pix;           // HWC, values in [0, 1]
};

// Binary PGM (P5) or PPM (P6); maxval up to 65535 (two-byte samples are
// big-endian per the netpbm convention).
Image read_image(const std::string& path);

// Resize to the target height preserving aspect ratio, replicate-pad the
// width up to a multiple of 4, replicate grey to 3 channels, and map values
// to [-1, 1]. Returns [3, H, W].
Tensor<float> to_model_input(const Image& img, int64_t target_height);

// 8-bit binary PGM; values are min-max normalised over the buffer.
void write_pgm_normalized(const std::string& path, const float* data, int64_t h, int64_t w);

// Raw tensor dump: magic "VTEN", u32 ndim, u32 dims..., f32 data, all
// little-endian.
void write_raw_tensor(const std::string& path, const Tensor<float>& t);
Tensor<float> read_raw_tensor(const std::string& path);

}  // namespace sviptr

#pragma once

// Deterministic synthetic text-line images rendered from the built-in 8x8
// glyph font. Every sample is a pure function of (seed, index), so a dataset
// regenerates identically regardless of iteration order.
//
// Rendering: background -1, glyph pixels +1, each glyph scaled by an integer
// factor of 2 or 3 (nearest neighbour), random inter-glyph gaps of 0-3 px,
// vertical centring with +/-2 px jitter, additive Gaussian noise (sigma 0.1),
// clamp to [-1, 1], grey replicated to 3 channels. A layout that does not fit
// the image width is redrawn.

#include <stdexcept>
#include <string>
#include <vector>

#include "sviptr/alphabet.hpp"
#include "sviptr/glyphs.hpp"
#include "sviptr/rng.hpp"
#include "sviptr/tensor.hpp"

namespace sviptr {

template <typename T>
struct SynthDataset {
  std::vector<Tensor<T>> images;          // each [3, H, W]
  std::vector<std::vector<int>> labels;   // CTC class labels (1-based)
  int64_t height = 0, width = 0;

  static SynthDataset generate(const Alphabet& alphabet, int64_t count, int64_t H, int64_t W,
                               uint64_t seed, int max_len = 5) {
    // The generator draws shapes from the font, so every alphabet symbol must
    // be a single character it can render.
    std::vector<int> glyph_of(alphabet.symbols.size());
    for (size_t i = 0; i < alphabet.symbols.size(); ++i) {
      const std::string& s = alphabet.symbols[i];
      const int gi = s.size() == 1 ? glyph_index(s[0]) : -1;
      if (gi < 0)
        throw std::invalid_argument("synthetic data: symbol '" + s +
                                    "' has no glyph (need one of 0-9, a-z)");
      glyph_of[i] = gi;
    }

    SynthDataset ds;
    ds.height = H;
    ds.width = W;
    ds.images.reserve(static_cast<size_t>(count));
    ds.labels.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
      Rng rng(seed, static_cast<uint64_t>(i) + 1);
      std::vector<int> symbol_ids;
      std::vector<int> scales, gaps;
      int64_t start_x = 0;
      // Redraw the whole layout until it fits the width.
      for (int attempt = 0;; ++attempt) {
        if (attempt > 200)
          throw std::runtime_error("synthetic data: cannot fit a sample into width " +
                                   std::to_string(W));
        const int len = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(max_len)));
        symbol_ids.clear();
        scales.clear();
        gaps.clear();
        int64_t total = 0;
        for (int j = 0; j < len; ++j) {
          symbol_ids.push_back(static_cast<int>(rng.below(alphabet.symbols.size())));
          scales.push_back(2 + static_cast<int>(rng.below(2)));
          gaps.push_back(j ? static_cast<int>(rng.below(4)) : 0);
          total += kGlyphSize * scales.back() + gaps.back();
        }
        start_x = 1 + static_cast<int64_t>(rng.below(3));
        if (start_x + total <= W - 1) break;
      }

      Tensor<T> img({3, H, W});
      T* gray = img.data();  // fill channel 0, then replicate
      for (int64_t px = 0; px < H * W; ++px) gray[px] = T(-1);
      int64_t x = start_x;
      std::vector<int> lab;
      for (size_t j = 0; j < symbol_ids.size(); ++j) {
        const int s = scales[j];
        x += gaps[j];
        const GlyphBitmap& bm = glyph_bitmaps()[static_cast<size_t>(
            glyph_of[static_cast<size_t>(symbol_ids[j])])];
        const int64_t gh = kGlyphSize * s;
        int64_t y0 = (H - gh) / 2 + static_cast<int64_t>(rng.below(5)) - 2;
        y0 = std::max<int64_t>(0, std::min<int64_t>(y0, H - gh));
        for (int row = 0; row < kGlyphSize; ++row)
          for (int col = 0; col < kGlyphSize; ++col)
            if (bm[static_cast<size_t>(row)] & (0x80u >> col))
              for (int dy = 0; dy < s; ++dy)
                for (int dx = 0; dx < s; ++dx) {
                  const int64_t yy = y0 + row * s + dy;
                  const int64_t xx = x + col * s + dx;
                  if (yy >= 0 && yy < H && xx >= 0 && xx < W) gray[yy * W + xx] = T(1);
                }
        x += kGlyphSize * s;
        lab.push_back(symbol_ids[j] + 1);
      }
      for (int64_t px = 0; px < H * W; ++px) {
        double v = static_cast<double>(gray[px]) + 0.1 * rng.normal();
        gray[px] = static_cast<T>(std::max(-1.0, std::min(1.0, v)));
      }
      std::copy(gray, gray + H * W, gray + H * W);
      std::copy(gray, gray + H * W, gray + 2 * H * W);
      ds.images.push_back(std::move(img));
      ds.labels.push_back(std::move(lab));
    }
    return ds;
  }

  // Stacks a contiguous index range into one [N, 3, H, W] batch tensor.
  Tensor<T> batch(const std::vector<int64_t>& idx) const {
    const int64_t n = static_cast<int64_t>(idx.size());
    Tensor<T> out({n, 3, height, width});
    const int64_t stride = 3 * height * width;
    for (int64_t i = 0; i < n; ++i)
      std::copy(images[static_cast<size_t>(idx[static_cast<size_t>(i)])].data(),
                images[static_cast<size_t>(idx[static_cast<size_t>(i)])].data() + stride,
                out.data() + i * stride);
    return out;
  }
};

}  // namespace sviptr

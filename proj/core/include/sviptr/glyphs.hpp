#pragma once

// 8x8 bitmap font for the synthetic training data: digits 0-9 followed by
// lowercase a-z. Bit 7 of each row byte is the leftmost pixel.

#include <array>
#include <cstdint>

namespace sviptr {

constexpr int kGlyphCount = 36;
constexpr int kGlyphSize = 8;

using GlyphBitmap = std::array<uint8_t, kGlyphSize>;

const std::array<GlyphBitmap, kGlyphCount>& glyph_bitmaps();

// Index into glyph_bitmaps() for '0'-'9' and 'a'-'z'; -1 otherwise.
int glyph_index(char c);

}  // namespace sviptr

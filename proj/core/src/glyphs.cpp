#include "sviptr/glyphs.hpp"

namespace sviptr {

namespace {

// Hand-drawn 8x8 glyphs, one byte per row, bit 7 = leftmost pixel. Shapes are
// chosen so commonly confused pairs (0/o, 1/l/i, 9/g, m/w) stay distinct.
constexpr std::array<GlyphBitmap, kGlyphCount> kGlyphs = {{
    {0x3C, 0x66, 0x6E, 0x76, 0x66, 0x66, 0x3C, 0x00},  // 0
    {0x18, 0x38, 0x18, 0x18, 0x18, 0x18, 0x7E, 0x00},  // 1
    {0x3C, 0x66, 0x06, 0x0C, 0x18, 0x30, 0x7E, 0x00},  // 2
    {0x3C, 0x66, 0x06, 0x1C, 0x06, 0x66, 0x3C, 0x00},  // 3
    {0x0C, 0x1C, 0x2C, 0x4C, 0x7E, 0x0C, 0x0C, 0x00},  // 4
    {0x7E, 0x60, 0x7C, 0x06, 0x06, 0x66, 0x3C, 0x00},  // 5
    {0x1C, 0x30, 0x60, 0x7C, 0x66, 0x66, 0x3C, 0x00},  // 6
    {0x7E, 0x06, 0x0C, 0x18, 0x30, 0x30, 0x30, 0x00},  // 7
    {0x3C, 0x66, 0x66, 0x3C, 0x66, 0x66, 0x3C, 0x00},  // 8
    {0x3C, 0x66, 0x66, 0x3E, 0x06, 0x0C, 0x38, 0x00},  // 9
    {0x00, 0x00, 0x3C, 0x06, 0x3E, 0x66, 0x3E, 0x00},  // a
    {0x60, 0x60, 0x7C, 0x66, 0x66, 0x66, 0x7C, 0x00},  // b
    {0x00, 0x00, 0x3C, 0x66, 0x60, 0x66, 0x3C, 0x00},  // c
    {0x06, 0x06, 0x3E, 0x66, 0x66, 0x66, 0x3E, 0x00},  // d
    {0x00, 0x00, 0x3C, 0x66, 0x7E, 0x60, 0x3C, 0x00},  // e
    {0x0E, 0x18, 0x3E, 0x18, 0x18, 0x18, 0x18, 0x00},  // f
    {0x00, 0x00, 0x3E, 0x66, 0x66, 0x3E, 0x06, 0x3C},  // g
    {0x60, 0x60, 0x7C, 0x66, 0x66, 0x66, 0x66, 0x00},  // h
    {0x18, 0x00, 0x38, 0x18, 0x18, 0x18, 0x3C, 0x00},  // i
    {0x0C, 0x00, 0x1C, 0x0C, 0x0C, 0x0C, 0x6C, 0x38},  // j
    {0x60, 0x60, 0x66, 0x6C, 0x78, 0x6C, 0x66, 0x00},  // k
    {0x38, 0x18, 0x18, 0x18, 0x18, 0x18, 0x3C, 0x00},  // l
    {0x00, 0x00, 0x6C, 0x7E, 0x6A, 0x6A, 0x6A, 0x00},  // m
    {0x00, 0x00, 0x7C, 0x66, 0x66, 0x66, 0x66, 0x00},  // n
    {0x00, 0x00, 0x3C, 0x66, 0x66, 0x66, 0x3C, 0x00},  // o
    {0x00, 0x00, 0x7C, 0x66, 0x66, 0x7C, 0x60, 0x60},  // p
    {0x00, 0x00, 0x3E, 0x66, 0x66, 0x3E, 0x06, 0x07},  // q
    {0x00, 0x00, 0x6E, 0x70, 0x60, 0x60, 0x60, 0x00},  // r
    {0x00, 0x00, 0x3E, 0x60, 0x3C, 0x06, 0x7C, 0x00},  // s
    {0x18, 0x18, 0x7E, 0x18, 0x18, 0x1A, 0x0C, 0x00},  // t
    {0x00, 0x00, 0x66, 0x66, 0x66, 0x66, 0x3E, 0x00},  // u
    {0x00, 0x00, 0x66, 0x66, 0x66, 0x3C, 0x18, 0x00},  // v
    {0x00, 0x00, 0x6A, 0x6A, 0x6A, 0x7E, 0x34, 0x00},  // w
    {0x00, 0x00, 0x66, 0x3C, 0x18, 0x3C, 0x66, 0x00},  // x
    {0x00, 0x00, 0x66, 0x66, 0x66, 0x3E, 0x06, 0x3C},  // y
    {0x00, 0x00, 0x7E, 0x0C, 0x18, 0x30, 0x7E, 0x00},  // z
}};

}  // namespace

const std::array<GlyphBitmap, kGlyphCount>& glyph_bitmaps() { return kGlyphs; }

int glyph_index(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'z') return 10 + (c - 'a');
  return -1;
}

}  // namespace sviptr

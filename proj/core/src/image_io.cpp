#include "sviptr/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "sviptr/interp.hpp"

namespace sviptr {

namespace {

// Reads the next whitespace/comment-separated token of a netpbm header.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok += static_cast<char>(ch);
  }
  if (tok.empty()) throw std::runtime_error("image: truncated netpbm header");
  return tok;
}

int64_t parse_dim(const std::string& tok, const char* what) {
  try {
    const long long v = std::stoll(tok);
    if (v <= 0) throw std::out_of_range(what);
    return v;
  } catch (...) {
    throw std::runtime_error(std::string("image: bad ") + what + " '" + tok + "'");
  }
}

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("tensor file: truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("image: cannot open " + path);
  const std::string magic = next_token(in);
  int64_t channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw std::runtime_error("image: unsupported format '" + magic + "' in " + path +
                             " (need binary PGM 'P5' or PPM 'P6')");
  const int64_t w = parse_dim(next_token(in), "width");
  const int64_t h = parse_dim(next_token(in), "height");
  const int64_t maxval = parse_dim(next_token(in), "maxval");
  if (maxval > 65535) throw std::runtime_error("image: maxval too large in " + path);
  // The header ends with exactly one whitespace byte, already consumed by the
  // tokenizer.
  const int bytes_per = maxval > 255 ? 2 : 1;
  const int64_t count = w * h * channels;
  std::vector<unsigned char> raw(static_cast<size_t>(count * bytes_per));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("image: truncated pixel data in " + path);

  Image img;
  img.h = h;
  img.w = w;
  img.c = channels;
  img.pix.resize(static_cast<size_t>(count));
  const float scale = 1.0f / static_cast<float>(maxval);
  for (int64_t i = 0; i < count; ++i) {
    uint32_t v;
    if (bytes_per == 1)
      v = raw[static_cast<size_t>(i)];
    else  // big-endian sample
      v = (static_cast<uint32_t>(raw[static_cast<size_t>(2 * i)]) << 8) |
          raw[static_cast<size_t>(2 * i + 1)];
    img.pix[static_cast<size_t>(i)] = static_cast<float>(v) * scale;
  }
  return img;
}

Tensor<float> to_model_input(const Image& img, int64_t target_height) {
  if (img.h <= 0 || img.w <= 0) throw std::invalid_argument("image: empty input");
  const int64_t target_w =
      std::max<int64_t>(1, static_cast<int64_t>(std::lround(
                               static_cast<double>(img.w) * static_cast<double>(target_height) /
                               static_cast<double>(img.h))));
  Tensor<float> hwc({img.h, img.w, img.c});
  std::copy(img.pix.begin(), img.pix.end(), hwc.data());
  Tensor<float> resized = bilinear_resize_hwc(hwc, img.h, img.w, target_height, target_w);
  const int64_t padded_w = (target_w + 3) / 4 * 4;

  Tensor<float> out({3, target_height, padded_w});
  for (int64_t ch = 0; ch < 3; ++ch) {
    const int64_t src_ch = img.c == 3 ? ch : 0;
    for (int64_t y = 0; y < target_height; ++y)
      for (int64_t x = 0; x < padded_w; ++x) {
        const int64_t sx = std::min(x, target_w - 1);  // replicate right edge
        const float v = resized[(y * target_w + sx) * img.c + src_ch];
        out[(ch * target_height + y) * padded_w + x] = 2.0f * v - 1.0f;
      }
  }
  return out;
}

void write_pgm_normalized(const std::string& path, const float* data, int64_t h, int64_t w) {
  float lo = data[0], hi = data[0];
  for (int64_t i = 0; i < h * w; ++i) {
    lo = std::min(lo, data[i]);
    hi = std::max(hi, data[i]);
  }
  const float span = hi - lo;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("image: cannot write " + path);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(w));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const float v = span > 0 ? (data[y * w + x] - lo) / span : 0.0f;
      row[static_cast<size_t>(x)] =
          static_cast<unsigned char>(std::lround(255.0f * std::clamp(v, 0.0f, 1.0f)));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(w));
  }
  if (!out) throw std::runtime_error("image: write failed for " + path);
}

void write_raw_tensor(const std::string& path, const Tensor<float>& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("tensor file: cannot write " + path);
  out.write("VTEN", 4);
  put_u32(out, static_cast<uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) put_u32(out, static_cast<uint32_t>(t.dim(i)));
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * 4));
  if (!out) throw std::runtime_error("tensor file: write failed for " + path);
}

Tensor<float> read_raw_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("tensor file: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VTEN", 4) != 0)
    throw std::runtime_error("tensor file: bad magic in " + path);
  const uint32_t nd = get_u32(in);
  if (nd > 8) throw std::runtime_error("tensor file: too many dimensions in " + path);
  Shape shape(nd);
  for (uint32_t i = 0; i < nd; ++i) shape[i] = get_u32(in);
  Tensor<float> t(shape);
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 4));
  if (!in) throw std::runtime_error("tensor file: truncated data in " + path);
  return t;
}

}  // namespace sviptr

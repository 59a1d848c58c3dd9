#pragma once

// Token-mixing mechanisms and transformer blocks.
//
// The residual stream is a [B, L, C] sequence with L = H*W tokens in row-major
// grid order (token = h*W + w). Convolutions run in NCHW; the helpers below
// move between the two layouts. Four mixers are provided:
//
//   CSWin  - local: cross-shaped windows; half the heads attend within
//            horizontal stripes (sw rows x W), the rest within vertical
//            stripes (H x sw cols). V gets a zero-initialised depthwise 3x3
//            positional term (LePE) when the model uses LePE.
//   DMaSA  - local: decomposed Manhattan self-attention. One width pass and
//            one height pass per head, each softmax(QK^T/sqrt(d)) multiplied
//            elementwise by a fixed per-head distance decay gamma^|i-j|
//            (no renormalisation), plus a depthwise 3x3 local term on V.
//   MHSA   - global: vanilla multi-head self-attention over all tokens.
//   OSRA   - global: spatial-reduction attention. K/V come from a stride-sr
//            depthwise conv summary of the grid (kernel 2*sr-1, pad sr-1)
//            followed by layer norm; Q stays at full resolution.
//
// Blocks are pre-norm: x + Mix(LN(x)), then x + FFN(LN(x)) with a 4x MLP.
// A parallel block splits channels in half, runs a local mixer on the first
// half and a global mixer on the second, concatenates, and shares one FFN.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sviptr/autograd.hpp"
#include "sviptr/ops.hpp"
#include "sviptr/rng.hpp"
#include "sviptr/tensor.hpp"

namespace sviptr {

enum class AttnKind { CSWin, DMaSA, MHSA, OSRA };
enum class PeKind { None, APE, CPE, LePE };

inline const char* attn_kind_name(AttnKind k) {
  switch (k) {
    case AttnKind::CSWin: return "cswin";
    case AttnKind::DMaSA: return "dmasa";
    case AttnKind::MHSA: return "mhsa";
    case AttnKind::OSRA: return "osra";
  }
  return "?";
}

inline const char* pe_kind_name(PeKind k) {
  switch (k) {
    case PeKind::None: return "none";
    case PeKind::APE: return "ape";
    case PeKind::CPE: return "cpe";
    case PeKind::LePE: return "lepe";
  }
  return "?";
}

// Where a mixer can report its attention pattern: per-head mass received by
// each key position, averaged over queries, for batch item 0. Grid-shaped
// [heads, H, W]; mechanisms that attend on a reduced grid upsample to the
// token grid.
template <typename T>
struct AttnProbe {
  Tensor<T> received;
};

// ------------------------------------------------------------ small modules

template <typename T>
struct LinearP {
  Var<T> w, b;

  static LinearP make(ParamStore<T>& ps, const std::string& prefix, int64_t out, int64_t in,
                      Rng& rng) {
    Tensor<T> wv({out, in});
    for (int64_t i = 0; i < wv.numel(); ++i) wv[i] = static_cast<T>(rng.trunc_normal(0.02));
    LinearP lp;
    lp.w = ps.add(prefix + ".weight", std::move(wv));
    lp.b = ps.add(prefix + ".bias", Tensor<T>({out}));
    return lp;
  }

  Var<T> forward(Graph<T>& g, Var<T> x) const { return ops::linear(g, x, w, b); }
};

// Depthwise 3x3, stride 1, pad 1 (NCHW in/out). Positional variants start at
// zero so they contribute nothing until trained.
template <typename T>
struct DwConvP {
  Var<T> w, b;

  static DwConvP make(ParamStore<T>& ps, const std::string& prefix, int64_t C, Rng& rng,
                      bool zero_init) {
    Tensor<T> wv({C, 1, 3, 3});
    if (!zero_init)
      for (int64_t i = 0; i < wv.numel(); ++i) wv[i] = static_cast<T>(rng.trunc_normal(0.02));
    DwConvP dc;
    dc.w = ps.add(prefix + ".weight", std::move(wv));
    dc.b = ps.add(prefix + ".bias", Tensor<T>({C}));
    return dc;
  }

  Var<T> forward(Graph<T>& g, Var<T> x_nchw) const {
    ops::ConvSpec cs;
    cs.ph = cs.pw = 1;
    cs.groups = static_cast<int>(x_nchw->value.dim(1));
    return ops::conv2d(g, x_nchw, w, b, cs);
  }
};

template <typename T>
struct LayerNormP {
  Var<T> gamma, beta;

  static LayerNormP make(ParamStore<T>& ps, const std::string& prefix, int64_t C) {
    LayerNormP ln;
    ln.gamma = ps.add(prefix + ".gamma", Tensor<T>::full({C}, T(1)));
    ln.beta = ps.add(prefix + ".beta", Tensor<T>({C}));
    return ln;
  }

  Var<T> forward(Graph<T>& g, Var<T> x) const {
    return ops::layer_norm_lastdim(g, x, gamma, beta);
  }
};

template <typename T>
struct FfnP {
  LinearP<T> fc1, fc2;

  static FfnP make(ParamStore<T>& ps, const std::string& prefix, int64_t C, int64_t ratio,
                   Rng& rng) {
    FfnP f;
    f.fc1 = LinearP<T>::make(ps, prefix + ".fc1", C * ratio, C, rng);
    f.fc2 = LinearP<T>::make(ps, prefix + ".fc2", C, C * ratio, rng);
    return f;
  }

  Var<T> forward(Graph<T>& g, Var<T> x) const {
    return fc2.forward(g, ops::gelu(g, fc1.forward(g, x)));
  }
};

// ------------------------------------------------------------ layout helpers

template <typename T>
Var<T> seq_to_nchw(Graph<T>& g, Var<T> x, int64_t B, int64_t H, int64_t W, int64_t C) {
  auto grid = ops::reshape(g, x, {B, H, W, C});
  return ops::permute(g, grid, {0, 3, 1, 2});
}

template <typename T>
Var<T> nchw_to_seq(Graph<T>& g, Var<T> x) {
  const int64_t B = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2),
                W = x->value.dim(3);
  auto grid = ops::permute(g, x, {0, 2, 3, 1});
  return ops::reshape(g, grid, {B, H * W, C});
}

// [B, L, C] -> [B*heads, L, dh]
template <typename T>
Var<T> split_heads(Graph<T>& g, Var<T> x, int64_t B, int64_t L, int64_t heads, int64_t dh) {
  auto r = ops::reshape(g, x, {B, L, heads, dh});
  auto p = ops::permute(g, r, {0, 2, 1, 3});
  return ops::reshape(g, p, {B * heads, L, dh});
}

template <typename T>
Var<T> merge_heads(Graph<T>& g, Var<T> x, int64_t B, int64_t L, int64_t heads, int64_t dh) {
  auto r = ops::reshape(g, x, {B, heads, L, dh});
  auto p = ops::permute(g, r, {0, 2, 1, 3});
  return ops::reshape(g, p, {B, L, heads * dh});
}

// -------------------------------------------------------------------- probes

// Mean-over-queries column mass of an attention matrix block.
template <typename T>
inline void accumulate_received(const Tensor<T>& att, int64_t group, std::vector<T>& out) {
  const int64_t Q = att.dim(1), K = att.dim(2);
  const T* p = att.data() + group * Q * K;
  for (int64_t k = 0; k < K; ++k) {
    T s = T(0);
    for (int64_t q = 0; q < Q; ++q) s += p[q * K + k];
    out[static_cast<size_t>(k)] = s / static_cast<T>(Q);
  }
}

// --------------------------------------------------------------------- MHSA

template <typename T>
struct MhsaAttn {
  int64_t dim = 0, heads = 0;
  LinearP<T> qkv, out;
  std::optional<DwConvP<T>> lepe;

  static MhsaAttn make(ParamStore<T>& ps, const std::string& prefix, int64_t dim, int64_t heads,
                       PeKind pe, Rng& rng) {
    MhsaAttn a;
    a.dim = dim;
    a.heads = heads;
    a.qkv = LinearP<T>::make(ps, prefix + ".qkv", 3 * dim, dim, rng);
    a.out = LinearP<T>::make(ps, prefix + ".out", dim, dim, rng);
    if (pe == PeKind::LePE) a.lepe = DwConvP<T>::make(ps, prefix + ".lepe", dim, rng, true);
    return a;
  }

  Var<T> forward(Graph<T>& g, Var<T> x, int64_t B, int64_t H, int64_t W,
                 AttnProbe<T>* probe = nullptr) const {
    const int64_t L = H * W, dh = dim / heads;
    auto qkv3 = qkv.forward(g, x);
    auto q = ops::narrow(g, qkv3, 2, 0, dim);
    auto k = ops::narrow(g, qkv3, 2, dim, dim);
    auto v = ops::narrow(g, qkv3, 2, 2 * dim, dim);
    auto qh = split_heads(g, q, B, L, heads, dh);
    auto kh = split_heads(g, k, B, L, heads, dh);
    auto vh = split_heads(g, v, B, L, heads, dh);
    auto att = ops::softmax_lastdim(
        g, ops::scale(g, ops::bmm(g, qh, kh, true), static_cast<T>(1.0 / std::sqrt(double(dh)))));
    if (probe) {
      probe->received = Tensor<T>({heads, H, W});
      std::vector<T> col(static_cast<size_t>(L));
      for (int64_t hd = 0; hd < heads; ++hd) {
        accumulate_received(att->value, hd, col);  // batch 0 groups are 0..heads-1
        std::copy(col.begin(), col.end(), probe->received.data() + hd * L);
      }
    }
    auto ctx = merge_heads(g, ops::bmm(g, att, vh), B, L, heads, dh);
    if (lepe) {
      auto pl = nchw_to_seq(g, lepe->forward(g, seq_to_nchw(g, v, B, H, W, dim)));
      ctx = ops::add(g, ctx, pl);
    }
    return out.forward(g, ctx);
  }
};

// -------------------------------------------------------------------- CSWin

template <typename T>
struct CSWinAttn {
  int64_t dim = 0, heads = 0;
  int stripe = 1;  // requested stripe width; clamped to 1 if it does not divide
  LinearP<T> qkv, out;
  std::optional<DwConvP<T>> lepe;

  static CSWinAttn make(ParamStore<T>& ps, const std::string& prefix, int64_t dim, int64_t heads,
                        int stripe, PeKind pe, Rng& rng) {
    CSWinAttn a;
    a.dim = dim;
    a.heads = heads;
    a.stripe = stripe;
    a.qkv = LinearP<T>::make(ps, prefix + ".qkv", 3 * dim, dim, rng);
    a.out = LinearP<T>::make(ps, prefix + ".out", dim, dim, rng);
    if (pe == PeKind::LePE) a.lepe = DwConvP<T>::make(ps, prefix + ".lepe", dim, rng, true);
    return a;
  }

  Var<T> forward(Graph<T>& g, Var<T> x, int64_t B, int64_t H, int64_t W,
                 AttnProbe<T>* probe = nullptr) const {
    const int64_t L = H * W, dh = dim / heads;
    const int64_t nh_h = heads / 2;       // horizontal-stripe heads
    const int64_t nh_v = heads - nh_h;    // vertical-stripe heads
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(double(dh)));
    auto qkv3 = qkv.forward(g, x);
    auto q = ops::narrow(g, qkv3, 2, 0, dim);
    auto k = ops::narrow(g, qkv3, 2, dim, dim);
    auto v = ops::narrow(g, qkv3, 2, 2 * dim, dim);

    if (probe) probe->received = Tensor<T>({heads, H, W});

    std::vector<Var<T>> parts;
    if (nh_h > 0) {
      // Stripes of full rows. Fall back to single-row stripes when the height
      // is not a multiple of the configured stripe width.
      const int64_t sw = (H % stripe == 0) ? stripe : 1;
      const int64_t S = H / sw, Ch = nh_h * dh, Ls = sw * W;
      auto group = [&](Var<T> t) {
        auto a = ops::narrow(g, t, 2, 0, Ch);
        auto r = ops::reshape(g, a, {B, S, sw, W, nh_h, dh});
        auto p = ops::permute(g, r, {0, 1, 4, 2, 3, 5});
        return ops::reshape(g, p, {B * S * nh_h, Ls, dh});
      };
      auto att = ops::softmax_lastdim(
          g, ops::scale(g, ops::bmm(g, group(q), group(k), true), inv_sqrt));
      if (probe) {
        std::vector<T> col(static_cast<size_t>(Ls));
        for (int64_t hd = 0; hd < nh_h; ++hd)
          for (int64_t s = 0; s < S; ++s) {
            accumulate_received(att->value, s * nh_h + hd, col);
            for (int64_t r = 0; r < sw; ++r)
              for (int64_t w = 0; w < W; ++w)
                probe->received[(hd * H + s * sw + r) * W + w] =
                    col[static_cast<size_t>(r * W + w)];
          }
      }
      auto o = ops::bmm(g, att, group(v));
      auto r = ops::reshape(g, o, {B, S, nh_h, sw, W, dh});
      auto p = ops::permute(g, r, {0, 1, 3, 4, 2, 5});
      parts.push_back(ops::reshape(g, p, {B, L, Ch}));
    }
    if (nh_v > 0) {
      const int64_t sw = (W % stripe == 0) ? stripe : 1;
      const int64_t S = W / sw, Cv = nh_v * dh, Ls = H * sw;
      auto group = [&](Var<T> t) {
        auto a = ops::narrow(g, t, 2, nh_h * dh, Cv);
        auto r = ops::reshape(g, a, {B, H, S, sw, nh_v, dh});
        auto p = ops::permute(g, r, {0, 2, 4, 1, 3, 5});
        return ops::reshape(g, p, {B * S * nh_v, Ls, dh});
      };
      auto att = ops::softmax_lastdim(
          g, ops::scale(g, ops::bmm(g, group(q), group(k), true), inv_sqrt));
      if (probe) {
        std::vector<T> col(static_cast<size_t>(Ls));
        for (int64_t hd = 0; hd < nh_v; ++hd)
          for (int64_t s = 0; s < S; ++s) {
            accumulate_received(att->value, s * nh_v + hd, col);
            for (int64_t h = 0; h < H; ++h)
              for (int64_t c = 0; c < sw; ++c)
                probe->received[((nh_h + hd) * H + h) * W + s * sw + c] =
                    col[static_cast<size_t>(h * sw + c)];
          }
      }
      auto o = ops::bmm(g, att, group(v));
      auto r = ops::reshape(g, o, {B, S, nh_v, H, sw, dh});
      auto p = ops::permute(g, r, {0, 3, 1, 4, 2, 5});
      parts.push_back(ops::reshape(g, p, {B, L, Cv}));
    }
    auto ctx = parts.size() == 1 ? parts[0] : ops::concat(g, parts, 2);
    if (lepe) {
      auto pl = nchw_to_seq(g, lepe->forward(g, seq_to_nchw(g, v, B, H, W, dim)));
      ctx = ops::add(g, ctx, pl);
    }
    return out.forward(g, ctx);
  }
};

// -------------------------------------------------------------------- DMaSA

inline double masa_gamma(int64_t head) {
  const double gamma = 1.0 - std::pow(2.0, -(4.0 + static_cast<double>(head)));
  return std::min(0.999, std::max(0.5, gamma));
}

template <typename T>
inline Tensor<T> decay_mask(int64_t n, double gamma) {
  Tensor<T> m({n, n});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      m[i * n + j] = static_cast<T>(std::pow(gamma, std::abs(double(i - j))));
  return m;
}

template <typename T>
struct DMaSAAttn {
  int64_t dim = 0, heads = 0;
  LinearP<T> q, k, v, out;
  DwConvP<T> local;

  static DMaSAAttn make(ParamStore<T>& ps, const std::string& prefix, int64_t dim, int64_t heads,
                        Rng& rng) {
    DMaSAAttn a;
    a.dim = dim;
    a.heads = heads;
    a.q = LinearP<T>::make(ps, prefix + ".q", dim, dim, rng);
    a.k = LinearP<T>::make(ps, prefix + ".k", dim, dim, rng);
    a.v = LinearP<T>::make(ps, prefix + ".v", dim, dim, rng);
    a.out = LinearP<T>::make(ps, prefix + ".out", dim, dim, rng);
    a.local = DwConvP<T>::make(ps, prefix + ".local", dim, rng, false);
    return a;
  }

  Var<T> forward(Graph<T>& g, Var<T> x, int64_t B, int64_t H, int64_t W,
                 AttnProbe<T>* probe = nullptr) const {
    const int64_t L = H * W, dh = dim / heads;
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(double(dh)));
    auto qs = q.forward(g, x);
    auto ks = k.forward(g, x);
    auto vs = v.forward(g, x);
    // [B, heads, H, W, dh]
    auto to_grid = [&](Var<T> t) {
      return ops::permute(g, ops::reshape(g, t, {B, H, W, heads, dh}), {0, 3, 1, 2, 4});
    };
    auto qg = to_grid(qs), kg = to_grid(ks), vg = to_grid(vs);
    if (probe) probe->received = Tensor<T>({heads, H, W});

    std::vector<Var<T>> head_outs;
    for (int64_t hd = 0; hd < heads; ++hd) {
      const double gamma = masa_gamma(hd);
      auto rows = [&](Var<T> t) {  // [B*H, W, dh]
        return ops::reshape(g, ops::narrow(g, t, 1, hd, 1), {B * H, W, dh});
      };
      auto to_cols = [&](Var<T> t) {  // [B*H, W, dh] -> [B*W, H, dh]
        auto r = ops::reshape(g, t, {B, H, W, dh});
        return ops::reshape(g, ops::permute(g, r, {0, 2, 1, 3}), {B * W, H, dh});
      };
      auto qr = rows(qg), kr = rows(kg), vr = rows(vg);
      // Width pass over each row.
      auto aw = ops::mul_const_bcast(
          g,
          ops::softmax_lastdim(g, ops::scale(g, ops::bmm(g, qr, kr, true), inv_sqrt)),
          decay_mask<T>(W, gamma));
      auto inter = ops::bmm(g, aw, vr);
      // Height pass over each column of the intermediate.
      auto ah = ops::mul_const_bcast(
          g,
          ops::softmax_lastdim(g,
                               ops::scale(g, ops::bmm(g, to_cols(qr), to_cols(kr), true),
                                          inv_sqrt)),
          decay_mask<T>(H, gamma));
      auto oc = ops::bmm(g, ah, to_cols(inter));
      if (probe) {
        // Effective mass from query (h,w) to key (h',w') is
        // Ah[col w](h,h') * Aw[row h'](w,w'); average over queries.
        const Tensor<T>& AW = aw->value;  // [B*H, W, W], batch 0 rows are 0..H-1
        const Tensor<T>& AH = ah->value;  // [B*W, H, H], batch 0 cols are 0..W-1
        std::vector<T> S(static_cast<size_t>(H * W), T(0));  // S[h', w] = sum_h Ah[w](h,h')
        for (int64_t w = 0; w < W; ++w)
          for (int64_t h = 0; h < H; ++h)
            for (int64_t hp = 0; hp < H; ++hp)
              S[static_cast<size_t>(hp * W + w)] += AH[(w * H + h) * H + hp];
        for (int64_t hp = 0; hp < H; ++hp)
          for (int64_t wp = 0; wp < W; ++wp) {
            T acc = T(0);
            for (int64_t w = 0; w < W; ++w)
              acc += S[static_cast<size_t>(hp * W + w)] * AW[(hp * W + w) * W + wp];
            probe->received[(hd * H + hp) * W + wp] = acc / static_cast<T>(H * W);
          }
      }
      // [B*W, H, dh] -> [B, L, dh]
      auto back = ops::reshape(
          g, ops::permute(g, ops::reshape(g, oc, {B, W, H, dh}), {0, 2, 1, 3}), {B, L, dh});
      head_outs.push_back(back);
    }
    auto ctx = head_outs.size() == 1 ? head_outs[0] : ops::concat(g, head_outs, 2);
    auto lc = nchw_to_seq(g, local.forward(g, seq_to_nchw(g, vs, B, H, W, dim)));
    return out.forward(g, ops::add(g, ctx, lc));
  }
};

// --------------------------------------------------------------------- OSRA

template <typename T>
struct OsraAttn {
  int64_t dim = 0, heads = 0;
  int sr = 2;
  LinearP<T> q, kv, out;
  Var<T> red_w, red_b;  // depthwise reduction conv, kernel 2*sr-1, stride sr
  LayerNormP<T> red_ln;

  static OsraAttn make(ParamStore<T>& ps, const std::string& prefix, int64_t dim, int64_t heads,
                       int sr, Rng& rng) {
    OsraAttn a;
    a.dim = dim;
    a.heads = heads;
    a.sr = sr;
    a.q = LinearP<T>::make(ps, prefix + ".q", dim, dim, rng);
    a.kv = LinearP<T>::make(ps, prefix + ".kv", 2 * dim, dim, rng);
    a.out = LinearP<T>::make(ps, prefix + ".out", dim, dim, rng);
    const int k = 2 * sr - 1;
    Tensor<T> wv({dim, 1, k, k});
    for (int64_t i = 0; i < wv.numel(); ++i) wv[i] = static_cast<T>(rng.trunc_normal(0.02));
    a.red_w = ps.add(prefix + ".red.weight", std::move(wv));
    a.red_b = ps.add(prefix + ".red.bias", Tensor<T>({dim}));
    a.red_ln = LayerNormP<T>::make(ps, prefix + ".red_ln", dim);
    return a;
  }

  Var<T> forward(Graph<T>& g, Var<T> x, int64_t B, int64_t H, int64_t W,
                 AttnProbe<T>* probe = nullptr) const {
    const int64_t L = H * W, dh = dim / heads;
    auto qh = split_heads(g, q.forward(g, x), B, L, heads, dh);
    ops::ConvSpec cs;
    cs.sh = cs.sw = sr;
    cs.ph = cs.pw = sr - 1;
    cs.groups = static_cast<int>(dim);
    auto red = ops::conv2d(g, seq_to_nchw(g, x, B, H, W, dim), red_w, red_b, cs);
    const int64_t Hr = red->value.dim(2), Wr = red->value.dim(3), Lr = Hr * Wr;
    auto rtok = red_ln.forward(g, nchw_to_seq(g, red));
    auto kv2 = kv.forward(g, rtok);
    auto kh = split_heads(g, ops::narrow(g, kv2, 2, 0, dim), B, Lr, heads, dh);
    auto vh = split_heads(g, ops::narrow(g, kv2, 2, dim, dim), B, Lr, heads, dh);
    auto att = ops::softmax_lastdim(
        g, ops::scale(g, ops::bmm(g, qh, kh, true), static_cast<T>(1.0 / std::sqrt(double(dh)))));
    if (probe) {
      probe->received = Tensor<T>({heads, H, W});
      std::vector<T> col(static_cast<size_t>(Lr));
      for (int64_t hd = 0; hd < heads; ++hd) {
        accumulate_received(att->value, hd, col);
        // nearest-neighbour upsample from the reduced grid to the token grid
        for (int64_t h = 0; h < H; ++h)
          for (int64_t w = 0; w < W; ++w) {
            const int64_t hr = std::min(h / sr, Hr - 1), wr = std::min(w / sr, Wr - 1);
            probe->received[(hd * H + h) * W + w] = col[static_cast<size_t>(hr * Wr + wr)];
          }
      }
    }
    auto ctx = merge_heads(g, ops::bmm(g, att, vh), B, L, heads, dh);
    return out.forward(g, ctx);
  }
};

// ------------------------------------------------------------------- blocks

template <typename T>
using AnyAttn = std::variant<CSWinAttn<T>, DMaSAAttn<T>, MhsaAttn<T>, OsraAttn<T>>;

template <typename T>
inline Var<T> attn_forward(const AnyAttn<T>& a, Graph<T>& g, Var<T> x, int64_t B, int64_t H,
                           int64_t W, AttnProbe<T>* probe = nullptr) {
  return std::visit([&](const auto& m) { return m.forward(g, x, B, H, W, probe); }, a);
}

// Builds a mixer of the given kind under `prefix`.
template <typename T>
AnyAttn<T> make_attn(ParamStore<T>& ps, const std::string& prefix, AttnKind kind, int64_t dim,
                     int64_t heads, int stripe, int sr, PeKind pe, Rng& rng) {
  switch (kind) {
    case AttnKind::CSWin:
      return CSWinAttn<T>::make(ps, prefix, dim, heads, stripe, pe, rng);
    case AttnKind::DMaSA:
      return DMaSAAttn<T>::make(ps, prefix, dim, heads, rng);
    case AttnKind::MHSA:
      return MhsaAttn<T>::make(ps, prefix, dim, heads, pe, rng);
    case AttnKind::OSRA:
      return OsraAttn<T>::make(ps, prefix, dim, heads, sr, rng);
  }
  throw std::logic_error("make_attn: bad kind");
}

// Probe bundle for one block: one map per mixer it contains.
template <typename T>
struct BlockProbe {
  std::string name;                                        // e.g. "stage2.block1.local"
  Tensor<T> received;                                      // [heads, H, W]
};

template <typename T>
struct Block {
  int64_t dim = 0;
  std::optional<DwConvP<T>> cpe;             // conv positional term at block entry
  LayerNormP<T> ln1;
  std::vector<AnyAttn<T>> mixers;            // 1 = series, 2 = parallel (local, global)
  std::optional<LayerNormP<T>> ln2;          // absent => attention-only block
  std::optional<FfnP<T>> ffn;
  std::string name;

  // Series block (one mixer; with_ffn=false gives the attention-only form).
  static Block make_series(ParamStore<T>& ps, const std::string& prefix, AttnKind kind,
                           int64_t dim, int64_t heads, int stripe, int sr, PeKind pe,
                           bool with_ffn, Rng& rng) {
    Block b;
    b.dim = dim;
    b.name = prefix;
    if (pe == PeKind::CPE) b.cpe = DwConvP<T>::make(ps, prefix + ".cpe", dim, rng, true);
    b.ln1 = LayerNormP<T>::make(ps, prefix + ".ln1", dim);
    b.mixers.push_back(make_attn<T>(ps, prefix + ".attn", kind, dim, heads, stripe, sr, pe, rng));
    if (with_ffn) {
      b.ln2 = LayerNormP<T>::make(ps, prefix + ".ln2", dim);
      b.ffn = FfnP<T>::make(ps, prefix + ".ffn", dim, 4, rng);
    }
    return b;
  }

  // Parallel block: channels split in half between a local and a global mixer.
  static Block make_parallel(ParamStore<T>& ps, const std::string& prefix, AttnKind local,
                             AttnKind global, int64_t dim, int64_t heads, int stripe, int sr,
                             PeKind pe, Rng& rng) {
    if (dim % 2 || heads % 2)
      throw std::invalid_argument("parallel block needs even dim and heads: " + prefix);
    Block b;
    b.dim = dim;
    b.name = prefix;
    if (pe == PeKind::CPE) b.cpe = DwConvP<T>::make(ps, prefix + ".cpe", dim, rng, true);
    b.ln1 = LayerNormP<T>::make(ps, prefix + ".ln1", dim);
    b.mixers.push_back(
        make_attn<T>(ps, prefix + ".attn_local", local, dim / 2, heads / 2, stripe, sr, pe, rng));
    b.mixers.push_back(
        make_attn<T>(ps, prefix + ".attn_global", global, dim / 2, heads / 2, stripe, sr, pe, rng));
    b.ln2 = LayerNormP<T>::make(ps, prefix + ".ln2", dim);
    b.ffn = FfnP<T>::make(ps, prefix + ".ffn", dim, 4, rng);
    return b;
  }

  Var<T> forward(Graph<T>& g, Var<T> x, int64_t B, int64_t H, int64_t W,
                 std::vector<BlockProbe<T>>* probes = nullptr) const {
    if (cpe) {
      auto pos = nchw_to_seq(g, cpe->forward(g, seq_to_nchw(g, x, B, H, W, dim)));
      x = ops::add(g, x, pos);
    }
    auto h = ln1.forward(g, x);
    Var<T> mixed;
    if (mixers.size() == 1) {
      AttnProbe<T> pr;
      mixed = attn_forward(mixers[0], g, h, B, H, W, probes ? &pr : nullptr);
      if (probes) probes->push_back({name, std::move(pr.received)});
    } else {
      const int64_t half = dim / 2;
      auto hl = ops::narrow(g, h, 2, 0, half);
      auto hg = ops::narrow(g, h, 2, half, half);
      AttnProbe<T> prl, prg;
      auto ml = attn_forward(mixers[0], g, hl, B, H, W, probes ? &prl : nullptr);
      auto mg = attn_forward(mixers[1], g, hg, B, H, W, probes ? &prg : nullptr);
      if (probes) {
        probes->push_back({name + ".local", std::move(prl.received)});
        probes->push_back({name + ".global", std::move(prg.received)});
      }
      mixed = ops::concat<T>(g, {ml, mg}, 2);
    }
    x = ops::add(g, x, mixed);
    if (ffn) x = ops::add(g, x, ffn->forward(g, ln2->forward(g, x)));
    return x;
  }
};

}  // namespace sviptr

#pragma once

// Shared test support: straight-loop reference implementations ("oracles")
// kept deliberately independent of the library's op kernels, written once and
// compared against the real implementations. Everything here is double
// precision and naively indexed so it can be audited line by line.

#include <cmath>
#include <cstdint>
#include <vector>

#include "sviptr/attention.hpp"
#include "sviptr/ctc.hpp"
#include "sviptr/rng.hpp"
#include "sviptr/tensor.hpp"

namespace testutil {

using sviptr::Rng;
using sviptr::Tensor;

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

// ----------------------------------------------------------- naive layers

// y[r, o] = sum_i x[r, i] * w[o, i] + b[o]; x is [R, In] flattened rows.
inline std::vector<double> naive_linear(const std::vector<double>& x, int64_t rows, int64_t in,
                                        const Tensor<double>& w, const Tensor<double>& b) {
  const int64_t out = w.dim(0);
  std::vector<double> y(static_cast<size_t>(rows * out), 0.0);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (int64_t i = 0; i < in; ++i) acc += x[static_cast<size_t>(r * in + i)] * w[o * in + i];
      y[static_cast<size_t>(r * out + o)] = acc;
    }
  return y;
}

// Depthwise KxK conv on one image laid out channel-last [H*W, C] (token
// order), zero padding, per-channel kernels w[C,1,K,K].
inline std::vector<double> naive_dwconv_tokens(const std::vector<double>& x, int64_t H, int64_t W,
                                               int64_t C, const Tensor<double>& w,
                                               const Tensor<double>& b, int stride, int pad) {
  const int64_t K = w.dim(2);
  const int64_t Ho = (H + 2 * pad - K) / stride + 1;
  const int64_t Wo = (W + 2 * pad - K) / stride + 1;
  std::vector<double> y(static_cast<size_t>(Ho * Wo * C), 0.0);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t ho = 0; ho < Ho; ++ho)
      for (int64_t wo = 0; wo < Wo; ++wo) {
        double acc = b[c];
        for (int64_t kh = 0; kh < K; ++kh)
          for (int64_t kw = 0; kw < K; ++kw) {
            const int64_t hi = ho * stride + kh - pad;
            const int64_t wi = wo * stride + kw - pad;
            if (hi < 0 || hi >= H || wi < 0 || wi >= W) continue;
            acc += x[static_cast<size_t>((hi * W + wi) * C + c)] * w[(c * K + kh) * K + kw];
          }
        y[static_cast<size_t>((ho * Wo + wo) * C + c)] = acc;
      }
  return y;
}

// Layer norm over the last C entries of each row, biased variance, eps 1e-6.
inline std::vector<double> naive_layernorm(const std::vector<double>& x, int64_t rows, int64_t C,
                                           const Tensor<double>& gamma,
                                           const Tensor<double>& beta) {
  std::vector<double> y(x.size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * C;
    double mean = 0;
    for (int64_t c = 0; c < C; ++c) mean += xr[c];
    mean /= static_cast<double>(C);
    double var = 0;
    for (int64_t c = 0; c < C; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(C);
    const double inv = 1.0 / std::sqrt(var + 1e-6);
    for (int64_t c = 0; c < C; ++c)
      y[static_cast<size_t>(r * C + c)] = (xr[c] - mean) * inv * gamma[c] + beta[c];
  }
  return y;
}

inline void softmax_inplace(std::vector<double>& row) {
  double m = row[0];
  for (double v : row) m = std::max(m, v);
  double s = 0;
  for (double& v : row) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : row) v /= s;
}

// Plain scaled-dot-product attention over an explicit token index set: for
// each query token, attend over `keys` (indices into the token list).
// q/k/v are [L, C] slices restricted to channels [c0, c0+dh).
inline void naive_attend(const std::vector<double>& q, const std::vector<double>& k,
                         const std::vector<double>& v, int64_t C, int64_t c0, int64_t dh,
                         const std::vector<int64_t>& tokens, std::vector<double>& out) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const size_t n = tokens.size();
  std::vector<double> logits(n);
  for (size_t qi = 0; qi < n; ++qi) {
    const double* qp = q.data() + tokens[qi] * C + c0;
    for (size_t ki = 0; ki < n; ++ki) {
      const double* kp = k.data() + tokens[ki] * C + c0;
      double dot = 0;
      for (int64_t d = 0; d < dh; ++d) dot += qp[d] * kp[d];
      logits[ki] = dot * scale;
    }
    softmax_inplace(logits);
    double* op = out.data() + tokens[qi] * C + c0;
    for (int64_t d = 0; d < dh; ++d) {
      double acc = 0;
      for (size_t ki = 0; ki < n; ++ki)
        acc += logits[ki] * v[static_cast<size_t>(tokens[ki] * C + c0 + d)];
      op[d] = acc;
    }
  }
}

// ------------------------------------------------- attention mechanism oracles
// Each oracle takes the module (for its weights) and the input sequence
// x [L, C] for a single image of height H, width W, and returns [L, C].

inline std::vector<double> tensor_rows(const Tensor<double>& t) {
  return std::vector<double>(t.data(), t.data() + t.numel());
}

inline std::vector<double> oracle_mhsa(const sviptr::MhsaAttn<double>& a,
                                       const std::vector<double>& x, int64_t H, int64_t W) {
  const int64_t L = H * W, C = a.dim, dh = C / a.heads;
  const auto qkv = naive_linear(x, L, C, a.qkv.w->value, a.qkv.b->value);
  std::vector<double> q(static_cast<size_t>(L * C)), k(q), v(q);
  for (int64_t l = 0; l < L; ++l)
    for (int64_t c = 0; c < C; ++c) {
      q[static_cast<size_t>(l * C + c)] = qkv[static_cast<size_t>(l * 3 * C + c)];
      k[static_cast<size_t>(l * C + c)] = qkv[static_cast<size_t>(l * 3 * C + C + c)];
      v[static_cast<size_t>(l * C + c)] = qkv[static_cast<size_t>(l * 3 * C + 2 * C + c)];
    }
  std::vector<int64_t> all(static_cast<size_t>(L));
  for (int64_t l = 0; l < L; ++l) all[static_cast<size_t>(l)] = l;
  std::vector<double> ctx(static_cast<size_t>(L * C), 0.0);
  for (int64_t hd = 0; hd < a.heads; ++hd) naive_attend(q, k, v, C, hd * dh, dh, all, ctx);
  if (a.lepe) {
    const auto pe = naive_dwconv_tokens(v, H, W, C, a.lepe->w->value, a.lepe->b->value, 1, 1);
    for (size_t i = 0; i < ctx.size(); ++i) ctx[i] += pe[i];
  }
  return naive_linear(ctx, L, C, a.out.w->value, a.out.b->value);
}

inline std::vector<double> oracle_cswin(const sviptr::CSWinAttn<double>& a,
                                        const std::vector<double>& x, int64_t H, int64_t W) {
  const int64_t L = H * W, C = a.dim, dh = C / a.heads;
  const int64_t nh_h = a.heads / 2, nh_v = a.heads - nh_h;
  const auto qkv = naive_linear(x, L, C, a.qkv.w->value, a.qkv.b->value);
  std::vector<double> q(static_cast<size_t>(L * C)), k(q), v(q);
  for (int64_t l = 0; l < L; ++l)
    for (int64_t c = 0; c < C; ++c) {
      q[static_cast<size_t>(l * C + c)] = qkv[static_cast<size_t>(l * 3 * C + c)];
      k[static_cast<size_t>(l * C + c)] = qkv[static_cast<size_t>(l * 3 * C + C + c)];
      v[static_cast<size_t>(l * C + c)] = qkv[static_cast<size_t>(l * 3 * C + 2 * C + c)];
    }
  std::vector<double> ctx(static_cast<size_t>(L * C), 0.0);
  // Horizontal stripes: groups of `sw` whole rows; heads 0..nh_h-1 use the
  // leading nh_h*dh channels.
  if (nh_h > 0) {
    const int64_t sw = (H % a.stripe == 0) ? a.stripe : 1;
    for (int64_t hd = 0; hd < nh_h; ++hd)
      for (int64_t s = 0; s < H / sw; ++s) {
        std::vector<int64_t> tokens;
        for (int64_t r = 0; r < sw; ++r)
          for (int64_t w = 0; w < W; ++w) tokens.push_back((s * sw + r) * W + w);
        naive_attend(q, k, v, C, hd * dh, dh, tokens, ctx);
      }
  }
  // Vertical stripes: groups of `sw` whole columns on the remaining channels.
  if (nh_v > 0) {
    const int64_t sw = (W % a.stripe == 0) ? a.stripe : 1;
    for (int64_t hd = 0; hd < nh_v; ++hd)
      for (int64_t s = 0; s < W / sw; ++s) {
        std::vector<int64_t> tokens;
        for (int64_t h = 0; h < H; ++h)
          for (int64_t cidx = 0; cidx < sw; ++cidx) tokens.push_back(h * W + s * sw + cidx);
        naive_attend(q, k, v, C, (nh_h + hd) * dh, dh, tokens, ctx);
      }
  }
  if (a.lepe) {
    const auto pe = naive_dwconv_tokens(v, H, W, C, a.lepe->w->value, a.lepe->b->value, 1, 1);
    for (size_t i = 0; i < ctx.size(); ++i) ctx[i] += pe[i];
  }
  return naive_linear(ctx, L, C, a.out.w->value, a.out.b->value);
}

inline std::vector<double> oracle_masa(const sviptr::DMaSAAttn<double>& a,
                                       const std::vector<double>& x, int64_t H, int64_t W) {
  const int64_t L = H * W, C = a.dim, dh = C / a.heads;
  const auto q = naive_linear(x, L, C, a.q.w->value, a.q.b->value);
  const auto k = naive_linear(x, L, C, a.k.w->value, a.k.b->value);
  const auto v = naive_linear(x, L, C, a.v.w->value, a.v.b->value);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> ctx(static_cast<size_t>(L * C), 0.0);
  for (int64_t hd = 0; hd < a.heads; ++hd) {
    const double gamma = sviptr::masa_gamma(hd);
    const int64_t c0 = hd * dh;
    // Width pass: each row attends along itself; decay by |column distance|
    // applied to the softmax weights (no renormalisation).
    std::vector<double> inter(static_cast<size_t>(L * dh), 0.0);
    for (int64_t h = 0; h < H; ++h)
      for (int64_t wq = 0; wq < W; ++wq) {
        std::vector<double> logits(static_cast<size_t>(W));
        for (int64_t wk = 0; wk < W; ++wk) {
          double dot = 0;
          for (int64_t d = 0; d < dh; ++d)
            dot += q[static_cast<size_t>((h * W + wq) * C + c0 + d)] *
                   k[static_cast<size_t>((h * W + wk) * C + c0 + d)];
          logits[static_cast<size_t>(wk)] = dot * scale;
        }
        softmax_inplace(logits);
        for (int64_t wk = 0; wk < W; ++wk)
          logits[static_cast<size_t>(wk)] *= std::pow(gamma, std::abs(double(wq - wk)));
        for (int64_t d = 0; d < dh; ++d) {
          double acc = 0;
          for (int64_t wk = 0; wk < W; ++wk)
            acc += logits[static_cast<size_t>(wk)] *
                   v[static_cast<size_t>((h * W + wk) * C + c0 + d)];
          inter[static_cast<size_t>((h * W + wq) * dh + d)] = acc;
        }
      }
    // Height pass: each column attends along itself using the *same* q/k,
    // mixing the width-pass intermediate values.
    for (int64_t w = 0; w < W; ++w)
      for (int64_t hq = 0; hq < H; ++hq) {
        std::vector<double> logits(static_cast<size_t>(H));
        for (int64_t hk = 0; hk < H; ++hk) {
          double dot = 0;
          for (int64_t d = 0; d < dh; ++d)
            dot += q[static_cast<size_t>((hq * W + w) * C + c0 + d)] *
                   k[static_cast<size_t>((hk * W + w) * C + c0 + d)];
          logits[static_cast<size_t>(hk)] = dot * scale;
        }
        softmax_inplace(logits);
        for (int64_t hk = 0; hk < H; ++hk)
          logits[static_cast<size_t>(hk)] *= std::pow(gamma, std::abs(double(hq - hk)));
        for (int64_t d = 0; d < dh; ++d) {
          double acc = 0;
          for (int64_t hk = 0; hk < H; ++hk)
            acc += logits[static_cast<size_t>(hk)] *
                   inter[static_cast<size_t>((hk * W + w) * dh + d)];
          ctx[static_cast<size_t>((hq * W + w) * C + c0 + d)] = acc;
        }
      }
  }
  const auto lc = naive_dwconv_tokens(v, H, W, C, a.local.w->value, a.local.b->value, 1, 1);
  for (size_t i = 0; i < ctx.size(); ++i) ctx[i] += lc[i];
  return naive_linear(ctx, L, C, a.out.w->value, a.out.b->value);
}

inline std::vector<double> oracle_osra(const sviptr::OsraAttn<double>& a,
                                       const std::vector<double>& x, int64_t H, int64_t W) {
  const int64_t L = H * W, C = a.dim, dh = C / a.heads;
  const auto q = naive_linear(x, L, C, a.q.w->value, a.q.b->value);
  // Overlapping depthwise reduction, then layer norm, then merged k/v.
  const auto red = naive_dwconv_tokens(x, H, W, C, a.red_w->value, a.red_b->value, a.sr, a.sr - 1);
  const int64_t K = 2 * a.sr - 1;
  const int64_t Hr = (H + 2 * (a.sr - 1) - K) / a.sr + 1;
  const int64_t Wr = (W + 2 * (a.sr - 1) - K) / a.sr + 1;
  const int64_t Lr = Hr * Wr;
  const auto rtok = naive_layernorm(red, Lr, C, a.red_ln.gamma->value, a.red_ln.beta->value);
  const auto kv = naive_linear(rtok, Lr, C, a.kv.w->value, a.kv.b->value);
  std::vector<double> k(static_cast<size_t>(Lr * C)), v(k);
  for (int64_t l = 0; l < Lr; ++l)
    for (int64_t c = 0; c < C; ++c) {
      k[static_cast<size_t>(l * C + c)] = kv[static_cast<size_t>(l * 2 * C + c)];
      v[static_cast<size_t>(l * C + c)] = kv[static_cast<size_t>(l * 2 * C + C + c)];
    }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> ctx(static_cast<size_t>(L * C), 0.0);
  for (int64_t hd = 0; hd < a.heads; ++hd) {
    const int64_t c0 = hd * dh;
    for (int64_t lq = 0; lq < L; ++lq) {
      std::vector<double> logits(static_cast<size_t>(Lr));
      for (int64_t lk = 0; lk < Lr; ++lk) {
        double dot = 0;
        for (int64_t d = 0; d < dh; ++d)
          dot += q[static_cast<size_t>(lq * C + c0 + d)] *
                 k[static_cast<size_t>(lk * C + c0 + d)];
        logits[static_cast<size_t>(lk)] = dot * scale;
      }
      softmax_inplace(logits);
      for (int64_t d = 0; d < dh; ++d) {
        double acc = 0;
        for (int64_t lk = 0; lk < Lr; ++lk)
          acc += logits[static_cast<size_t>(lk)] * v[static_cast<size_t>(lk * C + c0 + d)];
        ctx[static_cast<size_t>(lq * C + c0 + d)] = acc;
      }
    }
  }
  return naive_linear(ctx, L, C, a.out.w->value, a.out.b->value);
}

// -------------------------------------------------------------- CTC oracle

// Exhaustive alignment enumeration: sums the probability of every length-T
// frame labelling whose collapse (merge repeats, drop blanks) equals target.
// lp is [T, N] log-probabilities. Returns -log P(target).
inline double ctc_bruteforce(const std::vector<double>& lp, int64_t T, int64_t N,
                             const std::vector<int>& target) {
  std::vector<int> path(static_cast<size_t>(T), 0);
  double total = 0.0;
  bool any = false;
  while (true) {
    // Collapse.
    std::vector<int> collapsed;
    int prev = -1;
    for (int64_t t = 0; t < T; ++t) {
      const int c = path[static_cast<size_t>(t)];
      if (c != prev && c != 0) collapsed.push_back(c);
      prev = c;
    }
    if (collapsed == target) {
      double logp = 0;
      for (int64_t t = 0; t < T; ++t) logp += lp[static_cast<size_t>(t * N + path[static_cast<size_t>(t)])];
      total = any ? sviptr::log_add(total, logp) : logp;
      any = true;
    }
    // Next path in lexicographic order.
    int64_t pos = T - 1;
    while (pos >= 0 && path[static_cast<size_t>(pos)] == N - 1) path[static_cast<size_t>(pos--)] = 0;
    if (pos < 0) break;
    ++path[static_cast<size_t>(pos)];
  }
  if (!any) return std::numeric_limits<double>::infinity();
  return -total;
}

}  // namespace testutil

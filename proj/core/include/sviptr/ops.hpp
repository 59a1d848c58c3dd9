#pragma once

// Differentiable primitives. Each op computes its output eagerly, then (on a
// recording graph) registers a closure that pulls the node's gradient into its
// parents. Heavy lifting (matrix products) goes through sviptr::mm.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "sviptr/autograd.hpp"
#include "sviptr/gemm.hpp"
#include "sviptr/rng.hpp"
#include "sviptr/tensor.hpp"

namespace sviptr::ops {

// ---------------------------------------------------------------- utilities

template <typename T>
inline void axpy(T* dst, const T* src, int64_t n, T alpha = T(1)) {
  for (int64_t i = 0; i < n; ++i) dst[i] += alpha * src[i];
}

inline Shape permuted_shape(const Shape& s, const std::vector<int>& axes) {
  Shape out(s.size());
  for (size_t i = 0; i < axes.size(); ++i) out[i] = s[static_cast<size_t>(axes[i])];
  return out;
}

// Raw N-d transpose: out = permute(in, axes).
template <typename T>
Tensor<T> permute_tensor(const Tensor<T>& in, const std::vector<int>& axes) {
  const int nd = in.ndim();
  if (static_cast<int>(axes.size()) != nd) throw std::invalid_argument("permute: axes size");
  Shape oshape = permuted_shape(in.shape(), axes);
  Tensor<T> out(oshape);
  std::vector<int64_t> istrides(static_cast<size_t>(nd), 1);
  for (int i = nd - 2; i >= 0; --i) istrides[i] = istrides[i + 1] * in.dim(i + 1);
  // stride of output axis i in the input
  std::vector<int64_t> map(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) map[i] = istrides[static_cast<size_t>(axes[i])];
  const T* src = in.data();
  T* dst = out.data();
  std::vector<int64_t> idx(static_cast<size_t>(nd), 0);
  const int64_t total = in.numel();
  const int64_t inner = oshape.empty() ? 1 : oshape.back();
  const int64_t inner_stride = nd ? map[static_cast<size_t>(nd - 1)] : 1;
  for (int64_t o = 0; o < total; o += inner) {
    int64_t off = 0;
    for (int i = 0; i < nd - 1; ++i) off += idx[static_cast<size_t>(i)] * map[static_cast<size_t>(i)];
    if (inner_stride == 1) {
      std::memcpy(dst + o, src + off, static_cast<size_t>(inner) * sizeof(T));
    } else {
      for (int64_t j = 0; j < inner; ++j) dst[o + j] = src[off + j * inner_stride];
    }
    for (int i = nd - 2; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < oshape[static_cast<size_t>(i)]) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return out;
}

inline std::vector<int> inverse_axes(const std::vector<int>& axes) {
  std::vector<int> inv(axes.size());
  for (size_t i = 0; i < axes.size(); ++i) inv[static_cast<size_t>(axes[i])] = static_cast<int>(i);
  return inv;
}

// ------------------------------------------------------------- basic algebra

template <typename T>
Var<T> add(Graph<T>& g, Var<T> a, Var<T> b) {
  if (!same_shape(a->value, b->value)) throw std::invalid_argument("add: shape mismatch");
  Tensor<T> out(a->value.shape());
  const T* pa = a->value.data();
  const T* pb = b->value.data();
  T* po = out.data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  return g.record(std::move(out), {a, b},
                  [a, b](Node<T>& node) {
                    axpy(a->ensure_grad().data(), node.grad.data(), node.grad.numel());
                    axpy(b->ensure_grad().data(), node.grad.data(), node.grad.numel());
                  },
                  "add");
}

template <typename T>
Var<T> mul(Graph<T>& g, Var<T> a, Var<T> b) {
  if (!same_shape(a->value, b->value)) throw std::invalid_argument("mul: shape mismatch");
  Tensor<T> out(a->value.shape());
  const T* pa = a->value.data();
  const T* pb = b->value.data();
  T* po = out.data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  return g.record(std::move(out), {a, b},
                  [a, b](Node<T>& node) {
                    const int64_t n = node.grad.numel();
                    T* ga = a->ensure_grad().data();
                    T* gb = b->ensure_grad().data();
                    const T* dy = node.grad.data();
                    const T* pa = a->value.data();
                    const T* pb = b->value.data();
                    for (int64_t i = 0; i < n; ++i) {
                      ga[i] += dy[i] * pb[i];
                      gb[i] += dy[i] * pa[i];
                    }
                  },
                  "mul");
}

template <typename T>
Var<T> scale(Graph<T>& g, Var<T> a, T c) {
  Tensor<T> out(a->value.shape());
  const T* pa = a->value.data();
  T* po = out.data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * c;
  return g.record(std::move(out), {a},
                  [a, c](Node<T>& node) {
                    axpy(a->ensure_grad().data(), node.grad.data(), node.grad.numel(), c);
                  },
                  "scale");
}

// y = x + p with p broadcast over the leading (batch) axis; p has dim0 == 1
// and the same trailing shape as x.
template <typename T>
Var<T> add_bcast_batch(Graph<T>& g, Var<T> x, Var<T> p) {
  const int64_t inner = p->value.numel();
  if (p->value.dim(0) != 1 || x->value.numel() % inner != 0)
    throw std::invalid_argument("add_bcast_batch: shape mismatch");
  const int64_t B = x->value.numel() / inner;
  Tensor<T> out(x->value.shape());
  const T* px = x->value.data();
  const T* pp = p->value.data();
  T* po = out.data();
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < inner; ++i) po[b * inner + i] = px[b * inner + i] + pp[i];
  return g.record(std::move(out), {x, p},
                  [x, p, B, inner](Node<T>& node) {
                    const T* dy = node.grad.data();
                    T* gx = x->ensure_grad().data();
                    T* gp = p->ensure_grad().data();
                    for (int64_t b = 0; b < B; ++b) {
                      axpy(gx + b * inner, dy + b * inner, inner);
                      axpy(gp, dy + b * inner, inner);
                    }
                  },
                  "add_bcast_batch");
}

// Multiply a grouped tensor [G, M, N] by a constant mask [M, N] (broadcast on G).
template <typename T>
Var<T> mul_const_bcast(Graph<T>& g, Var<T> a, Tensor<T> mask) {
  if (a->value.ndim() != 3 || mask.ndim() != 2 || a->value.dim(1) != mask.dim(0) ||
      a->value.dim(2) != mask.dim(1))
    throw std::invalid_argument("mul_const_bcast: shape mismatch");
  const int64_t G = a->value.dim(0), MN = mask.numel();
  Tensor<T> out(a->value.shape());
  const T* pa = a->value.data();
  const T* pm = mask.data();
  T* po = out.data();
  for (int64_t gi = 0; gi < G; ++gi)
    for (int64_t i = 0; i < MN; ++i) po[gi * MN + i] = pa[gi * MN + i] * pm[i];
  return g.record(std::move(out), {a},
                  [a, mask, G, MN](Node<T>& node) {
                    T* ga = a->ensure_grad().data();
                    const T* dy = node.grad.data();
                    const T* pm = mask.data();
                    for (int64_t gi = 0; gi < G; ++gi)
                      for (int64_t i = 0; i < MN; ++i) ga[gi * MN + i] += dy[gi * MN + i] * pm[i];
                  },
                  "mul_const_bcast");
}

template <typename T>
Var<T> sum_all(Graph<T>& g, Var<T> a) {
  T s = T(0);
  const T* pa = a->value.data();
  for (int64_t i = 0; i < a->value.numel(); ++i) s += pa[i];
  Tensor<T> out({1});
  out[0] = s;
  return g.record(std::move(out), {a},
                  [a](Node<T>& node) {
                    T* ga = a->ensure_grad().data();
                    const T dy = node.grad[0];
                    for (int64_t i = 0; i < a->value.numel(); ++i) ga[i] += dy;
                  },
                  "sum_all");
}

template <typename T>
Var<T> mean_all(Graph<T>& g, Var<T> a) {
  const int64_t n = a->value.numel();
  auto s = sum_all(g, a);
  return scale(g, s, T(1) / static_cast<T>(n));
}

// ------------------------------------------------------------ shape plumbing

template <typename T>
Var<T> reshape(Graph<T>& g, Var<T> a, Shape shape) {
  Tensor<T> out = a->value.reshaped(std::move(shape));
  return g.record(std::move(out), {a},
                  [a](Node<T>& node) {
                    Tensor<T> dv = node.grad.reshaped(a->value.shape());
                    axpy(a->ensure_grad().data(), dv.data(), dv.numel());
                  },
                  "reshape");
}

template <typename T>
Var<T> permute(Graph<T>& g, Var<T> a, std::vector<int> axes) {
  Tensor<T> out = permute_tensor(a->value, axes);
  return g.record(std::move(out), {a},
                  [a, axes](Node<T>& node) {
                    Tensor<T> dv = permute_tensor(node.grad, inverse_axes(axes));
                    axpy(a->ensure_grad().data(), dv.data(), dv.numel());
                  },
                  "permute");
}

// Slice `len` entries starting at `start` along dimension `dim`.
template <typename T>
Var<T> narrow(Graph<T>& g, Var<T> a, int dim, int64_t start, int64_t len) {
  const Shape& s = a->value.shape();
  if (dim < 0 || dim >= a->value.ndim() || start < 0 || start + len > s[static_cast<size_t>(dim)])
    throw std::invalid_argument("narrow: out of range");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < dim; ++i) outer *= s[static_cast<size_t>(i)];
  for (int i = dim + 1; i < a->value.ndim(); ++i) inner *= s[static_cast<size_t>(i)];
  const int64_t d = s[static_cast<size_t>(dim)];
  Shape oshape = s;
  oshape[static_cast<size_t>(dim)] = len;
  Tensor<T> out(oshape);
  const T* src = a->value.data();
  T* dst = out.data();
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(dst + o * len * inner, src + (o * d + start) * inner,
                static_cast<size_t>(len * inner) * sizeof(T));
  return g.record(std::move(out), {a},
                  [a, outer, inner, d, start, len](Node<T>& node) {
                    T* ga = a->ensure_grad().data();
                    const T* dy = node.grad.data();
                    for (int64_t o = 0; o < outer; ++o)
                      axpy(ga + (o * d + start) * inner, dy + o * len * inner, len * inner);
                  },
                  "narrow");
}

template <typename T>
Var<T> concat(Graph<T>& g, std::vector<Var<T>> xs, int dim) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input");
  const Shape& s0 = xs[0]->value.shape();
  int64_t dsum = 0;
  for (auto& x : xs) {
    if (x->value.ndim() != static_cast<int>(s0.size()))
      throw std::invalid_argument("concat: rank mismatch");
    for (int i = 0; i < x->value.ndim(); ++i)
      if (i != dim && x->value.dim(i) != s0[static_cast<size_t>(i)])
        throw std::invalid_argument("concat: shape mismatch");
    dsum += x->value.dim(dim);
  }
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < dim; ++i) outer *= s0[static_cast<size_t>(i)];
  for (int i = dim + 1; i < static_cast<int>(s0.size()); ++i) inner *= s0[static_cast<size_t>(i)];
  Shape oshape = s0;
  oshape[static_cast<size_t>(dim)] = dsum;
  Tensor<T> out(oshape);
  T* dst = out.data();
  int64_t off = 0;
  for (auto& x : xs) {
    const int64_t dx = x->value.dim(dim);
    const T* src = x->value.data();
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(dst + (o * dsum + off) * inner, src + o * dx * inner,
                  static_cast<size_t>(dx * inner) * sizeof(T));
    off += dx;
  }
  return g.record(std::move(out), xs,
                  [xs, outer, inner, dsum, dim](Node<T>& node) {
                    const T* dy = node.grad.data();
                    int64_t off = 0;
                    for (auto& x : xs) {
                      const int64_t dx = x->value.dim(dim);
                      T* gx = x->ensure_grad().data();
                      for (int64_t o = 0; o < outer; ++o)
                        axpy(gx + o * dx * inner, dy + (o * dsum + off) * inner, dx * inner);
                      off += dx;
                    }
                  },
                  "concat");
}

// --------------------------------------------------------------- dense layers

// y = x @ w^T (+ b). x: [..., Din] flattened to rows; w: [Dout, Din]; b: [Dout].
template <typename T>
Var<T> linear(Graph<T>& g, Var<T> x, Var<T> w, Var<T> b = nullptr) {
  const int64_t din = w->value.dim(1), dout = w->value.dim(0);
  if (x->value.shape().back() != din) throw std::invalid_argument("linear: input width mismatch");
  const int64_t rows = x->value.numel() / din;
  Shape oshape = x->value.shape();
  oshape.back() = dout;
  Tensor<T> out(oshape);
  mm::gemm_nt(x->value.data(), w->value.data(), out.data(), rows, din, dout);
  if (b) {
    T* po = out.data();
    const T* pb = b->value.data();
    for (int64_t r = 0; r < rows; ++r) axpy(po + r * dout, pb, dout);
  }
  std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
  return g.record(std::move(out), std::move(parents),
                  [x, w, b, rows, din, dout](Node<T>& node) {
                    const T* dy = node.grad.data();
                    mm::gemm_nn(dy, w->value.data(), x->ensure_grad().data(), rows, dout, din,
                                true);
                    mm::gemm_tn(dy, x->value.data(), w->ensure_grad().data(), dout, rows, din,
                                true);
                    if (b) {
                      T* gb = b->ensure_grad().data();
                      for (int64_t r = 0; r < rows; ++r) axpy(gb, dy + r * dout, dout);
                    }
                  },
                  "linear");
}

// Batched matmul. a: [G, M, K]; b: [G, K, N] or, with trans_b, [G, N, K].
template <typename T>
Var<T> bmm(Graph<T>& g, Var<T> a, Var<T> b, bool trans_b = false) {
  if (a->value.ndim() != 3 || b->value.ndim() != 3 || a->value.dim(0) != b->value.dim(0))
    throw std::invalid_argument("bmm: expected matching [G,*,*] inputs");
  const int64_t G = a->value.dim(0), M = a->value.dim(1), K = a->value.dim(2);
  const int64_t N = trans_b ? b->value.dim(1) : b->value.dim(2);
  if ((trans_b ? b->value.dim(2) : b->value.dim(1)) != K)
    throw std::invalid_argument("bmm: inner dimension mismatch");
  Tensor<T> out({G, M, N});
  for (int64_t gi = 0; gi < G; ++gi) {
    const T* pa = a->value.data() + gi * M * K;
    const T* pb = b->value.data() + gi * (trans_b ? N * K : K * N);
    T* pc = out.data() + gi * M * N;
    if (trans_b)
      mm::gemm_nt(pa, pb, pc, M, K, N);
    else
      mm::gemm_nn(pa, pb, pc, M, K, N);
  }
  return g.record(std::move(out), {a, b},
                  [a, b, trans_b, G, M, K, N](Node<T>& node) {
                    T* ga = a->ensure_grad().data();
                    T* gb = b->ensure_grad().data();
                    const T* dy = node.grad.data();
                    for (int64_t gi = 0; gi < G; ++gi) {
                      const T* pdy = dy + gi * M * N;
                      const T* pa = a->value.data() + gi * M * K;
                      if (!trans_b) {
                        const T* pb = b->value.data() + gi * K * N;
                        mm::gemm_nt(pdy, pb, ga + gi * M * K, M, N, K, true);
                        mm::gemm_tn(pa, pdy, gb + gi * K * N, K, M, N, true);
                      } else {
                        const T* pb = b->value.data() + gi * N * K;
                        mm::gemm_nn(pdy, pb, ga + gi * M * K, M, N, K, true);
                        mm::gemm_tn(pdy, pa, gb + gi * N * K, N, M, K, true);
                      }
                    }
                  },
                  "bmm");
}

// ---------------------------------------------------------------- convolution

struct ConvSpec {
  int sh = 1, sw = 1;  // stride
  int ph = 0, pw = 0;  // zero padding
  int groups = 1;
};

inline int64_t conv_out_extent(int64_t in, int k, int s, int p) {
  return (in + 2 * p - k) / s + 1;
}

namespace detail {

template <typename T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int kh, int kw, const ConvSpec& cs,
            int64_t Ho, int64_t Wo, T* col) {
  // col layout: [C*kh*kw, Ho*Wo]
  for (int64_t c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        T* dst = col + ((c * kh + i) * kw + j) * Ho * Wo;
        for (int64_t ho = 0; ho < Ho; ++ho) {
          const int64_t hi = ho * cs.sh - cs.ph + i;
          if (hi < 0 || hi >= H) {
            std::memset(dst + ho * Wo, 0, static_cast<size_t>(Wo) * sizeof(T));
            continue;
          }
          const T* src = x + (c * H + hi) * W;
          for (int64_t wo = 0; wo < Wo; ++wo) {
            const int64_t wi = wo * cs.sw - cs.pw + j;
            dst[ho * Wo + wo] = (wi >= 0 && wi < W) ? src[wi] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int64_t C, int64_t H, int64_t W, int kh, int kw, const ConvSpec& cs,
                int64_t Ho, int64_t Wo, T* x) {
  for (int64_t c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const T* src = col + ((c * kh + i) * kw + j) * Ho * Wo;
        for (int64_t ho = 0; ho < Ho; ++ho) {
          const int64_t hi = ho * cs.sh - cs.ph + i;
          if (hi < 0 || hi >= H) continue;
          T* dst = x + (c * H + hi) * W;
          for (int64_t wo = 0; wo < Wo; ++wo) {
            const int64_t wi = wo * cs.sw - cs.pw + j;
            if (wi >= 0 && wi < W) dst[wi] += src[ho * Wo + wo];
          }
        }
      }
    }
  }
}

}  // namespace detail

// Cross-correlation conv. x: [B, Cin, H, W]; w: [Cout, Cin/groups, kh, kw]; b: [Cout].
template <typename T>
Var<T> conv2d(Graph<T>& g, Var<T> x, Var<T> w, Var<T> b, ConvSpec cs) {
  const int64_t B = x->value.dim(0), Cin = x->value.dim(1), H = x->value.dim(2),
                W = x->value.dim(3);
  const int64_t Cout = w->value.dim(0), Cing = w->value.dim(1);
  const int kh = static_cast<int>(w->value.dim(2)), kw = static_cast<int>(w->value.dim(3));
  if (Cin % cs.groups || Cout % cs.groups || Cin / cs.groups != Cing)
    throw std::invalid_argument("conv2d: channel/group mismatch");
  const int64_t Ho = conv_out_extent(H, kh, cs.sh, cs.ph);
  const int64_t Wo = conv_out_extent(W, kw, cs.sw, cs.pw);
  if (Ho < 1 || Wo < 1) throw std::invalid_argument("conv2d: output collapses below 1x1");
  Tensor<T> out({B, Cout, Ho, Wo});

  const bool depthwise = (cs.groups == Cin && Cout == Cin);
  if (depthwise) {
    const T* px = x->value.data();
    const T* pw = w->value.data();
    T* po = out.data();
    for (int64_t bi = 0; bi < B; ++bi)
      for (int64_t c = 0; c < Cin; ++c) {
        const T* xc = px + (bi * Cin + c) * H * W;
        const T* wc = pw + c * kh * kw;
        T* oc = po + (bi * Cout + c) * Ho * Wo;
        const T bias = b ? b->value[c] : T(0);
        for (int64_t ho = 0; ho < Ho; ++ho)
          for (int64_t wo = 0; wo < Wo; ++wo) {
            T acc = bias;
            for (int i = 0; i < kh; ++i) {
              const int64_t hi = ho * cs.sh - cs.ph + i;
              if (hi < 0 || hi >= H) continue;
              for (int j = 0; j < kw; ++j) {
                const int64_t wi = wo * cs.sw - cs.pw + j;
                if (wi < 0 || wi >= W) continue;
                acc += xc[hi * W + wi] * wc[i * kw + j];
              }
            }
            oc[ho * Wo + wo] = acc;
          }
      }
  } else {
    const int64_t K = Cing * kh * kw;
    const int64_t coutg = Cout / cs.groups;
    std::vector<T> col(static_cast<size_t>(K * Ho * Wo));
    for (int64_t bi = 0; bi < B; ++bi) {
      for (int gi = 0; gi < cs.groups; ++gi) {
        const T* px = x->value.data() + (bi * Cin + gi * Cing) * H * W;
        detail::im2col(px, Cing, H, W, kh, kw, cs, Ho, Wo, col.data());
        T* po = out.data() + (bi * Cout + gi * coutg) * Ho * Wo;
        mm::gemm_nn(w->value.data() + gi * coutg * K, col.data(), po, coutg, K, Ho * Wo);
      }
    }
    if (b) {
      T* po = out.data();
      for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t c = 0; c < Cout; ++c) {
          const T bias = b->value[c];
          T* oc = po + (bi * Cout + c) * Ho * Wo;
          for (int64_t i = 0; i < Ho * Wo; ++i) oc[i] += bias;
        }
    }
  }

  std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
  return g.record(
      std::move(out), std::move(parents),
      [x, w, b, cs, B, Cin, H, W, Cout, Cing, kh, kw, Ho, Wo, depthwise](Node<T>& node) {
        const T* dy = node.grad.data();
        T* gx = x->ensure_grad().data();
        T* gw = w->ensure_grad().data();
        if (depthwise) {
          const T* px = x->value.data();
          const T* pw = w->value.data();
          for (int64_t bi = 0; bi < B; ++bi)
            for (int64_t c = 0; c < Cin; ++c) {
              const T* xc = px + (bi * Cin + c) * H * W;
              const T* wc = pw + c * kh * kw;
              T* gxc = gx + (bi * Cin + c) * H * W;
              T* gwc = gw + c * kh * kw;
              const T* dyc = dy + (bi * Cout + c) * Ho * Wo;
              for (int64_t ho = 0; ho < Ho; ++ho)
                for (int64_t wo = 0; wo < Wo; ++wo) {
                  const T d = dyc[ho * Wo + wo];
                  if (d == T(0)) continue;
                  for (int i = 0; i < kh; ++i) {
                    const int64_t hi = ho * cs.sh - cs.ph + i;
                    if (hi < 0 || hi >= H) continue;
                    for (int j = 0; j < kw; ++j) {
                      const int64_t wi = wo * cs.sw - cs.pw + j;
                      if (wi < 0 || wi >= W) continue;
                      gxc[hi * W + wi] += d * wc[i * kw + j];
                      gwc[i * kw + j] += d * xc[hi * W + wi];
                    }
                  }
                }
            }
        } else {
          const int64_t K = Cing * kh * kw;
          const int64_t coutg = Cout / cs.groups;
          std::vector<T> col(static_cast<size_t>(K * Ho * Wo));
          std::vector<T> dcol(static_cast<size_t>(K * Ho * Wo));
          for (int64_t bi = 0; bi < B; ++bi) {
            for (int gi = 0; gi < cs.groups; ++gi) {
              const T* px = x->value.data() + (bi * Cin + gi * Cing) * H * W;
              detail::im2col(px, Cing, H, W, kh, kw, cs, Ho, Wo, col.data());
              const T* pdy = dy + (bi * Cout + gi * coutg) * Ho * Wo;
              mm::gemm_nt(pdy, col.data(), gw + gi * coutg * K, coutg, Ho * Wo, K, true);
              mm::gemm_tn(w->value.data() + gi * coutg * K, pdy, dcol.data(), K, coutg, Ho * Wo);
              detail::col2im_add(dcol.data(), Cing, H, W, kh, kw, cs, Ho, Wo,
                                 gx + (bi * Cin + gi * Cing) * H * W);
            }
          }
        }
        if (b) {
          T* gb = b->ensure_grad().data();
          for (int64_t bi = 0; bi < B; ++bi)
            for (int64_t c = 0; c < Cout; ++c) {
              const T* dyc = dy + (bi * Cout + c) * Ho * Wo;
              T s = T(0);
              for (int64_t i = 0; i < Ho * Wo; ++i) s += dyc[i];
              gb[c] += s;
            }
        }
      },
      "conv2d");
}

// ---------------------------------------------------------------- normalizers

// Layer norm over the trailing dimension (population variance, affine).
template <typename T>
Var<T> layer_norm_lastdim(Graph<T>& g, Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-6)) {
  const int64_t C = x->value.shape().back();
  if (gamma->value.numel() != C || beta->value.numel() != C)
    throw std::invalid_argument("layer_norm: affine size mismatch");
  const int64_t R = x->value.numel() / C;
  Tensor<T> out(x->value.shape());
  auto xhat = std::make_shared<Tensor<T>>(x->value.shape());
  auto istd = std::make_shared<Tensor<T>>(Shape{R});
  const T* px = x->value.data();
  const T* pg = gamma->value.data();
  const T* pb = beta->value.data();
  T* po = out.data();
  T* ph = xhat->data();
  T* pi = istd->data();
  for (int64_t r = 0; r < R; ++r) {
    const T* xr = px + r * C;
    T mean = T(0);
    for (int64_t c = 0; c < C; ++c) mean += xr[c];
    mean /= static_cast<T>(C);
    T var = T(0);
    for (int64_t c = 0; c < C; ++c) {
      const T d = xr[c] - mean;
      var += d * d;
    }
    var /= static_cast<T>(C);
    const T inv = T(1) / std::sqrt(var + eps);
    pi[r] = inv;
    T* hr = ph + r * C;
    T* yr = po + r * C;
    for (int64_t c = 0; c < C; ++c) {
      hr[c] = (xr[c] - mean) * inv;
      yr[c] = pg[c] * hr[c] + pb[c];
    }
  }
  return g.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat, istd, R, C](Node<T>& node) {
                    const T* dy = node.grad.data();
                    const T* ph = xhat->data();
                    const T* pi = istd->data();
                    const T* pg = gamma->value.data();
                    T* gx = x->ensure_grad().data();
                    T* gg = gamma->ensure_grad().data();
                    T* gb = beta->ensure_grad().data();
                    for (int64_t r = 0; r < R; ++r) {
                      const T* dyr = dy + r * C;
                      const T* hr = ph + r * C;
                      T sum_dg = T(0), sum_dgh = T(0);
                      for (int64_t c = 0; c < C; ++c) {
                        const T dg = dyr[c] * pg[c];
                        sum_dg += dg;
                        sum_dgh += dg * hr[c];
                        gg[c] += dyr[c] * hr[c];
                        gb[c] += dyr[c];
                      }
                      const T inv_c = T(1) / static_cast<T>(C);
                      T* gxr = gx + r * C;
                      for (int64_t c = 0; c < C; ++c) {
                        const T dg = dyr[c] * pg[c];
                        gxr[c] += pi[r] * (dg - sum_dg * inv_c - hr[c] * sum_dgh * inv_c);
                      }
                    }
                  },
                  "layer_norm");
}

// Batch norm over (B, H, W) per channel for NCHW input. Training mode uses
// batch statistics and folds them into the running buffers as
// running = (1 - momentum) * batch + momentum * running.
template <typename T>
Var<T> batch_norm2d(Graph<T>& g, Var<T> x, Var<T> gamma, Var<T> beta, Var<T> run_mean,
                    Var<T> run_var, T momentum = T(0.9), T eps = T(1e-5)) {
  const int64_t B = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2),
                W = x->value.dim(3);
  const int64_t N = B * H * W;
  const int64_t HW = H * W;
  Tensor<T> out(x->value.shape());
  auto xhat = std::make_shared<Tensor<T>>(x->value.shape());
  auto istd = std::make_shared<Tensor<T>>(Shape{C});
  const T* px = x->value.data();
  const T* pg = gamma->value.data();
  const T* pb = beta->value.data();
  T* po = out.data();
  T* ph = xhat->data();
  T* pi = istd->data();
  for (int64_t c = 0; c < C; ++c) {
    T mean, var;
    if (g.training()) {
      mean = T(0);
      for (int64_t bi = 0; bi < B; ++bi) {
        const T* xc = px + (bi * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) mean += xc[i];
      }
      mean /= static_cast<T>(N);
      var = T(0);
      for (int64_t bi = 0; bi < B; ++bi) {
        const T* xc = px + (bi * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) {
          const T d = xc[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<T>(N);
      run_mean->value[c] = (T(1) - momentum) * mean + momentum * run_mean->value[c];
      run_var->value[c] = (T(1) - momentum) * var + momentum * run_var->value[c];
    } else {
      mean = run_mean->value[c];
      var = run_var->value[c];
    }
    const T inv = T(1) / std::sqrt(var + eps);
    pi[c] = inv;
    for (int64_t bi = 0; bi < B; ++bi) {
      const T* xc = px + (bi * C + c) * HW;
      T* hc = ph + (bi * C + c) * HW;
      T* yc = po + (bi * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) {
        hc[i] = (xc[i] - mean) * inv;
        yc[i] = pg[c] * hc[i] + pb[c];
      }
    }
  }
  return g.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat, istd, B, C, HW, N](Node<T>& node) {
                    const T* dy = node.grad.data();
                    const T* ph = xhat->data();
                    const T* pi = istd->data();
                    const T* pg = gamma->value.data();
                    T* gx = x->ensure_grad().data();
                    T* gg = gamma->ensure_grad().data();
                    T* gb = beta->ensure_grad().data();
                    for (int64_t c = 0; c < C; ++c) {
                      T sum_dy = T(0), sum_dyh = T(0);
                      for (int64_t bi = 0; bi < B; ++bi) {
                        const T* dyc = dy + (bi * C + c) * HW;
                        const T* hc = ph + (bi * C + c) * HW;
                        for (int64_t i = 0; i < HW; ++i) {
                          sum_dy += dyc[i];
                          sum_dyh += dyc[i] * hc[i];
                        }
                      }
                      gg[c] += sum_dyh;
                      gb[c] += sum_dy;
                      const T invn = T(1) / static_cast<T>(N);
                      const T k = pg[c] * pi[c];
                      for (int64_t bi = 0; bi < B; ++bi) {
                        const T* dyc = dy + (bi * C + c) * HW;
                        const T* hc = ph + (bi * C + c) * HW;
                        T* gxc = gx + (bi * C + c) * HW;
                        for (int64_t i = 0; i < HW; ++i)
                          gxc[i] += k * (dyc[i] - sum_dy * invn - hc[i] * sum_dyh * invn);
                      }
                    }
                  },
                  "batch_norm");
}

// --------------------------------------------------------------- activations

// GELU, tanh approximation.
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

template <typename T>
Var<T> gelu(Graph<T>& g, Var<T> x) {
  Tensor<T> out(x->value.shape());
  const T* px = x->value.data();
  T* po = out.data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(px[i]);
    po[i] = static_cast<T>(0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v))));
  }
  return g.record(std::move(out), {x},
                  [x](Node<T>& node) {
                    const T* dy = node.grad.data();
                    const T* px = x->value.data();
                    T* gx = x->ensure_grad().data();
                    for (int64_t i = 0; i < node.grad.numel(); ++i) {
                      const double v = static_cast<double>(px[i]);
                      const double u = kGeluC * (v + kGeluA * v * v * v);
                      const double t = std::tanh(u);
                      const double sech2 = 1.0 - t * t;
                      const double d = 0.5 * (1.0 + t) +
                                       0.5 * v * sech2 * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
                      gx[i] += dy[i] * static_cast<T>(d);
                    }
                  },
                  "gelu");
}

// Hardswish: x * clamp(x + 3, 0, 6) / 6.
template <typename T>
Var<T> hardswish(Graph<T>& g, Var<T> x) {
  Tensor<T> out(x->value.shape());
  const T* px = x->value.data();
  T* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    const T v = px[i];
    const T r = std::min(std::max(v + T(3), T(0)), T(6));
    po[i] = v * r / T(6);
  }
  return g.record(std::move(out), {x},
                  [x](Node<T>& node) {
                    const T* dy = node.grad.data();
                    const T* px = x->value.data();
                    T* gx = x->ensure_grad().data();
                    for (int64_t i = 0; i < node.grad.numel(); ++i) {
                      const T v = px[i];
                      T d;
                      if (v <= T(-3))
                        d = T(0);
                      else if (v >= T(3))
                        d = T(1);
                      else
                        d = (T(2) * v + T(3)) / T(6);
                      gx[i] += dy[i] * d;
                    }
                  },
                  "hardswish");
}

// ------------------------------------------------------------------- softmax

// Numerically stable softmax over the trailing dimension.
template <typename T>
Var<T> softmax_lastdim(Graph<T>& g, Var<T> x) {
  const int64_t C = x->value.shape().back();
  const int64_t R = x->value.numel() / C;
  Tensor<T> out(x->value.shape());
  const T* px = x->value.data();
  T* po = out.data();
  for (int64_t r = 0; r < R; ++r) {
    const T* xr = px + r * C;
    T* yr = po + r * C;
    T m = xr[0];
    for (int64_t c = 1; c < C; ++c) m = std::max(m, xr[c]);
    T s = T(0);
    for (int64_t c = 0; c < C; ++c) {
      yr[c] = std::exp(xr[c] - m);
      s += yr[c];
    }
    const T inv = T(1) / s;
    for (int64_t c = 0; c < C; ++c) yr[c] *= inv;
  }
  auto saved = std::make_shared<Tensor<T>>(out);  // shares buffer with out
  return g.record(std::move(out), {x},
                  [x, saved, R, C](Node<T>& node) {
                    const T* dy = node.grad.data();
                    const T* y = saved->data();
                    T* gx = x->ensure_grad().data();
                    for (int64_t r = 0; r < R; ++r) {
                      const T* dyr = dy + r * C;
                      const T* yr = y + r * C;
                      T dot = T(0);
                      for (int64_t c = 0; c < C; ++c) dot += dyr[c] * yr[c];
                      T* gxr = gx + r * C;
                      for (int64_t c = 0; c < C; ++c) gxr[c] += yr[c] * (dyr[c] - dot);
                    }
                  },
                  "softmax");
}

template <typename T>
Var<T> log_softmax_lastdim(Graph<T>& g, Var<T> x) {
  const int64_t C = x->value.shape().back();
  const int64_t R = x->value.numel() / C;
  Tensor<T> out(x->value.shape());
  const T* px = x->value.data();
  T* po = out.data();
  for (int64_t r = 0; r < R; ++r) {
    const T* xr = px + r * C;
    T* yr = po + r * C;
    T m = xr[0];
    for (int64_t c = 1; c < C; ++c) m = std::max(m, xr[c]);
    T s = T(0);
    for (int64_t c = 0; c < C; ++c) s += std::exp(xr[c] - m);
    const T lse = m + std::log(s);
    for (int64_t c = 0; c < C; ++c) yr[c] = xr[c] - lse;
  }
  auto saved = std::make_shared<Tensor<T>>(out);
  return g.record(std::move(out), {x},
                  [x, saved, R, C](Node<T>& node) {
                    const T* dy = node.grad.data();
                    const T* y = saved->data();
                    T* gx = x->ensure_grad().data();
                    for (int64_t r = 0; r < R; ++r) {
                      const T* dyr = dy + r * C;
                      const T* yr = y + r * C;
                      T s = T(0);
                      for (int64_t c = 0; c < C; ++c) s += dyr[c];
                      T* gxr = gx + r * C;
                      for (int64_t c = 0; c < C; ++c) gxr[c] += dyr[c] - std::exp(yr[c]) * s;
                    }
                  },
                  "log_softmax");
}

// -------------------------------------------------------------------- dropout

// Inverted dropout; the mask is a pure function of (seed, stream, element), so
// replays are bitwise identical. Identity in inference graphs.
template <typename T>
Var<T> dropout(Graph<T>& g, Var<T> x, double p, uint64_t seed, uint64_t stream) {
  if (!g.training() || p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  const int64_t n = x->value.numel();
  auto mask = std::make_shared<Tensor<T>>(x->value.shape());
  Tensor<T> out(x->value.shape());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  Rng rng(seed, stream);
  const T* px = x->value.data();
  T* pm = mask->data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) {
    const bool keep = rng.uniform() >= p;
    pm[i] = keep ? keep_scale : T(0);
    po[i] = px[i] * pm[i];
  }
  return g.record(std::move(out), {x},
                  [x, mask](Node<T>& node) {
                    const T* dy = node.grad.data();
                    const T* pm = mask->data();
                    T* gx = x->ensure_grad().data();
                    for (int64_t i = 0; i < node.grad.numel(); ++i) gx[i] += dy[i] * pm[i];
                  },
                  "dropout");
}

// --------------------------------------------------------------- pooling

// Mean over the height axis of NCHW input: [B,C,H,W] -> [B,C,1,W].
template <typename T>
Var<T> pool_height_to_one(Graph<T>& g, Var<T> x) {
  const int64_t B = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2),
                W = x->value.dim(3);
  Tensor<T> out({B, C, 1, W});
  const T* px = x->value.data();
  T* po = out.data();
  const T inv = T(1) / static_cast<T>(H);
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const T* xc = px + bc * H * W;
    T* oc = po + bc * W;
    for (int64_t w = 0; w < W; ++w) {
      T s = T(0);
      for (int64_t h = 0; h < H; ++h) s += xc[h * W + w];
      oc[w] = s * inv;
    }
  }
  return g.record(std::move(out), {x},
                  [x, B, C, H, W](Node<T>& node) {
                    const T* dy = node.grad.data();
                    T* gx = x->ensure_grad().data();
                    const T inv = T(1) / static_cast<T>(H);
                    for (int64_t bc = 0; bc < B * C; ++bc) {
                      const T* dyc = dy + bc * W;
                      T* gxc = gx + bc * H * W;
                      for (int64_t h = 0; h < H; ++h)
                        for (int64_t w = 0; w < W; ++w) gxc[h * W + w] += dyc[w] * inv;
                    }
                  },
                  "pool_height_to_one");
}

}  // namespace sviptr::ops

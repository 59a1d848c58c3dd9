#include "sviptr/flops.hpp"

#include "sviptr/ops.hpp"

namespace sviptr {

namespace {

int64_t linear_params(int64_t out, int64_t in) { return out * in + out; }
int64_t ln_params(int64_t c) { return 2 * c; }

struct Counter {
  int64_t params = 0;
  int64_t macs = 0;

  void linear(int64_t out, int64_t in, int64_t tokens) {
    params += linear_params(out, in);
    macs += out * in * tokens;
  }
  void conv(int64_t cout, int64_t cin_per_group, int64_t k, int64_t out_positions) {
    params += cout * cin_per_group * k * k + cout;
    macs += cout * cin_per_group * k * k * out_positions;
  }
  void ln(int64_t c) { params += ln_params(c); }
};

// Self-attention matrix products: QK^T and (attention)V, each L_q * L_k * dh
// MACs per head. `groups` is the number of independent attention windows per
// image (1 for global attention).
int64_t attn_macs(int64_t heads, int64_t groups, int64_t lq, int64_t lk, int64_t dh) {
  return 2 * heads * groups * lq * lk * dh;
}

void count_mixer(Counter& c, AttnKind kind, int64_t dim, int64_t heads, int stripe, int sr,
                 PeKind pe, int64_t H, int64_t W) {
  const int64_t L = H * W;
  const int64_t dh = dim / heads;
  switch (kind) {
    case AttnKind::CSWin: {
      c.linear(3 * dim, dim, L);
      const int64_t nh_h = heads / 2, nh_v = heads - nh_h;
      if (nh_h > 0) {
        const int64_t sw = (H % stripe == 0) ? stripe : 1;
        c.macs += attn_macs(nh_h, H / sw, sw * W, sw * W, dh);
      }
      if (nh_v > 0) {
        const int64_t sw = (W % stripe == 0) ? stripe : 1;
        c.macs += attn_macs(nh_v, W / sw, H * sw, H * sw, dh);
      }
      if (pe == PeKind::LePE) c.conv(dim, 1, 3, L);
      c.linear(dim, dim, L);
      break;
    }
    case AttnKind::DMaSA: {
      c.linear(dim, dim, L);  // q
      c.linear(dim, dim, L);  // k
      c.linear(dim, dim, L);  // v
      // width pass: H rows of WxW attention; height pass: W cols of HxH.
      c.macs += attn_macs(heads, H, W, W, dh);
      c.macs += attn_macs(heads, W, H, H, dh);
      c.conv(dim, 1, 3, L);  // local term on V
      c.linear(dim, dim, L);
      break;
    }
    case AttnKind::MHSA: {
      c.linear(3 * dim, dim, L);
      c.macs += attn_macs(heads, 1, L, L, dh);
      if (pe == PeKind::LePE) c.conv(dim, 1, 3, L);
      c.linear(dim, dim, L);
      break;
    }
    case AttnKind::OSRA: {
      c.linear(dim, dim, L);  // q
      const int64_t k = 2 * sr - 1;
      const int64_t Hr = ops::conv_out_extent(H, static_cast<int>(k), sr, sr - 1);
      const int64_t Wr = ops::conv_out_extent(W, static_cast<int>(k), sr, sr - 1);
      const int64_t Lr = Hr * Wr;
      c.conv(dim, 1, k, Lr);  // depthwise reduction
      c.ln(dim);              // reduced-token norm
      c.linear(2 * dim, dim, Lr);
      c.macs += attn_macs(heads, 1, L, Lr, dh);
      c.linear(dim, dim, L);
      break;
    }
  }
}

void count_ffn(Counter& c, int64_t dim, int64_t L) {
  c.ln(dim);
  c.linear(4 * dim, dim, L);
  c.linear(dim, 4 * dim, L);
}

void count_series_block(Counter& c, AttnKind kind, int64_t dim, int64_t heads, int stripe, int sr,
                        PeKind pe, int64_t H, int64_t W, bool with_ffn) {
  const int64_t L = H * W;
  if (pe == PeKind::CPE) c.conv(dim, 1, 3, L);
  c.ln(dim);
  count_mixer(c, kind, dim, heads, stripe, sr, pe, H, W);
  if (with_ffn) count_ffn(c, dim, L);
}

void count_parallel_block(Counter& c, AttnKind local, AttnKind global, int64_t dim, int64_t heads,
                          int stripe, int sr, PeKind pe, int64_t H, int64_t W) {
  const int64_t L = H * W;
  if (pe == PeKind::CPE) c.conv(dim, 1, 3, L);
  c.ln(dim);
  count_mixer(c, local, dim / 2, heads / 2, stripe, sr, pe, H, W);
  count_mixer(c, global, dim / 2, heads / 2, stripe, sr, pe, H, W);
  count_ffn(c, dim, L);
}

}  // namespace

FlopReport analyze_model(const VariantConfig& cfg, int64_t input_height, int64_t input_width) {
  cfg.validate();
  Counter c;
  const auto& p = cfg.perm;

  FlopReport r;
  int64_t section_start = 0;
  auto mark = [&](const char* name) {
    r.section_macs.emplace_back(name, c.macs - section_start);
    section_start = c.macs;
  };

  // Patch embed: two stride-2 convolutions with BN affines.
  int64_t H = ops::conv_out_extent(input_height, 3, 2, 1);
  int64_t W = ops::conv_out_extent(input_width, 3, 2, 1);
  c.conv(cfg.channels[0] / 2, 3, 3, H * W);
  c.params += ln_params(cfg.channels[0] / 2);  // bn1 affine
  H = ops::conv_out_extent(H, 3, 2, 1);
  W = ops::conv_out_extent(W, 3, 2, 1);
  c.conv(cfg.channels[0], cfg.channels[0] / 2, 3, H * W);
  c.params += ln_params(cfg.channels[0]);  // bn2 affine

  if (cfg.pe == PeKind::APE) c.params += (input_height / 4) * (input_width / 4) * cfg.channels[0];
  mark("embed");

  // Stage 1: local blocks.
  for (int64_t i = 0; i < cfg.depths[0]; ++i)
    count_series_block(c, local_attn_kind(p.stage1), cfg.channels[0], cfg.heads[0],
                       cfg.stripes[0], cfg.sr, cfg.pe, H, W, true);
  mark("stage1");

  // Middle stages with height reductions in between.
  for (int si = 1; si <= 2; ++si) {
    const int64_t cin = cfg.channels[static_cast<size_t>(si - 1)];
    const int64_t cout = cfg.channels[static_cast<size_t>(si)];
    H = ops::conv_out_extent(H, 3, 2, 1);
    c.conv(cout, cin, 3, H * W);
    c.ln(cout);
    mark(si == 1 ? "hdr1" : "hdr2");
    const int64_t n = cfg.depths[static_cast<size_t>(si)];
    if (p.middle_parallel) {
      for (int64_t i = 0; i < n; ++i)
        count_parallel_block(c, local_attn_kind(p.middle_local),
                             global_attn_kind(p.middle_global), cout,
                             cfg.heads[static_cast<size_t>(si)],
                             cfg.stripes[static_cast<size_t>(si)], cfg.sr, cfg.pe, H, W);
    } else {
      const int64_t nl = (n + 1) / 2;
      for (int64_t i = 0; i < n; ++i)
        count_series_block(c,
                           i < nl ? local_attn_kind(p.middle_local)
                                  : global_attn_kind(p.middle_global),
                           cout, cfg.heads[static_cast<size_t>(si)],
                           cfg.stripes[static_cast<size_t>(si)], cfg.sr, cfg.pe, H, W, true);
    }
    mark(si == 1 ? "stage2" : "stage3");
  }

  // Height pool to 1 and the attention-only final stage.
  c.linear(cfg.channels[3], cfg.channels[2], W);
  H = 1;
  mark("pool");
  for (int64_t i = 0; i < cfg.depths[3]; ++i)
    count_series_block(c, global_attn_kind(p.stage4), cfg.channels[3], cfg.heads[3],
                       cfg.stripes[3], cfg.sr, cfg.pe, H, W, false);
  mark("stage4");

  r.h_in = input_height;
  r.w_in = input_width;
  r.backbone_params = c.params;
  r.backbone_macs = c.macs;
  r.head_params = linear_params(cfg.num_classes, cfg.channels[3]);
  r.head_macs = cfg.num_classes * cfg.channels[3] * W;
  return r;
}

}  // namespace sviptr

#pragma once

// The recognition backbone: a four-stage pyramid over text-line images.
//
//   input [B, 3, H, W]
//     patch embed: two 3x3 stride-2 conv+BN+GELU      -> [B, C1, H/4, W/4]
//     (+ learned position table when configured)
//     stage 1: local blocks                            at  H/4
//     height reduction: 3x3 conv, stride (2,1), + LN   ->  H/8
//     stage 2: local/global or parallel blocks         at  H/8
//     height reduction                                 ->  H/16
//     stage 3: same family as stage 2                  at  H/16
//     height pool: mean over H, FC C3->C4, hardswish   ->  height 1
//     stage 4: attention-only global blocks            at  1 x W/4
//   features: [B, C4, 1, W/4]; logits: [B, W/4, num_classes]
//
// The per-frame linear classifier lives under the "head." prefix; backbone
// size statistics exclude it.

#include <array>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sviptr/attention.hpp"
#include "sviptr/interp.hpp"
#include "sviptr/ops.hpp"
#include "sviptr/registry.hpp"

namespace sviptr {

template <typename T>
struct BatchNormP {
  Var<T> gamma, beta, run_mean, run_var;

  static BatchNormP make(ParamStore<T>& ps, const std::string& prefix, int64_t C) {
    BatchNormP bn;
    bn.gamma = ps.add(prefix + ".gamma", Tensor<T>::full({C}, T(1)));
    bn.beta = ps.add(prefix + ".beta", Tensor<T>({C}));
    bn.run_mean = ps.add_buffer(prefix + ".running_mean", Tensor<T>({C}));
    bn.run_var = ps.add_buffer(prefix + ".running_var", Tensor<T>::full({C}, T(1)));
    return bn;
  }

  Var<T> forward(Graph<T>& g, Var<T> x) const {
    return ops::batch_norm2d(g, x, gamma, beta, run_mean, run_var);
  }
};

template <typename T>
struct Conv2dP {
  Var<T> w, b;
  ops::ConvSpec spec;

  static Conv2dP make(ParamStore<T>& ps, const std::string& prefix, int64_t cout, int64_t cin,
                      int kh, int kw, ops::ConvSpec spec, Rng& rng) {
    Tensor<T> wv({cout, cin / spec.groups, kh, kw});
    for (int64_t i = 0; i < wv.numel(); ++i) wv[i] = static_cast<T>(rng.trunc_normal(0.02));
    Conv2dP c;
    c.w = ps.add(prefix + ".weight", std::move(wv));
    c.b = ps.add(prefix + ".bias", Tensor<T>({cout}));
    c.spec = spec;
    return c;
  }

  Var<T> forward(Graph<T>& g, Var<T> x) const { return ops::conv2d(g, x, w, b, spec); }
};

// Two stride-2 convolutions: 3 -> C/2 -> C, each followed by BN and GELU.
template <typename T>
struct PatchEmbed {
  Conv2dP<T> conv1, conv2;
  BatchNormP<T> bn1, bn2;

  static PatchEmbed make(ParamStore<T>& ps, int64_t C, Rng& rng) {
    ops::ConvSpec s2;
    s2.sh = s2.sw = 2;
    s2.ph = s2.pw = 1;
    PatchEmbed pe;
    pe.conv1 = Conv2dP<T>::make(ps, "embed.conv1", C / 2, 3, 3, 3, s2, rng);
    pe.bn1 = BatchNormP<T>::make(ps, "embed.bn1", C / 2);
    pe.conv2 = Conv2dP<T>::make(ps, "embed.conv2", C, C / 2, 3, 3, s2, rng);
    pe.bn2 = BatchNormP<T>::make(ps, "embed.bn2", C);
    return pe;
  }

  Var<T> forward(Graph<T>& g, Var<T> x) const {
    x = ops::gelu(g, bn1.forward(g, conv1.forward(g, x)));
    return ops::gelu(g, bn2.forward(g, conv2.forward(g, x)));
  }
};

// Height-halving bridge between stages: 3x3 conv with stride (2,1), then LN.
template <typename T>
struct HeightReduce {
  Conv2dP<T> conv;
  LayerNormP<T> ln;
  int64_t cout = 0;

  static HeightReduce make(ParamStore<T>& ps, const std::string& prefix, int64_t cout,
                           int64_t cin, Rng& rng) {
    ops::ConvSpec s;
    s.sh = 2;
    s.sw = 1;
    s.ph = s.pw = 1;
    HeightReduce hr;
    hr.conv = Conv2dP<T>::make(ps, prefix + ".conv", cout, cin, 3, 3, s, rng);
    hr.ln = LayerNormP<T>::make(ps, prefix + ".ln", cout);
    hr.cout = cout;
    return hr;
  }

  // [B, Cin, H, W] -> sequence [B, (H'), W, Cout] tokens with H' = ceil(H/2).
  Var<T> forward(Graph<T>& g, Var<T> x_nchw, int64_t& H, int64_t /*W*/) const {
    auto y = conv.forward(g, x_nchw);
    H = y->value.dim(2);
    return ln.forward(g, nchw_to_seq(g, y));
  }
};

// Collapses the height axis: mean pool, FC to the stage-4 width, hardswish,
// dropout (training only).
template <typename T>
struct HeightPool {
  LinearP<T> fc;
  double drop = 0.1;

  static HeightPool make(ParamStore<T>& ps, int64_t cout, int64_t cin, Rng& rng) {
    HeightPool hp;
    hp.fc = LinearP<T>::make(ps, "pool.fc", cout, cin, rng);
    return hp;
  }

  Var<T> forward(Graph<T>& g, Var<T> x_nchw, uint64_t seed, uint64_t salt) const {
    auto pooled = ops::pool_height_to_one(g, x_nchw);  // [B, C, 1, W]
    auto seq = nchw_to_seq(g, pooled);                 // [B, W, C]
    auto y = ops::hardswish(g, fc.forward(g, seq));
    return ops::dropout(g, y, drop, seed, salt);
  }
};

template <typename T>
struct ModelOutput {
  Var<T> features;  // [B, C4, 1, W/4]
  Var<T> logits;    // [B, W/4, num_classes]
};

template <typename T>
class Model {
 public:
  ParamStore<T> store;

  static Model build(VariantConfig cfg, uint64_t seed, int64_t input_height = 32,
                     int64_t input_width = 96) {
    cfg.validate();
    if (cfg.channels[0] % 2)
      throw std::invalid_argument("model: stage-1 channels must be even for the patch embed");
    if (input_height % 4 || input_width % 4)
      throw std::invalid_argument("model: input height and width must be multiples of 4");
    Model m;
    m.cfg_ = cfg;
    m.seed_ = seed;
    Rng rng(seed, 0);
    m.embed_ = PatchEmbed<T>::make(m.store, cfg.channels[0], rng);
    if (cfg.pe == PeKind::APE) {
      m.ape_h_ = input_height / 4;
      m.ape_w_ = input_width / 4;
      Tensor<T> tab({1, m.ape_h_ * m.ape_w_, cfg.channels[0]});
      for (int64_t i = 0; i < tab.numel(); ++i)
        tab[i] = static_cast<T>(rng.trunc_normal(0.02));
      m.pos_embed_ = m.store.add("pos_embed", std::move(tab));
    }

    const auto& p = cfg.perm;
    auto series_stage = [&](int si, AttnKind kind, bool with_ffn) {
      std::vector<Block<T>> blocks;
      for (int64_t bi = 0; bi < cfg.depths[static_cast<size_t>(si)]; ++bi)
        blocks.push_back(Block<T>::make_series(
            m.store, "stage" + std::to_string(si + 1) + ".block" + std::to_string(bi), kind,
            cfg.channels[static_cast<size_t>(si)], cfg.heads[static_cast<size_t>(si)],
            cfg.stripes[static_cast<size_t>(si)], cfg.sr, cfg.pe, with_ffn, rng));
      return blocks;
    };
    auto middle_stage = [&](int si) {
      std::vector<Block<T>> blocks;
      const int64_t n = cfg.depths[static_cast<size_t>(si)];
      const std::string stem = "stage" + std::to_string(si + 1) + ".block";
      if (p.middle_parallel) {
        for (int64_t bi = 0; bi < n; ++bi)
          blocks.push_back(Block<T>::make_parallel(
              m.store, stem + std::to_string(bi), local_attn_kind(p.middle_local),
              global_attn_kind(p.middle_global), cfg.channels[static_cast<size_t>(si)],
              cfg.heads[static_cast<size_t>(si)], cfg.stripes[static_cast<size_t>(si)], cfg.sr,
              cfg.pe, rng));
      } else {
        const int64_t nl = (n + 1) / 2;  // locals first, then globals
        for (int64_t bi = 0; bi < n; ++bi)
          blocks.push_back(Block<T>::make_series(
              m.store, stem + std::to_string(bi),
              bi < nl ? local_attn_kind(p.middle_local) : global_attn_kind(p.middle_global),
              cfg.channels[static_cast<size_t>(si)], cfg.heads[static_cast<size_t>(si)],
              cfg.stripes[static_cast<size_t>(si)], cfg.sr, cfg.pe, true, rng));
      }
      return blocks;
    };

    m.stages_[0] = series_stage(0, local_attn_kind(p.stage1), true);
    m.hdr1_ = HeightReduce<T>::make(m.store, "hdr1", cfg.channels[1], cfg.channels[0], rng);
    m.stages_[1] = middle_stage(1);
    m.hdr2_ = HeightReduce<T>::make(m.store, "hdr2", cfg.channels[2], cfg.channels[1], rng);
    m.stages_[2] = middle_stage(2);
    m.pool_ = HeightPool<T>::make(m.store, cfg.channels[3], cfg.channels[2], rng);
    m.stages_[3] = series_stage(3, global_attn_kind(p.stage4), false);
    m.head_ = LinearP<T>::make(m.store, "head.fc", cfg.num_classes, cfg.channels[3], rng);
    return m;
  }

  const VariantConfig& config() const { return cfg_; }
  uint64_t seed() const { return seed_; }

  // `dropout_salt` varies per training step so pooled-feature dropout masks
  // differ between steps but replay identically for the same step.
  ModelOutput<T> forward(Graph<T>& g, Var<T> images, uint64_t dropout_salt = 0,
                         std::vector<BlockProbe<T>>* probes = nullptr) {
    const int64_t B = images->value.dim(0);
    auto x = embed_.forward(g, images);  // [B, C1, H/4, W/4]
    int64_t H = x->value.dim(2), W = x->value.dim(3);
    auto seq = nchw_to_seq(g, x);
    if (pos_embed_) seq = add_position(g, seq, H, W);
    for (const auto& b : stages_[0]) seq = b.forward(g, seq, B, H, W, probes);
    seq = hdr1_.forward(g, seq_to_nchw(g, seq, B, H, W, cfg_.channels[0]), H, W);
    for (const auto& b : stages_[1]) seq = b.forward(g, seq, B, H, W, probes);
    seq = hdr2_.forward(g, seq_to_nchw(g, seq, B, H, W, cfg_.channels[1]), H, W);
    for (const auto& b : stages_[2]) seq = b.forward(g, seq, B, H, W, probes);
    seq = pool_.forward(g, seq_to_nchw(g, seq, B, H, W, cfg_.channels[2]),
                        seed_ ^ 0x9e3779b97f4a7c15ull, dropout_salt);
    H = 1;
    for (const auto& b : stages_[3]) seq = b.forward(g, seq, B, H, W, probes);
    ModelOutput<T> out;
    out.features = seq_to_nchw(g, seq, B, 1, W, cfg_.channels[3]);
    out.logits = head_.forward(g, seq);
    return out;
  }

  // Learned-parameter count for the backbone alone (classifier excluded).
  int64_t backbone_params() const {
    int64_t n = 0;
    for (const auto& [name, p] : store.params)
      if (name.rfind("head.", 0) != 0) n += p->value.numel();
    return n;
  }

 private:
  Var<T> add_position(Graph<T>& g, Var<T> seq, int64_t H, int64_t W) {
    if (H == ape_h_ && W == ape_w_) return ops::add_bcast_batch(g, seq, pos_embed_);
    if (!ape_warned_) {
      std::cerr << "[sviptr] position table is " << ape_h_ << "x" << ape_w_
                << " but the feature grid is " << H << "x" << W
                << "; resizing bilinearly (no gradient flows to the table)\n";
      ape_warned_ = true;
    }
    Tensor<T> tab = pos_embed_->value.reshaped({ape_h_, ape_w_, cfg_.channels[0]});
    Tensor<T> resized = bilinear_resize_hwc(tab, ape_h_, ape_w_, H, W);
    auto cst = make_leaf<T>(resized.reshaped({1, H * W, cfg_.channels[0]}), "pos_embed_resized");
    return ops::add_bcast_batch(g, seq, cst);
  }

  VariantConfig cfg_;
  uint64_t seed_ = 0;
  PatchEmbed<T> embed_;
  Var<T> pos_embed_;  // null unless APE
  int64_t ape_h_ = 0, ape_w_ = 0;
  bool ape_warned_ = false;
  std::array<std::vector<Block<T>>, 4> stages_;
  HeightReduce<T> hdr1_, hdr2_;
  HeightPool<T> pool_;
  LinearP<T> head_;
};

}  // namespace sviptr

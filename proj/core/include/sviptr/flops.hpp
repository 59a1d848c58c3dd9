#pragma once

// Analytic parameter and multiply-accumulate counters. These walk the same
// structure the model builder creates, so the parameter numbers must match a
// built ParamStore exactly (the tests enforce this).
//
// MAC convention: one MAC per weight multiply in convolutions and linear
// layers, plus the two attention matrix products (QK^T and attention-times-V).
// Normalisations, activations, softmax and bias additions are not counted.
// Counts are for batch size 1 at an explicit input resolution.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sviptr/registry.hpp"

namespace sviptr {

struct FlopReport {
  int64_t h_in = 0, w_in = 0;
  int64_t backbone_params = 0;  // learned parameters, classifier excluded
  int64_t head_params = 0;      // classifier only
  int64_t backbone_macs = 0;    // per image at (h_in, w_in)
  int64_t head_macs = 0;
  // Per-section MAC subtotals in network order (embed, stage1, hdr1, stage2,
  // hdr2, stage3, pool, stage4); the classifier is reported via head_macs.
  std::vector<std::pair<std::string, int64_t>> section_macs;

  int64_t total_params() const { return backbone_params + head_params; }
  int64_t total_macs() const { return backbone_macs + head_macs; }
};

FlopReport analyze_model(const VariantConfig& cfg, int64_t input_height = 32,
                         int64_t input_width = 96);

}  // namespace sviptr

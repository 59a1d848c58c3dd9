#include "sviptr/registry.hpp"

#include <stdexcept>

namespace sviptr {

void VariantConfig::validate() const {
  for (int i = 0; i < 4; ++i) {
    if (channels[static_cast<size_t>(i)] < 1 || depths[static_cast<size_t>(i)] < 1 ||
        heads[static_cast<size_t>(i)] < 1)
      throw std::invalid_argument("variant: channels, depths and heads must be positive");
    if (channels[static_cast<size_t>(i)] % heads[static_cast<size_t>(i)] != 0)
      throw std::invalid_argument("variant: stage " + std::to_string(i + 1) + " channels (" +
                                  std::to_string(channels[static_cast<size_t>(i)]) +
                                  ") not divisible by heads (" +
                                  std::to_string(heads[static_cast<size_t>(i)]) + ")");
    if (stripes[static_cast<size_t>(i)] < 1)
      throw std::invalid_argument("variant: stripe widths must be positive");
  }
  if (perm.middle_parallel) {
    for (int i = 1; i <= 2; ++i) {
      if (channels[static_cast<size_t>(i)] % 2 || heads[static_cast<size_t>(i)] % 2)
        throw std::invalid_argument(
            "variant: parallel middle stages need even channels and heads (stage " +
            std::to_string(i + 1) + ")");
      const int64_t half_c = channels[static_cast<size_t>(i)] / 2;
      const int64_t half_h = heads[static_cast<size_t>(i)] / 2;
      if (half_c % half_h != 0)
        throw std::invalid_argument("variant: parallel branch channels not divisible by heads");
    }
  }
  if (sr < 1) throw std::invalid_argument("variant: reduction stride must be positive");
  if (num_classes < 2)
    throw std::invalid_argument("variant: need at least one symbol plus blank");
}

VariantConfig registry_variant(const std::string& name) {
  VariantConfig v;
  v.name = name;
  if (name == "sviptr-v1-t") {
    v.channels = {64, 128, 256, 192};
    v.depths = {3, 3, 3, 3};
    v.heads = {2, 4, 4, 8};
    v.perm = parse_permutation("[L1][L1G2][G1]");
  } else if (name == "sviptr-v1-l") {
    v.channels = {192, 256, 512, 384};
    v.depths = {3, 7, 2, 9};
    v.heads = {6, 8, 8, 16};
    v.perm = parse_permutation("[L2][L2G2][G1]");
  } else if (name == "sviptr-v2-t") {
    v.channels = {64, 128, 256, 192};
    v.depths = {3, 3, 3, 3};
    v.heads = {2, 4, 4, 8};
    v.perm = parse_permutation("[L1][L1//G2][G1]");
  } else if (name == "sviptr-v2-b") {
    v.channels = {128, 256, 384, 256};
    v.depths = {3, 6, 6, 9};
    v.heads = {4, 8, 8, 8};
    v.perm = parse_permutation("[L1][L1//G2][G1]");
  } else {
    throw std::invalid_argument("unknown variant '" + name +
                                "' (known: sviptr-v1-t, sviptr-v1-l, sviptr-v2-t, sviptr-v2-b)");
  }
  v.validate();
  return v;
}

std::vector<std::string> registry_names() {
  return {"sviptr-v1-t", "sviptr-v1-l", "sviptr-v2-t", "sviptr-v2-b"};
}

}  // namespace sviptr

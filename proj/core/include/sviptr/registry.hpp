#pragma once

// Named model variants and the structural configuration they expand to.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sviptr/attention.hpp"
#include "sviptr/permutation.hpp"

namespace sviptr {

struct VariantConfig {
  std::string name;  // registry name, or empty for a custom configuration
  std::array<int64_t, 4> channels{64, 128, 256, 192};
  std::array<int64_t, 4> depths{3, 3, 3, 3};
  std::array<int64_t, 4> heads{2, 4, 4, 8};
  Permutation perm;
  PeKind pe = PeKind::LePE;
  std::array<int, 4> stripes{1, 2, 2, 1};  // CSWin stripe width per stage
  int sr = 2;                              // OSRA reduction stride
  int64_t num_classes = 37;                // alphabet size + 1 for blank

  // Throws std::invalid_argument when the configuration is not buildable
  // (head counts must divide channels; parallel stages need even splits; ...).
  void validate() const;
};

// Known variants: sviptr-v1-t, sviptr-v1-l, sviptr-v2-t, sviptr-v2-b.
VariantConfig registry_variant(const std::string& name);
std::vector<std::string> registry_names();

}  // namespace sviptr

#pragma once

// Stage-permutation strings describe which mixer family runs in each part of
// the backbone:
//
//   [L<1|2>] [L<1|2>G<1|2>] [G<1|2>]         series middle stages
//   [L<1|2>] [L<1|2>//G<1|2>] [G<1|2>]       parallel middle stages
//
// L1 = CSWin, L2 = DMaSA (local mixers); G1 = MHSA, G2 = OSRA (global mixers).
// The first bracket is the stage-1 mixer, the middle bracket covers stages 2
// and 3 (series: first half local blocks then global blocks; parallel: every
// block runs both, channel-split), and the last bracket is the stage-4 mixer.

#include <stdexcept>
#include <string>

#include "sviptr/attention.hpp"

namespace sviptr {

enum class LocalKind { CSWin = 1, DMaSA = 2 };
enum class GlobalKind { MHSA = 1, OSRA = 2 };

inline AttnKind local_attn_kind(LocalKind k) {
  return k == LocalKind::CSWin ? AttnKind::CSWin : AttnKind::DMaSA;
}
inline AttnKind global_attn_kind(GlobalKind k) {
  return k == GlobalKind::MHSA ? AttnKind::MHSA : AttnKind::OSRA;
}

struct Permutation {
  LocalKind stage1 = LocalKind::CSWin;
  LocalKind middle_local = LocalKind::CSWin;
  GlobalKind middle_global = GlobalKind::OSRA;
  bool middle_parallel = false;
  GlobalKind stage4 = GlobalKind::MHSA;

  bool operator==(const Permutation&) const = default;
};

struct PermutationError : std::runtime_error {
  size_t pos;  // byte offset into the input string
  PermutationError(const std::string& msg, size_t pos_)
      : std::runtime_error(msg + " (at position " + std::to_string(pos_) + ")"), pos(pos_) {}
};

// Throws PermutationError on malformed input. format(parse(s)) == s for every
// valid s.
Permutation parse_permutation(const std::string& s);
std::string format_permutation(const Permutation& p);

}  // namespace sviptr

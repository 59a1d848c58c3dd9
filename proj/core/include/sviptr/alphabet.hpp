#pragma once

// Label alphabet. Class 0 is the CTC blank; symbol i maps to class i + 1.

#include <string>
#include <vector>

namespace sviptr {

struct Alphabet {
  std::vector<std::string> symbols;  // UTF-8, one entry per class (blank excluded)

  // Digits then lowercase letters: "0..9a..z" (36 symbols, 37 classes).
  static Alphabet default_alphabet();

  // One symbol per line, UTF-8, in class order. Blank lines and duplicate
  // symbols are rejected.
  static Alphabet from_file(const std::string& path);

  int64_t num_classes() const { return static_cast<int64_t>(symbols.size()) + 1; }

  // Joins the symbols for a class-label sequence (no blanks expected).
  std::string decode(const std::vector<int>& labels) const;

  // Greedy longest-match encoding; returns false if the text contains a
  // substring no symbol covers.
  bool encode(const std::string& text, std::vector<int>* out) const;
};

}  // namespace sviptr

#include "sviptr/alphabet.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace sviptr {

Alphabet Alphabet::default_alphabet() {
  Alphabet a;
  for (char c = '0'; c <= '9'; ++c) a.symbols.emplace_back(1, c);
  for (char c = 'a'; c <= 'z'; ++c) a.symbols.emplace_back(1, c);
  return a;
}

Alphabet Alphabet::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("alphabet: cannot open " + path);
  Alphabet a;
  std::set<std::string> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty())
      throw std::runtime_error("alphabet: empty line " + std::to_string(lineno) + " in " + path);
    if (!seen.insert(line).second)
      throw std::runtime_error("alphabet: duplicate symbol '" + line + "' at line " +
                               std::to_string(lineno) + " in " + path);
    a.symbols.push_back(line);
  }
  if (a.symbols.empty()) throw std::runtime_error("alphabet: no symbols in " + path);
  return a;
}

std::string Alphabet::decode(const std::vector<int>& labels) const {
  std::string out;
  for (int lab : labels) {
    if (lab < 1 || lab > static_cast<int>(symbols.size()))
      throw std::out_of_range("alphabet: label " + std::to_string(lab) + " out of range");
    out += symbols[static_cast<size_t>(lab - 1)];
  }
  return out;
}

bool Alphabet::encode(const std::string& text, std::vector<int>* out) const {
  out->clear();
  size_t pos = 0;
  while (pos < text.size()) {
    int best = -1;
    size_t best_len = 0;
    for (size_t i = 0; i < symbols.size(); ++i) {
      const std::string& s = symbols[i];
      if (s.size() > best_len && text.compare(pos, s.size(), s) == 0) {
        best = static_cast<int>(i) + 1;
        best_len = s.size();
      }
    }
    if (best < 0) return false;
    out->push_back(best);
    pos += best_len;
  }
  return true;
}

}  // namespace sviptr

#include "sviptr/permutation.hpp"

namespace sviptr {

namespace {

struct Cursor {
  const std::string& s;
  size_t pos = 0;

  char peek() const { return pos < s.size() ? s[pos] : '\0'; }

  void expect(char c, const char* what) {
    if (peek() != c)
      throw PermutationError(std::string("expected '") + c + "' " + what, pos);
    ++pos;
  }

  int digit12(const char* what) {
    const char c = peek();
    if (c != '1' && c != '2')
      throw PermutationError(std::string("expected '1' or '2' after ") + what, pos);
    ++pos;
    return c - '0';
  }
};

}  // namespace

Permutation parse_permutation(const std::string& s) {
  Cursor c{s};
  Permutation p;

  c.expect('[', "to open the stage-1 group");
  c.expect('L', "for the stage-1 local mixer");
  p.stage1 = static_cast<LocalKind>(c.digit12("'L'"));
  c.expect(']', "to close the stage-1 group");

  c.expect('[', "to open the middle group");
  c.expect('L', "for the middle local mixer");
  p.middle_local = static_cast<LocalKind>(c.digit12("'L'"));
  if (c.peek() == '/') {
    ++c.pos;
    c.expect('/', "to complete the '//' parallel marker");
    p.middle_parallel = true;
  }
  c.expect('G', "for the middle global mixer");
  p.middle_global = static_cast<GlobalKind>(c.digit12("'G'"));
  c.expect(']', "to close the middle group");

  c.expect('[', "to open the stage-4 group");
  c.expect('G', "for the stage-4 global mixer");
  p.stage4 = static_cast<GlobalKind>(c.digit12("'G'"));
  c.expect(']', "to close the stage-4 group");

  if (c.pos != s.size())
    throw PermutationError("trailing characters after permutation", c.pos);
  return p;
}

std::string format_permutation(const Permutation& p) {
  std::string out;
  out += "[L";
  out += static_cast<char>('0' + static_cast<int>(p.stage1));
  out += "][L";
  out += static_cast<char>('0' + static_cast<int>(p.middle_local));
  if (p.middle_parallel) out += "//";
  out += 'G';
  out += static_cast<char>('0' + static_cast<int>(p.middle_global));
  out += "][G";
  out += static_cast<char>('0' + static_cast<int>(p.stage4));
  out += ']';
  return out;
}

}  // namespace sviptr

#include <cctype>
#include <map>
#include <set>

#include "retrokit/chem.hpp"

namespace retro::chem {

namespace {

struct RingOpen {
  int atom;
  std::optional<BondOrder> order;
  size_t offset;
};

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

struct Parser {
  const std::string& s;
  const ParseOptions& opts;
  std::vector<std::string>* warnings;

  MolGraph g;
  std::vector<size_t> atom_offsets;
  size_t i = 0;

  int prev = -1;
  std::optional<BondOrder> pending;
  size_t pending_offset = 0;
  std::vector<std::pair<int, size_t>> branch_stack;  // (saved prev, '(' offset)
  std::map<int, RingOpen> rings;
  std::set<std::pair<int, int>> bonded_pairs;

  Parser(const std::string& s_, const ParseOptions& o, std::vector<std::string>* w)
      : s(s_), opts(o), warnings(w) {}

  [[noreturn]] void fail(ParseErrorKind k, size_t off, const std::string& msg) {
    throw ParseError(k, off, msg);
  }

  void add_bond(int a, int b, BondOrder order, size_t off) {
    if (a == b) fail(ParseErrorKind::InvalidRingBond, off, "ring bond to the same atom");
    auto key = std::minmax(a, b);
    if (!bonded_pairs.insert({key.first, key.second}).second)
      fail(ParseErrorKind::InvalidRingBond, off, "duplicate bond between atoms");
    g.bonds.push_back({a, b, order});
  }

  BondOrder default_order(int a, int b) const {
    return (g.atoms[a].aromatic && g.atoms[b].aromatic) ? BondOrder::Aromatic
                                                        : BondOrder::Single;
  }

  void attach_atom(Atom atom, size_t off) {
    g.atoms.push_back(std::move(atom));
    atom_offsets.push_back(off);
    int idx = g.atom_count() - 1;
    if (prev >= 0) {
      BondOrder order = pending ? *pending : default_order(prev, idx);
      add_bond(prev, idx, order, off);
    } else if (pending) {
      fail(ParseErrorKind::InvalidBond, pending_offset, "bond with no preceding atom");
    }
    pending.reset();
    prev = idx;
  }

  void handle_ring_digit(int digit, size_t off) {
    if (prev < 0) fail(ParseErrorKind::InvalidRingBond, off, "ring digit before any atom");
    auto it = rings.find(digit);
    if (it == rings.end()) {
      rings[digit] = RingOpen{prev, pending, off};
      pending.reset();
      return;
    }
    RingOpen open = it->second;
    rings.erase(it);
    std::optional<BondOrder> order = open.order;
    if (pending) {
      if (order && *order != *pending)
        fail(ParseErrorKind::InvalidRingBond, off, "ring bond order mismatch");
      order = pending;
    }
    add_bond(open.atom, prev, order ? *order : default_order(open.atom, prev), off);
    pending.reset();
  }

  Atom parse_bracket(size_t start) {
    size_t j = s.find(']', start);
    if (j == std::string::npos)
      fail(ParseErrorKind::InvalidAtomToken, start, "unterminated bracket atom");
    size_t p = start + 1;
    Atom a;

    if (p < j && is_digit(s[p])) {
      int iso = 0;
      while (p < j && is_digit(s[p])) iso = iso * 10 + (s[p++] - '0');
      if (iso <= 0) fail(ParseErrorKind::InvalidAtomToken, start, "isotope must be positive");
      a.isotope = iso;
    }

    if (p >= j) fail(ParseErrorKind::InvalidAtomToken, start, "missing element symbol");
    if (is_upper(s[p])) {
      std::string two, one(1, s[p]);
      if (p + 1 < j && is_lower(s[p + 1])) two = s.substr(p, 2);
      if (!two.empty() && is_periodic_symbol(two)) {
        a.element = two;
        p += 2;
      } else if (is_periodic_symbol(one)) {
        a.element = one;
        p += 1;
      } else {
        fail(ParseErrorKind::InvalidAtomToken, start, "unknown element symbol");
      }
    } else if (is_lower(s[p])) {
      std::string two;
      if (p + 1 < j && is_lower(s[p + 1])) two = s.substr(p, 2);
      if (two == "se" || two == "as") {
        a.element = std::string(1, std::toupper(two[0])) + two.substr(1);
        p += 2;
      } else if (std::string("bcnops").find(s[p]) != std::string::npos) {
        a.element = std::string(1, std::toupper(s[p]));
        p += 1;
      } else {
        fail(ParseErrorKind::InvalidAtomToken, start, "unknown aromatic symbol");
      }
      a.aromatic = true;
      if (!aromatic_capable(a.element))
        fail(ParseErrorKind::InvalidAtomToken, start, "element cannot be aromatic");
    } else {
      fail(ParseErrorKind::InvalidAtomToken, start, "missing element symbol");
    }

    // chirality markers are lexed and dropped; graph semantics ignore them
    while (p < j && s[p] == '@') ++p;
    if (p < j && (s[p] == 'T' || s[p] == 'A') && p > 0 && s[p - 1] == '@') {
      // @TH1 / @AL1 style tags
      while (p < j && (std::isalnum(static_cast<unsigned char>(s[p])))) ++p;
    }

    a.explicit_h = 0;
    if (p < j && s[p] == 'H') {
      ++p;
      int h = 1;
      if (p < j && is_digit(s[p])) {
        h = 0;
        while (p < j && is_digit(s[p])) h = h * 10 + (s[p++] - '0');
      }
      a.explicit_h = h;
    }

    if (p < j && (s[p] == '+' || s[p] == '-')) {
      char sign = s[p];
      int mag = 0;
      while (p < j && s[p] == sign) {
        ++mag;
        ++p;
      }
      if (mag == 1 && p < j && is_digit(s[p])) {
        mag = 0;
        while (p < j && is_digit(s[p])) mag = mag * 10 + (s[p++] - '0');
      }
      a.charge = sign == '+' ? mag : -mag;
    }

    if (p < j && s[p] == ':') {
      ++p;
      if (p >= j || !is_digit(s[p]))
        fail(ParseErrorKind::InvalidAtomToken, start, "atom map needs digits");
      int m = 0;
      while (p < j && is_digit(s[p])) m = m * 10 + (s[p++] - '0');
      a.atom_map = m;
    }

    if (p != j) fail(ParseErrorKind::InvalidAtomToken, start, "trailing characters in bracket");
    i = j + 1;
    return a;
  }

  void run() {
    if (s.empty()) fail(ParseErrorKind::EmptyInput, 0, "empty SMILES");
    while (i < s.size()) {
      size_t off = i;
      char c = s[i];
      if (c == '[') {
        attach_atom(parse_bracket(off), off);
      } else if (c == 'C' && i + 1 < s.size() && s[i + 1] == 'l') {
        i += 2;
        Atom a;
        a.element = "Cl";
        attach_atom(std::move(a), off);
      } else if (c == 'B' && i + 1 < s.size() && s[i + 1] == 'r') {
        i += 2;
        Atom a;
        a.element = "Br";
        attach_atom(std::move(a), off);
      } else if (std::string("BCNOSPFI").find(c) != std::string::npos) {
        ++i;
        Atom a;
        a.element = std::string(1, c);
        attach_atom(std::move(a), off);
      } else if (std::string("bcnosp").find(c) != std::string::npos) {
        ++i;
        Atom a;
        a.element = std::string(1, static_cast<char>(std::toupper(c)));
        a.aromatic = true;
        attach_atom(std::move(a), off);
      } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
        if (pending) fail(ParseErrorKind::InvalidBond, off, "two bond symbols in a row");
        switch (c) {
          case '=': pending = BondOrder::Double; break;
          case '#': pending = BondOrder::Triple; break;
          case ':': pending = BondOrder::Aromatic; break;
          default: pending = BondOrder::Single; break;  // -, /, \ (stereo ignored)
        }
        pending_offset = off;
        ++i;
      } else if (is_digit(c)) {
        ++i;
        handle_ring_digit(c - '0', off);
      } else if (c == '%') {
        if (i + 2 >= s.size() || !is_digit(s[i + 1]) || !is_digit(s[i + 2]))
          fail(ParseErrorKind::UnlexableCharacter, off, "%% needs two digits");
        int d = (s[i + 1] - '0') * 10 + (s[i + 2] - '0');
        i += 3;
        handle_ring_digit(d, off);
      } else if (c == '(') {
        if (prev < 0) fail(ParseErrorKind::UnbalancedParenthesis, off, "branch before any atom");
        branch_stack.push_back({prev, off});
        ++i;
      } else if (c == ')') {
        if (pending) fail(ParseErrorKind::InvalidBond, pending_offset, "dangling bond");
        if (branch_stack.empty())
          fail(ParseErrorKind::UnbalancedParenthesis, off, "unmatched ')'");
        prev = branch_stack.back().first;
        branch_stack.pop_back();
        ++i;
      } else if (c == '.') {
        if (pending) fail(ParseErrorKind::InvalidBond, pending_offset, "bond before '.'");
        prev = -1;
        ++i;
      } else {
        fail(ParseErrorKind::UnlexableCharacter, off,
             std::string("unexpected character '") + c + "'");
      }
    }
    if (pending) fail(ParseErrorKind::InvalidBond, pending_offset, "dangling bond at end");
    if (!branch_stack.empty())
      fail(ParseErrorKind::UnbalancedParenthesis, branch_stack.back().second, "unclosed '('");
    if (!rings.empty()) {
      const RingOpen& r = rings.begin()->second;
      fail(ParseErrorKind::UnclosedRingBond, r.offset, "ring bond never closed");
    }
    if (g.atoms.empty()) fail(ParseErrorKind::EmptyInput, 0, "no atoms");

    auto viol = valence_warnings(g);
    if (!viol.empty()) {
      if (opts.strict_valence)
        fail(ParseErrorKind::ValenceViolation, atom_offsets.empty() ? 0 : atom_offsets[0],
             viol.front());
      if (warnings)
        for (auto& w : viol) warnings->push_back(w);
    }
  }
};

}  // namespace

MolGraph parse_smiles(const std::string& s, const ParseOptions& opts,
                      std::vector<std::string>* warnings) {
  Parser p(s, opts, warnings);
  p.run();
  return std::move(p.g);
}

}  // namespace retro::chem

#include "retrokit/chem.hpp"

namespace retro::chem {

namespace {

bool single_char_token(char c) {
  switch (c) {
    case 'B': case 'C': case 'N': case 'O': case 'S': case 'P': case 'F': case 'I':
    case 'b': case 'c': case 'n': case 'o': case 's': case 'p':
    case '(': case ')': case '.': case '-': case '=': case '#': case ':':
    case '+': case '\\': case '/': case '@': case '?': case '>': case '*':
    case '$': case '~':
      return true;
    default:
      return c >= '0' && c <= '9';
  }
}

}  // namespace

// Longest-match lexer over the molecular-transformer token inventory:
// bracket blocks, Cl/Br, %nn ring closures, then single characters.
std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '[') {
      size_t j = s.find(']', i);
      if (j == std::string::npos)
        throw ParseError(ParseErrorKind::UnlexableCharacter, i, "unterminated bracket atom");
      out.push_back(s.substr(i, j - i + 1));
      i = j + 1;
    } else if (c == 'C' && i + 1 < s.size() && s[i + 1] == 'l') {
      out.push_back("Cl");
      i += 2;
    } else if (c == 'B' && i + 1 < s.size() && s[i + 1] == 'r') {
      out.push_back("Br");
      i += 2;
    } else if (c == '%') {
      if (i + 2 >= s.size() || !isdigit(static_cast<unsigned char>(s[i + 1])) ||
          !isdigit(static_cast<unsigned char>(s[i + 2])))
        throw ParseError(ParseErrorKind::UnlexableCharacter, i, "%% needs two digits");
      out.push_back(s.substr(i, 3));
      i += 3;
    } else if (single_char_token(c)) {
      out.push_back(std::string(1, c));
      ++i;
    } else {
      throw ParseError(ParseErrorKind::UnlexableCharacter, i,
                       std::string("unexpected character '") + c + "'");
    }
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& t : tokens) out += t;
  return out;
}

}  // namespace retro::chem

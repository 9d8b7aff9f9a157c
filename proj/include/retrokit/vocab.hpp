#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace retro::model {

class VocabMismatch : public std::runtime_error {
 public:
  explicit VocabMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

// Token inventory frozen at (pre-)training time. Ids 0..2 are reserved.
class Vocabulary {
 public:
  static constexpr int pad_id = 0;
  static constexpr int bos_id = 1;
  static constexpr int eos_id = 2;

  Vocabulary();

  static Vocabulary build(const std::vector<std::vector<std::string>>& sequences);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);  // full list incl. specials

  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(const std::string& t) const { return index_.count(t) > 0; }
  int id(const std::string& t) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& toks) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace retro::model

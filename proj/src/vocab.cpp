#include "retrokit/vocab.hpp"

#include <algorithm>
#include <set>

namespace retro::model {

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<bos>", "<eos>"};
  for (size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sequences) {
  std::set<std::string> uniq;
  for (const auto& seq : sequences)
    for (const std::string& t : seq) uniq.insert(t);
  Vocabulary v;
  for (const std::string& t : uniq) {
    if (v.index_.count(t)) continue;
    v.index_[t] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(t);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 3 || tokens[0] != "<pad>" || tokens[1] != "<bos>" || tokens[2] != "<eos>")
    throw VocabMismatch("vocabulary list must start with <pad>, <bos>, <eos>");
  Vocabulary v;
  v.tokens_ = tokens;
  v.index_.clear();
  for (size_t i = 0; i < tokens.size(); ++i) v.index_[tokens[i]] = static_cast<int>(i);
  return v;
}

int Vocabulary::id(const std::string& t) const {
  auto it = index_.find(t);
  if (it == index_.end()) throw VocabMismatch("token '" + t + "' not in vocabulary");
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw VocabMismatch("token id out of range");
  return tokens_[id];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const std::string& t : toks) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

}  // namespace retro::model

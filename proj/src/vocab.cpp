#include "rasap/vocab.hpp"

#include <algorithm>
#include <set>

namespace rasap {

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_[token] = id;
  return id;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus_tokens) {
  Vocabulary v;
  std::set<std::string> sorted(corpus_tokens.begin(), corpus_tokens.end());
  for (const auto& t : sorted) v.add(t);
  return v;
}

}  // namespace rasap

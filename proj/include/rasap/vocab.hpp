#pragma once

#include <map>
#include <string>
#include <vector>

namespace rasap {

// Token table shared by questions and schema names. Index 0 is the unknown
// token; everything else is added in sorted order so any corpus builds the
// same table.
class Vocabulary {
 public:
  static constexpr const char* kUnk = "[unk]";

  Vocabulary() { add(kUnk); }

  int add(const std::string& token);
  int id_of(const std::string& token) const;  // 0 when unknown
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary build(const std::vector<std::string>& corpus_tokens);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

}  // namespace rasap

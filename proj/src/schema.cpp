#include "rasap/schema.hpp"

#include <cctype>
#include <stdexcept>

namespace rasap {

void Schema::validate() const {
  const int nc = static_cast<int>(columns.size());
  const int nt = static_cast<int>(tables.size());
  for (int i = 0; i < nc; ++i) {
    const auto& c = columns[i];
    if (c.table_index < 0 || c.table_index >= nt)
      throw std::invalid_argument("schema '" + db_id + "': column " + std::to_string(i) +
                                  " has invalid table index " + std::to_string(c.table_index));
  }
  for (const auto& [from, to] : foreign_keys) {
    if (from < 0 || from >= nc || to < 0 || to >= nc)
      throw std::invalid_argument("schema '" + db_id + "': foreign key endpoint out of range");
    if (from == to)
      throw std::invalid_argument("schema '" + db_id + "': foreign key endpoints must differ");
  }
}

QuestionTokens tokenize(const std::string& text) {
  QuestionTokens out;
  out.raw = text;
  const int n = static_cast<int>(text.size());
  int i = 0;
  auto is_word = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  };
  while (i < n) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    int begin = i;
    if (is_word(c)) {
      while (i < n && is_word(text[i])) ++i;
      // keep decimals like 3.5 as a single token
      if (i < n && text[i] == '.' && i + 1 < n &&
          std::isdigit(static_cast<unsigned char>(text[i + 1])) &&
          std::isdigit(static_cast<unsigned char>(text[i - 1]))) {
        ++i;
        while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      }
    } else {
      ++i;  // single punctuation character
    }
    std::string tok = text.substr(begin, i - begin);
    for (char& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out.tokens.push_back(std::move(tok));
    out.spans.emplace_back(begin, i);
  }
  if (out.tokens.empty())
    throw std::invalid_argument("tokenize: input is empty or whitespace-only");
  return out;
}

std::string normalize_word(const std::string& word) {
  std::string w;
  w.reserve(word.size());
  for (char c : word)
    w.push_back(c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  const auto len = w.size();
  if (len > 3 && w.compare(len - 3, 3, "ies") == 0) {
    w.erase(len - 3);
    w += 'y';
  } else if (len > 1 && w.back() == 's' && !(len > 2 && w[len - 2] == 's')) {
    w.pop_back();
  }
  return w;
}

}  // namespace rasap

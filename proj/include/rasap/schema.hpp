#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rasap {

enum class ColumnType { Number, Text };

struct TableDef {
  std::string original_name;             // as it appears in SQL
  std::vector<std::string> name_tokens;  // lowercased words
};

struct ColumnDef {
  std::string original_name;
  std::vector<std::string> name_tokens;
  int table_index = -1;
  ColumnType type_tag = ColumnType::Text;
  bool is_primary_key = false;
};

// Database schema: tables, typed columns, key structure, and (optionally)
// the cell values used for value linking.
struct Schema {
  std::string db_id;
  std::vector<TableDef> tables;
  std::vector<ColumnDef> columns;
  std::vector<std::pair<int, int>> foreign_keys;  // (column, referenced column)
  std::map<int, std::vector<std::string>> cell_values;

  // Throws std::invalid_argument when indices or keys are inconsistent.
  void validate() const;

  int num_nodes(int question_tokens) const {
    return static_cast<int>(columns.size() + tables.size()) + question_tokens;
  }
  const std::string& table_of(int column_index) const {
    return tables[columns[column_index].table_index].original_name;
  }
};

struct QuestionTokens {
  std::string raw;
  std::vector<std::string> tokens;                 // lowercased
  std::vector<std::pair<int, int>> spans;          // [begin, end) offsets into raw
};

// Lowercases and splits on whitespace and punctuation; punctuation characters
// are kept as tokens, decimal numbers stay whole. Throws on empty input.
QuestionTokens tokenize(const std::string& text);

// Name normalization used by schema linking: lowercase, underscores to
// spaces, naive plural stripping.
std::string normalize_word(const std::string& word);

}  // namespace rasap

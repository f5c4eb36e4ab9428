#pragma once

#include <string>
#include <vector>

#include "rasap/schema.hpp"

namespace rasap {

// Closed label set for ordered node pairs over the joint question/schema
// graph. Every label owns one row in the learned r^K / r^V tables.
enum class RelationLabel : int {
  Self = 0,
  // question token -> question token, by signed distance j - i in [-2, 2]
  QQDistN2,
  QQDistN1,
  QQDist0,
  QQDistP1,
  QQDistP2,
  QQNone,
  // column -> column
  CCSameTable,
  CCForeignF,
  CCForeignR,
  CCNone,
  // column -> table
  CTPrimaryKeyF,
  CTHasF,
  CTNone,
  // table -> column
  TCPrimaryKeyR,
  TCHasR,
  TCNone,
  // table -> table
  TTForeignF,
  TTForeignR,
  TTForeignB,
  TTNone,
  // question -> schema name linking (shared by column and table targets)
  QSNoMatch,
  QSPartialMatch,
  QSExactMatch,
  QCHasValue,
  // schema -> question mirrors
  SQNoMatchRev,
  SQPartialMatchRev,
  SQExactMatchRev,
  CQHasValueRev,
  kCount
};

constexpr int kNumRelationLabels = static_cast<int>(RelationLabel::kCount);

const char* relation_label_name(RelationLabel label);

enum class NodeKind { Column, Table, Question };

enum class NameMatch { NoMatch, PartialMatch, ExactMatch };

// Node order: columns, then tables, then question tokens.
struct RelationMatrix {
  int n_columns = 0;
  int n_tables = 0;
  int n_question = 0;
  std::vector<int> labels;  // n x n, row-major, values are RelationLabel

  int size() const { return n_columns + n_tables + n_question; }
  RelationLabel at(int i, int j) const {
    return static_cast<RelationLabel>(labels[static_cast<std::size_t>(i) * size() + j]);
  }
  NodeKind kind_of(int node) const;
  // "col:2:year", "tab:0:book_club", "q:3:list" — used by the link dump.
  std::string node_name(int node, const Schema& s, const QuestionTokens& q) const;
};

// Name-overlap linking per question token and schema node (columns then
// tables, in one list of length |C|+|T|).
std::vector<std::vector<NameMatch>> link_names(const QuestionTokens& q, const Schema& s);

// Token/column pairs where the token is a case-insensitive substring of some
// cell value of the column. Empty when the schema carries no cell values.
std::vector<std::pair<int, int>> link_values(const QuestionTokens& q, const Schema& s);

// A cell value appearing verbatim (case-insensitive) in the question.
struct CellMatch {
  int column_index;
  int token_begin;
  int token_end;  // exclusive
  std::string cell_text;
};
std::vector<CellMatch> find_cell_matches(const QuestionTokens& q, const Schema& s);

struct RelationOptions {
  // When false, HAS-VALUE takes precedence over EXACT-MATCH.
  bool exact_over_value = true;
};

RelationMatrix build_relation_matrix(const QuestionTokens& q, const Schema& s,
                                     const RelationOptions& opts = {});

}  // namespace rasap

#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rasap/executor.hpp"
#include "rasap/schema.hpp"
#include "rasap/sql_tree.hpp"

namespace rasap {

// Clause-level view of a query with every literal value masked; two queries
// are an exact set match when their decompositions are equal.
struct ClauseDecomposition {
  std::set<std::string> select_items;  // masked item serializations
  std::string where_key;               // masked canonical WHERE predicate
  std::set<std::string> group_cols;
  std::string having_key;
  std::vector<std::pair<std::string, bool>> order_spec;  // (column serial, descending)
  bool has_limit = false;
  std::set<std::string> from_tables;  // "tab:<i>" or nested decomposition keys
  std::set<std::string> join_conds;   // masked ON predicates
  int set_op = -1;                    // Rule id for UNION/INTERSECT/EXCEPT roots
  std::vector<std::string> set_children;  // nested keys; sorted for commutative ops

  bool operator==(const ClauseDecomposition& other) const = default;
  std::string key() const;  // canonical string form (used for nesting)
};

ClauseDecomposition decompose_clauses(const TreePtr& t, const Schema& s);

// Exact set match without values: clause-wise, value-masked equality.
bool exact_set_match(const TreePtr& pred, const TreePtr& gold, const Schema& s);

enum class Difficulty { Easy, Medium, Hard, Extra };
const char* difficulty_name(Difficulty d);

// Clause-count heuristic: one point per WHERE atom, aggregate item, GROUP BY,
// HAVING, ORDER BY, LIMIT, and extra table; two points per set operation and
// nested subquery. Easy <= 1, Medium <= 3, Hard <= 5, otherwise Extra.
Difficulty difficulty_of(const TreePtr& t, const Schema& s);

struct ExampleEval {
  bool parsed = false;      // prediction parsed into the grammar
  bool em = false;
  bool exec = false;
  bool gold_error = false;  // gold failed to parse or execute: excluded
  Difficulty bucket = Difficulty::Easy;
};

struct BucketStats {
  int count = 0;
  int em_hits = 0;
  int exec_hits = 0;
  double em_rate() const { return count ? static_cast<double>(em_hits) / count : 0.0; }
  double exec_rate() const { return count ? static_cast<double>(exec_hits) / count : 0.0; }
};

struct EvalReport {
  std::vector<ExampleEval> examples;
  BucketStats overall;
  BucketStats by_bucket[4];
  int excluded = 0;  // gold-side failures

  std::string to_json() const;
  std::string to_table() const;
};

struct EvalCase {
  std::string pred_sql;
  std::string gold_sql;
  const Schema* schema = nullptr;
  const MiniDatabase* db = nullptr;  // EXEC skipped when absent
};

EvalReport evaluate_corpus(const std::vector<EvalCase>& cases);

}  // namespace rasap

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rasap/schema.hpp"
#include "rasap/sql_tree.hpp"

namespace rasap {

// A database cell: null, a number, or text.
using Cell = std::variant<std::monostate, double, std::string>;
using Row = std::vector<Cell>;

inline bool cell_is_null(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

// Exact, order-stable textual form used for result comparison.
std::string cell_repr(const Cell& c);
std::string row_repr(const Row& r);

struct ExecError : std::runtime_error {
  explicit ExecError(const std::string& what) : std::runtime_error(what) {}
};

// Column-store per table, aligned with the schema's column order.
class MiniDatabase {
 public:
  // rows_by_table[t][r][k]: row r of table t, k-th column of that table in
  // ascending schema-column order.
  std::map<int, std::vector<Row>> rows_by_table;

  void validate(const Schema& s) const;  // arity and type tags
  static MiniDatabase from_json_file(const std::string& path, const Schema& s);
};

struct QueryResult {
  std::vector<Row> rows;
  bool ordered = false;  // ORDER BY present: comparison is sequence-sensitive
};

// Bag-semantics evaluation of a complete query tree. Throws ExecError on
// runtime type errors; set operations use set semantics.
QueryResult execute(const TreePtr& t, const MiniDatabase& db, const Schema& s);

// Multiset equality of results, sequence equality when the gold query is
// ordered. A predicted-side ExecError yields false; a gold-side ExecError
// propagates (dataset problem, not a model miss).
bool execution_match(const TreePtr& pred, const TreePtr& gold, const MiniDatabase& db,
                     const Schema& s);

}  // namespace rasap

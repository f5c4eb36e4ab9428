#pragma once

#include <stdexcept>
#include <string>

#include "rasap/sql_tree.hpp"

namespace rasap {

struct SqlParseError : std::runtime_error {
  explicit SqlParseError(const std::string& what) : std::runtime_error(what) {}
};

// A syntactically valid construct outside the supported subset.
struct UnsupportedSqlError : std::runtime_error {
  std::string construct;
  explicit UnsupportedSqlError(std::string c)
      : std::runtime_error("unsupported SQL construct: " + c), construct(std::move(c)) {}
};

// Parses a query in the supported subset into a canonical tree. Identifiers
// resolve case-insensitively against the schema; aliases are resolved away.
TreePtr parse_sql(const std::string& sql, const Schema& schema);

}  // namespace rasap

#pragma once

#include <random>

#include "rasap/schema.hpp"
#include "rasap/sql_tree.hpp"

namespace rasap {

// Options for random query generation. Trees come out of apply_rule, so they
// are always type-valid and complete.
struct TreeGenOptions {
  int max_height = 9;
  bool allow_set_ops = true;
  bool allow_subqueries = true;
  bool allow_joins = true;
  // Generate only queries the executor can evaluate on any database (always
  // true for this grammar; kept for future restriction).
};

// A random complete query over the schema. Literal values are drawn from the
// schema's cell values when available, otherwise from small integers.
TreePtr random_query(const Schema& s, std::mt19937_64& rng, const TreeGenOptions& opts = {});

}  // namespace rasap

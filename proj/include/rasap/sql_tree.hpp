#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rasap/schema.hpp"

namespace rasap {

// Coarse semantic types used to reject invalid rule applications.
enum class SemType { Relation, Column, Value, Predicate, Aggregate, OrderSpec, ColumnList };

const char* sem_type_name(SemType t);

enum class Rule : int {
  // leaves
  LeafColumn = 0,
  LeafTable,
  LeafValue,
  // unary
  Keep,
  Distinct,
  Count,
  Sum,
  Avg,
  Min,
  Max,
  Asc,
  Desc,
  Not,
  // binary
  Eq,
  Ne,
  Gt,
  Ge,
  Lt,
  Le,
  Like,
  In,
  NotIn,
  And,
  Or,
  Selection,
  Project,
  GroupBy,
  Having,
  OrderBy,
  Limit,
  JoinOn,
  CrossJoin,
  Union,
  Intersect,
  Except,
  List,
  kCount
};

constexpr int kNumRules = static_cast<int>(Rule::kCount);
const char* rule_name(Rule r);
int rule_arity(Rule r);  // 0 for leaves

// The grammar as an enumerable object; tests and the decoder iterate it and
// may restrict it to a subset.
struct RuleSet {
  std::vector<Rule> unary;
  std::vector<Rule> binary;
  static const RuleSet& full();
};

// Where a value literal came from; execution needs the exact text.
struct Literal {
  ColumnType tag = ColumnType::Number;
  std::string text;   // original text (no quotes)
  double num = 0.0;   // meaningful when tag == Number
  enum class Source { QuestionSpan, CellValue } source = Source::QuestionSpan;
};

std::string format_number(double v);

// Placement of a relation-typed node on the canonical clause spine. Shapes
// force FROM -> WHERE -> GROUP BY -> HAVING -> SELECT -> ORDER BY -> LIMIT
// order so that every complete tree prints as valid SQL.
enum class RelShape {
  NotRelation,
  FromExpr,
  Filtered,
  Grouped,
  HavingApplied,
  Complete,
  Ordered,
  Limited
};

struct SqlNode;
using TreePtr = std::shared_ptr<const SqlNode>;

// One projected output of a complete query.
struct ProjItem {
  Rule agg = Rule::kCount;  // kCount means plain column
  int column = -2;          // -1 is '*' (aggregates only)
  bool distinct = false;    // SELECT DISTINCT col, or count(DISTINCT col)
  ColumnType tag = ColumnType::Number;
};

struct SqlNode {
  Rule rule;
  SemType sem_type;
  int height = 0;
  TreePtr left, right;

  // leaf payloads
  int column_index = -2;  // LeafColumn; -1 encodes '*'
  int table_index = -1;   // LeafTable
  Literal literal;        // LeafValue

  // derived bookkeeping
  std::string serial;          // stable s-expression of this exact tree
  ColumnType data_tag = ColumnType::Number;  // for Column/Value/Aggregate
  bool distinct_col = false;   // Column wrapped in DISTINCT
  bool has_aggregate = false;  // predicates containing aggregate comparisons
  std::vector<int> refs;       // column indices a non-relation node mentions

  // relation-typed bookkeeping
  RelShape shape = RelShape::NotRelation;
  std::vector<int> scope;        // referencable columns (sorted)
  std::vector<int> from_scope;   // pre-projection scope for ORDER BY
  std::vector<int> tables;       // schema tables appearing in the FROM region
  int from_items = 0;            // top-level FROM sources (for qualification)
  std::vector<ProjItem> proj;    // filled once Complete
  bool is_set_op = false;

  bool is_complete() const {
    return shape == RelShape::Complete || shape == RelShape::Ordered ||
           shape == RelShape::Limited;
  }
};

struct TypeError {
  Rule rule;
  std::vector<SemType> got;
  std::string detail;
  std::string message() const;
};

struct ApplyResult {
  TreePtr tree;  // null on error
  std::optional<TypeError> error;
};

// Leaf constructors.
TreePtr make_column_leaf(int column_index, const Schema& s);  // -1 for '*'
TreePtr make_table_leaf(int table_index, const Schema& s);
TreePtr make_value_leaf(Literal lit);

// Applies a unary or binary rule, checking arity, semantic types, value-type
// tags, column scope, and clause order. KEEP returns its operand unchanged.
ApplyResult apply_rule(Rule rule, const std::vector<TreePtr>& children, const Schema& s);

// Convenience for tests: throws TypeError-as-runtime_error on failure.
TreePtr apply_or_throw(Rule rule, const std::vector<TreePtr>& children, const Schema& s);

// Sorts commutative AND/OR/set-op chains and join-free FROM products by
// serialized form. Idempotent.
TreePtr canonicalize(const TreePtr& t, const Schema& s);

bool canonical_equal(const TreePtr& a, const TreePtr& b, const Schema& s);

// Prints a complete query as canonical SQL text. Throws on incomplete trees.
std::string emit_sql(const TreePtr& t, const Schema& s);

// All distinct sub-trees of height <= h (sorted by serialization). KEEP keeps
// shorter finished branches alive on the beam, so this set is exactly what a
// teacher-forced beam holds at step h.
std::vector<TreePtr> decompose_by_height(const TreePtr& t, int h);

// Serialization with every value literal replaced by a placeholder, used for
// value-masked comparison. Canonicalizes after masking.
std::string masked_serial(const TreePtr& t, const Schema& s);

}  // namespace rasap

#include "rasap/sql_tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

namespace rasap {

const char* sem_type_name(SemType t) {
  switch (t) {
    case SemType::Relation: return "R";
    case SemType::Column: return "C";
    case SemType::Value: return "V";
    case SemType::Predicate: return "P";
    case SemType::Aggregate: return "Agg";
    case SemType::OrderSpec: return "Order";
    case SemType::ColumnList: return "List";
  }
  return "?";
}

const char* rule_name(Rule r) {
  switch (r) {
    case Rule::LeafColumn: return "col";
    case Rule::LeafTable: return "tab";
    case Rule::LeafValue: return "val";
    case Rule::Keep: return "KEEP";
    case Rule::Distinct: return "DISTINCT";
    case Rule::Count: return "COUNT";
    case Rule::Sum: return "SUM";
    case Rule::Avg: return "AVG";
    case Rule::Min: return "MIN";
    case Rule::Max: return "MAX";
    case Rule::Asc: return "ASC";
    case Rule::Desc: return "DESC";
    case Rule::Not: return "NOT";
    case Rule::Eq: return "EQ";
    case Rule::Ne: return "NE";
    case Rule::Gt: return "GT";
    case Rule::Ge: return "GE";
    case Rule::Lt: return "LT";
    case Rule::Le: return "LE";
    case Rule::Like: return "LIKE";
    case Rule::In: return "IN";
    case Rule::NotIn: return "NOT-IN";
    case Rule::And: return "AND";
    case Rule::Or: return "OR";
    case Rule::Selection: return "SELECTION";
    case Rule::Project: return "PROJECT";
    case Rule::GroupBy: return "GROUPBY";
    case Rule::Having: return "HAVING";
    case Rule::OrderBy: return "ORDERBY";
    case Rule::Limit: return "LIMIT";
    case Rule::JoinOn: return "JOIN-ON";
    case Rule::CrossJoin: return "CROSS-JOIN";
    case Rule::Union: return "UNION";
    case Rule::Intersect: return "INTERSECT";
    case Rule::Except: return "EXCEPT";
    case Rule::List: return "LIST";
    case Rule::kCount: break;
  }
  return "?";
}

int rule_arity(Rule r) {
  switch (r) {
    case Rule::LeafColumn:
    case Rule::LeafTable:
    case Rule::LeafValue:
      return 0;
    case Rule::Keep:
    case Rule::Distinct:
    case Rule::Count:
    case Rule::Sum:
    case Rule::Avg:
    case Rule::Min:
    case Rule::Max:
    case Rule::Asc:
    case Rule::Desc:
    case Rule::Not:
      return 1;
    default:
      return 2;
  }
}

const RuleSet& RuleSet::full() {
  static const RuleSet rs = [] {
    RuleSet r;
    for (int i = 0; i < kNumRules; ++i) {
      const Rule rule = static_cast<Rule>(i);
      if (rule_arity(rule) == 1) r.unary.push_back(rule);
      if (rule_arity(rule) == 2) r.binary.push_back(rule);
    }
    return r;
  }();
  return rs;
}

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string TypeError::message() const {
  std::string m = std::string(rule_name(rule)) + " cannot apply to (";
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (i) m += ", ";
    m += sem_type_name(got[i]);
  }
  m += ")";
  if (!detail.empty()) m += ": " + detail;
  return m;
}

namespace {

std::string quote_text(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    out += c;
    if (c == '\'') out += '\'';
  }
  out += "'";
  return out;
}

std::string leaf_serial(const SqlNode& n) {
  switch (n.rule) {
    case Rule::LeafColumn:
      return n.column_index < 0 ? "(col *)" : "(col " + std::to_string(n.column_index) + ")";
    case Rule::LeafTable:
      return "(tab " + std::to_string(n.table_index) + ")";
    case Rule::LeafValue:
      if (n.literal.tag == ColumnType::Number)
        return "(val num " + format_number(n.literal.num) + ")";
      return "(val text " + quote_text(n.literal.text) + ")";
    default:
      throw std::logic_error("leaf_serial on non-leaf");
  }
}

TreePtr seal(SqlNode&& n) {
  if (rule_arity(n.rule) == 0) {
    n.height = 0;
    n.serial = leaf_serial(n);
  } else {
    n.height = 1 + std::max(n.left->height, n.right ? n.right->height : 0);
    n.serial = "(" + std::string(rule_name(n.rule)) + " " + n.left->serial +
               (n.right ? " " + n.right->serial : "") + ")";
  }
  return std::make_shared<const SqlNode>(std::move(n));
}

std::vector<int> merge_refs(const TreePtr& a, const TreePtr& b) {
  std::vector<int> r = a->refs;
  if (b) r.insert(r.end(), b->refs.begin(), b->refs.end());
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

bool subset_of(const std::vector<int>& small, const std::vector<int>& big) {
  return std::all_of(small.begin(), small.end(), [&](int c) {
    return std::binary_search(big.begin(), big.end(), c);
  });
}

// Plain column operand: a schema column without DISTINCT and not '*'.
bool plain_column(const SqlNode& n) {
  return n.sem_type == SemType::Column && !n.distinct_col && n.column_index >= 0;
}

ApplyResult fail(Rule rule, const std::vector<TreePtr>& children, std::string detail) {
  TypeError e{rule, {}, std::move(detail)};
  for (const auto& c : children) e.got.push_back(c->sem_type);
  return {nullptr, std::move(e)};
}

ProjItem proj_item_of(const SqlNode& item) {
  ProjItem p;
  if (item.sem_type == SemType::Column) {
    p.agg = Rule::kCount;
    p.column = item.column_index;
    p.distinct = item.distinct_col;
    p.tag = item.data_tag;
  } else {
    p.agg = item.rule;
    p.column = item.left->column_index;
    p.distinct = item.left->distinct_col;
    p.tag = item.data_tag;
  }
  return p;
}

void flatten_list(const TreePtr& n, std::vector<TreePtr>& out) {
  if (n->sem_type == SemType::ColumnList) {
    out.push_back(n->left);
    flatten_list(n->right, out);
  } else {
    out.push_back(n);
  }
}

}  // namespace

TreePtr make_column_leaf(int column_index, const Schema& s) {
  if (column_index < -1 || column_index >= static_cast<int>(s.columns.size()))
    throw std::out_of_range("column index " + std::to_string(column_index));
  SqlNode n;
  n.rule = Rule::LeafColumn;
  n.sem_type = SemType::Column;
  n.column_index = column_index;
  if (column_index >= 0) {
    n.data_tag = s.columns[column_index].type_tag;
    n.refs = {column_index};
  }
  return seal(std::move(n));
}

TreePtr make_table_leaf(int table_index, const Schema& s) {
  if (table_index < 0 || table_index >= static_cast<int>(s.tables.size()))
    throw std::out_of_range("table index " + std::to_string(table_index));
  SqlNode n;
  n.rule = Rule::LeafTable;
  n.sem_type = SemType::Relation;
  n.table_index = table_index;
  n.shape = RelShape::FromExpr;
  for (int c = 0; c < static_cast<int>(s.columns.size()); ++c)
    if (s.columns[c].table_index == table_index) n.scope.push_back(c);
  n.from_scope = n.scope;
  n.tables = {table_index};
  n.from_items = 1;
  return seal(std::move(n));
}

TreePtr make_value_leaf(Literal lit) {
  SqlNode n;
  n.rule = Rule::LeafValue;
  n.sem_type = SemType::Value;
  n.data_tag = lit.tag;
  n.literal = std::move(lit);
  return seal(std::move(n));
}

ApplyResult apply_rule(Rule rule, const std::vector<TreePtr>& children, const Schema& s) {
  (void)s;  // schema is part of the contract; leaf constructors consume it
  const int arity = rule_arity(rule);
  if (arity == 0) return fail(rule, children, "leaf rules have no children");
  if (static_cast<int>(children.size()) != arity)
    return fail(rule, children,
                "expected " + std::to_string(arity) + " children, got " +
                    std::to_string(children.size()));
  for (const auto& c : children)
    if (!c) return fail(rule, children, "null child");

  const TreePtr& a = children[0];
  const TreePtr b = arity == 2 ? children[1] : nullptr;

  SqlNode n;
  n.rule = rule;
  n.left = a;
  n.right = b;
  n.refs = merge_refs(a, b);

  switch (rule) {
    case Rule::Keep:
      return {a, std::nullopt};  // carries tree, height, and identity forward

    case Rule::Distinct:
      if (!plain_column(*a)) return fail(rule, children, "needs a plain column");
      n.sem_type = SemType::Column;
      n.column_index = a->column_index;
      n.data_tag = a->data_tag;
      n.distinct_col = true;
      return {seal(std::move(n)), std::nullopt};

    case Rule::Count:
      if (a->sem_type != SemType::Column) return fail(rule, children, "needs a column or *");
      n.sem_type = SemType::Aggregate;
      n.data_tag = ColumnType::Number;
      return {seal(std::move(n)), std::nullopt};

    case Rule::Sum:
    case Rule::Avg:
      if (a->sem_type != SemType::Column || a->column_index < 0)
        return fail(rule, children, "needs a real column");
      if (a->data_tag != ColumnType::Number)
        return fail(rule, children, "column must be numeric");
      n.sem_type = SemType::Aggregate;
      n.data_tag = ColumnType::Number;
      return {seal(std::move(n)), std::nullopt};

    case Rule::Min:
    case Rule::Max:
      if (a->sem_type != SemType::Column || a->column_index < 0)
        return fail(rule, children, "needs a real column");
      n.sem_type = SemType::Aggregate;
      n.data_tag = a->data_tag;
      return {seal(std::move(n)), std::nullopt};

    case Rule::Asc:
    case Rule::Desc:
      if (!plain_column(*a)) return fail(rule, children, "needs a plain column");
      n.sem_type = SemType::OrderSpec;
      return {seal(std::move(n)), std::nullopt};

    case Rule::Not:
      if (a->sem_type != SemType::Predicate) return fail(rule, children, "needs a predicate");
      n.sem_type = SemType::Predicate;
      n.has_aggregate = a->has_aggregate;
      return {seal(std::move(n)), std::nullopt};

    case Rule::Eq:
    case Rule::Ne:
    case Rule::Gt:
    case Rule::Ge:
    case Rule::Lt:
    case Rule::Le: {
      const bool left_ok = plain_column(*a) || a->sem_type == SemType::Aggregate;
      const bool right_ok = b->sem_type == SemType::Value || plain_column(*b);
      if (!left_ok || !right_ok)
        return fail(rule, children, "needs (column|aggregate) vs (value|column)");
      if (a->data_tag != b->data_tag)
        return fail(rule, children, "operand value types differ");
      n.sem_type = SemType::Predicate;
      n.has_aggregate = a->sem_type == SemType::Aggregate;
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::Like:
      if (!plain_column(*a) || a->data_tag != ColumnType::Text)
        return fail(rule, children, "needs a text column");
      if (b->sem_type != SemType::Value || b->data_tag != ColumnType::Text)
        return fail(rule, children, "needs a text value pattern");
      n.sem_type = SemType::Predicate;
      return {seal(std::move(n)), std::nullopt};

    case Rule::In:
    case Rule::NotIn: {
      if (!plain_column(*a)) return fail(rule, children, "needs a plain column");
      if (b->sem_type != SemType::Relation || !b->is_complete())
        return fail(rule, children, "needs a complete subquery");
      if (b->proj.size() != 1)
        return fail(rule, children, "subquery must project exactly one column");
      if (b->proj[0].tag != a->data_tag)
        return fail(rule, children, "subquery column type differs");
      n.sem_type = SemType::Predicate;
      n.refs = a->refs;  // the subquery resolves its own names
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::And:
    case Rule::Or:
      if (a->sem_type != SemType::Predicate || b->sem_type != SemType::Predicate)
        return fail(rule, children, "needs two predicates");
      n.sem_type = SemType::Predicate;
      n.has_aggregate = a->has_aggregate || b->has_aggregate;
      return {seal(std::move(n)), std::nullopt};

    case Rule::Selection: {
      if (a->sem_type != SemType::Predicate || b->sem_type != SemType::Relation)
        return fail(rule, children, "needs predicate x relation");
      if (a->has_aggregate) return fail(rule, children, "aggregates cannot appear in WHERE");
      if (b->shape != RelShape::FromExpr && !b->is_complete())
        return fail(rule, children, "relation already has clauses beyond FROM");
      if (!subset_of(a->refs, b->scope))
        return fail(rule, children, "predicate references columns outside the FROM scope");
      n.sem_type = SemType::Relation;
      n.shape = RelShape::Filtered;
      n.scope = b->scope;
      n.from_scope = b->scope;
      if (b->shape == RelShape::FromExpr) {
        n.tables = b->tables;
        n.from_items = b->from_items;
      } else {
        n.from_items = 1;
      }
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::GroupBy: {
      if (!plain_column(*a) || b->sem_type != SemType::Relation)
        return fail(rule, children, "needs plain column x relation");
      if (b->shape != RelShape::FromExpr && b->shape != RelShape::Filtered &&
          !b->is_complete())
        return fail(rule, children, "GROUP BY must follow FROM/WHERE");
      if (!subset_of(a->refs, b->scope))
        return fail(rule, children, "group key outside the FROM scope");
      n.sem_type = SemType::Relation;
      n.shape = RelShape::Grouped;
      n.scope = b->scope;
      n.from_scope = b->scope;
      if (b->shape == RelShape::FromExpr) {
        n.tables = b->tables;
        n.from_items = b->from_items;
      } else if (b->shape == RelShape::Filtered) {
        n.tables = b->tables;
        n.from_items = b->from_items;
      } else {
        n.from_items = 1;
      }
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::Having:
      if (a->sem_type != SemType::Predicate || b->sem_type != SemType::Relation)
        return fail(rule, children, "needs predicate x relation");
      if (b->shape != RelShape::Grouped)
        return fail(rule, children, "HAVING must follow GROUP BY");
      if (!subset_of(a->refs, b->scope))
        return fail(rule, children, "predicate references columns outside the FROM scope");
      n.sem_type = SemType::Relation;
      n.shape = RelShape::HavingApplied;
      n.scope = b->scope;
      n.from_scope = b->scope;
      n.tables = b->tables;
      n.from_items = b->from_items;
      return {seal(std::move(n)), std::nullopt};

    case Rule::Project: {
      if (b->sem_type != SemType::Relation) return fail(rule, children, "needs a relation");
      if (a->sem_type != SemType::Column && a->sem_type != SemType::Aggregate &&
          a->sem_type != SemType::ColumnList)
        return fail(rule, children, "needs column/aggregate/list items");
      if (b->shape == RelShape::Ordered || b->shape == RelShape::Limited ||
          b->shape == RelShape::NotRelation)
        return fail(rule, children, "SELECT must precede ORDER BY/LIMIT");
      if (a->sem_type == SemType::Column && a->column_index == -1)
        return fail(rule, children, "bare * cannot be a projected item");
      if (!subset_of(a->refs, b->scope))
        return fail(rule, children, "projected items outside the FROM scope");
      std::vector<TreePtr> items;
      flatten_list(a, items);
      n.sem_type = SemType::Relation;
      n.shape = RelShape::Complete;
      for (const auto& item : items) {
        if (item->sem_type == SemType::Column && item->column_index == -1)
          return fail(rule, children, "bare * cannot be a projected item");
        n.proj.push_back(proj_item_of(*item));
      }
      for (const auto& p : n.proj)
        if (p.agg == Rule::kCount) n.scope.push_back(p.column);
      std::sort(n.scope.begin(), n.scope.end());
      n.scope.erase(std::unique(n.scope.begin(), n.scope.end()), n.scope.end());
      n.from_scope = b->scope;
      if (b->shape == RelShape::Complete) {
        n.from_items = 1;
      } else {
        n.tables = b->tables;
        n.from_items = b->from_items;
      }
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::OrderBy: {
      if (a->sem_type != SemType::OrderSpec || b->sem_type != SemType::Relation)
        return fail(rule, children, "needs order spec x relation");
      if (b->shape != RelShape::Complete)
        return fail(rule, children, "ORDER BY must follow a completed SELECT");
      if (b->is_set_op) return fail(rule, children, "ORDER BY over set operations unsupported");
      if (!subset_of(a->refs, b->from_scope))
        return fail(rule, children, "order key outside the FROM scope");
      n.sem_type = SemType::Relation;
      n.shape = RelShape::Ordered;
      n.scope = b->scope;
      n.from_scope = b->from_scope;
      n.tables = b->tables;
      n.from_items = b->from_items;
      n.proj = b->proj;
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::Limit: {
      if (a->sem_type != SemType::Value || b->sem_type != SemType::Relation)
        return fail(rule, children, "needs value x relation");
      if (b->shape != RelShape::Complete && b->shape != RelShape::Ordered)
        return fail(rule, children, "LIMIT must follow SELECT/ORDER BY");
      if (a->literal.tag != ColumnType::Number || a->literal.num < 0 ||
          a->literal.num != std::floor(a->literal.num))
        return fail(rule, children, "LIMIT needs a non-negative integer");
      n.sem_type = SemType::Relation;
      n.shape = RelShape::Limited;
      n.scope = b->scope;
      n.from_scope = b->from_scope;
      n.tables = b->tables;
      n.from_items = b->from_items;
      n.proj = b->proj;
      n.is_set_op = b->is_set_op;
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::JoinOn: {
      if (a->sem_type != SemType::Predicate || b->sem_type != SemType::Relation)
        return fail(rule, children, "needs predicate x relation");
      if (a->has_aggregate) return fail(rule, children, "aggregates cannot appear in ON");
      if (b->rule != Rule::CrossJoin)
        return fail(rule, children, "ON must attach to a join product");
      const auto& jl = b->left;
      const auto& jr = b->right;
      const bool left_ok =
          jl->rule == Rule::LeafTable || jl->rule == Rule::JoinOn || jl->is_complete();
      const bool right_ok = jr->rule == Rule::LeafTable || jr->is_complete();
      if (!left_ok || !right_ok)
        return fail(rule, children, "join product is not in emitable form");
      if (!subset_of(a->refs, b->scope))
        return fail(rule, children, "join condition outside the product scope");
      n.sem_type = SemType::Relation;
      n.shape = RelShape::FromExpr;
      n.scope = b->scope;
      n.from_scope = b->from_scope;
      n.tables = b->tables;
      n.from_items = b->from_items;
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::CrossJoin: {
      if (a->sem_type != SemType::Relation || b->sem_type != SemType::Relation)
        return fail(rule, children, "needs two relations");
      const bool a_ok = a->shape == RelShape::FromExpr || a->is_complete();
      const bool b_ok = b->shape == RelShape::FromExpr || b->is_complete();
      if (!a_ok || !b_ok) return fail(rule, children, "operands must be FROM sources");
      std::vector<int> joint = a->scope;
      joint.insert(joint.end(), b->scope.begin(), b->scope.end());
      std::sort(joint.begin(), joint.end());
      if (std::adjacent_find(joint.begin(), joint.end()) != joint.end())
        return fail(rule, children, "FROM sources share columns (self-joins unsupported)");
      n.sem_type = SemType::Relation;
      n.shape = RelShape::FromExpr;
      n.scope = std::move(joint);
      n.from_scope = n.scope;
      if (a->shape == RelShape::FromExpr)
        n.tables.insert(n.tables.end(), a->tables.begin(), a->tables.end());
      if (b->shape == RelShape::FromExpr)
        n.tables.insert(n.tables.end(), b->tables.begin(), b->tables.end());
      n.from_items = (a->shape == RelShape::FromExpr ? a->from_items : 1) +
                     (b->shape == RelShape::FromExpr ? b->from_items : 1);
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::Union:
    case Rule::Intersect:
    case Rule::Except: {
      if (a->sem_type != SemType::Relation || b->sem_type != SemType::Relation)
        return fail(rule, children, "needs two relations");
      if (a->shape != RelShape::Complete || b->shape != RelShape::Complete)
        return fail(rule, children, "set operands must be completed SELECTs");
      if (a->proj.size() != b->proj.size())
        return fail(rule, children, "operand column counts differ");
      for (std::size_t i = 0; i < a->proj.size(); ++i)
        if (a->proj[i].tag != b->proj[i].tag)
          return fail(rule, children, "operand column types differ");
      n.sem_type = SemType::Relation;
      n.shape = RelShape::Complete;
      n.is_set_op = true;
      n.proj = a->proj;
      for (std::size_t i = 0; i < a->proj.size(); ++i)
        if (a->proj[i].agg == Rule::kCount && b->proj[i].agg == Rule::kCount)
          n.scope.push_back(a->proj[i].column);
      std::sort(n.scope.begin(), n.scope.end());
      n.scope.erase(std::unique(n.scope.begin(), n.scope.end()), n.scope.end());
      n.from_scope = n.scope;
      n.from_items = 1;
      return {seal(std::move(n)), std::nullopt};
    }

    case Rule::List: {
      const bool left_ok = (a->sem_type == SemType::Column && a->column_index >= 0) ||
                           a->sem_type == SemType::Aggregate;
      const bool right_ok = (b->sem_type == SemType::Column && b->column_index >= 0) ||
                            b->sem_type == SemType::Aggregate ||
                            b->sem_type == SemType::ColumnList;
      if (!left_ok || !right_ok)
        return fail(rule, children, "needs column/aggregate items");
      n.sem_type = SemType::ColumnList;
      return {seal(std::move(n)), std::nullopt};
    }

    default:
      return fail(rule, children, "not an applicable rule");
  }
}

TreePtr apply_or_throw(Rule rule, const std::vector<TreePtr>& children, const Schema& s) {
  auto result = apply_rule(rule, children, s);
  if (result.error) throw std::runtime_error("apply_rule: " + result.error->message());
  return result.tree;
}

namespace {

bool pure_atom(const TreePtr& n) {
  return n->rule == Rule::LeafTable || n->is_complete();
}

void flatten_chain(const TreePtr& n, Rule rule, std::vector<TreePtr>& out) {
  if (n->rule == rule) {
    flatten_chain(n->left, rule, out);
    flatten_chain(n->right, rule, out);
  } else {
    out.push_back(n);
  }
}

}  // namespace

TreePtr canonicalize(const TreePtr& t, const Schema& s) {
  if (!t->left) return t;
  TreePtr left = canonicalize(t->left, s);
  TreePtr right = t->right ? canonicalize(t->right, s) : nullptr;

  const Rule r = t->rule;
  if (r == Rule::And || r == Rule::Or || r == Rule::Union || r == Rule::Intersect) {
    auto rebuilt = apply_or_throw(r, {left, right}, s);
    std::vector<TreePtr> parts;
    flatten_chain(rebuilt, r, parts);
    std::sort(parts.begin(), parts.end(),
              [](const TreePtr& a, const TreePtr& b) { return a->serial < b->serial; });
    TreePtr acc = parts.back();
    for (int i = static_cast<int>(parts.size()) - 2; i >= 0; --i)
      acc = apply_or_throw(r, {parts[i], acc}, s);
    return acc;
  }
  if (r == Rule::CrossJoin) {
    auto rebuilt = apply_or_throw(r, {left, right}, s);
    std::vector<TreePtr> parts;
    flatten_chain(rebuilt, r, parts);
    if (std::all_of(parts.begin(), parts.end(), pure_atom)) {
      std::sort(parts.begin(), parts.end(),
                [](const TreePtr& a, const TreePtr& b) { return a->serial < b->serial; });
      TreePtr acc = parts[0];
      for (std::size_t i = 1; i < parts.size(); ++i)
        acc = apply_or_throw(r, {acc, parts[i]}, s);
      return acc;
    }
    return rebuilt;
  }
  if (left == t->left && right == t->right) return t;
  if (!right) return apply_or_throw(r, {left}, s);
  return apply_or_throw(r, {left, right}, s);
}

bool canonical_equal(const TreePtr& a, const TreePtr& b, const Schema& s) {
  return canonicalize(a, s)->serial == canonicalize(b, s)->serial;
}

// ---------------------------------------------------------------------------
// SQL emission
// ---------------------------------------------------------------------------

namespace {

struct Emitter {
  const Schema& schema;

  std::string column_name(int col, const SqlNode& query_root) const {
    if (col == -1) return "*";
    const auto& c = schema.columns[col];
    // Qualify when the FROM region has several sources and this column's
    // table is one of them.
    if (query_root.from_items > 1) {
      for (int t : query_root.tables)
        if (t == c.table_index) return schema.tables[t].original_name + "." + c.original_name;
    }
    return c.original_name;
  }

  std::string item(const SqlNode& n, const SqlNode& root) const {
    if (n.sem_type == SemType::Column) {
      std::string name = column_name(n.column_index, root);
      return n.distinct_col ? "DISTINCT " + name : name;
    }
    // aggregate
    std::string agg;
    switch (n.rule) {
      case Rule::Count: agg = "count"; break;
      case Rule::Sum: agg = "sum"; break;
      case Rule::Avg: agg = "avg"; break;
      case Rule::Min: agg = "min"; break;
      case Rule::Max: agg = "max"; break;
      default: throw std::logic_error("item: unexpected rule");
    }
    const SqlNode& c = *n.left;
    std::string inner = column_name(c.column_index, root);
    if (c.distinct_col) inner = "DISTINCT " + inner;
    return agg + "(" + inner + ")";
  }

  std::string value(const SqlNode& n, bool like_pattern = false) const {
    if (n.literal.tag == ColumnType::Number) return format_number(n.literal.num);
    if (like_pattern) return quote_text("%" + n.literal.text + "%");
    return quote_text(n.literal.text);
  }

  // precedence: 0 = OR, 1 = AND, 2 = NOT/atom
  std::string pred(const SqlNode& n, const SqlNode& root, int parent_level) const {
    int level;
    std::string out;
    switch (n.rule) {
      case Rule::Or:
        level = 0;
        out = pred(*n.left, root, level) + " OR " + pred(*n.right, root, level);
        break;
      case Rule::And:
        level = 1;
        out = pred(*n.left, root, level) + " AND " + pred(*n.right, root, level);
        break;
      case Rule::Not:
        level = 2;
        out = "NOT " + pred(*n.left, root, 2);
        break;
      case Rule::Eq:
      case Rule::Ne:
      case Rule::Gt:
      case Rule::Ge:
      case Rule::Lt:
      case Rule::Le: {
        level = 2;
        const char* op = n.rule == Rule::Eq   ? "="
                         : n.rule == Rule::Ne ? "!="
                         : n.rule == Rule::Gt ? ">"
                         : n.rule == Rule::Ge ? ">="
                         : n.rule == Rule::Lt ? "<"
                                              : "<=";
        const std::string lhs = item(*n.left, root);
        const std::string rhs = n.right->sem_type == SemType::Value
                                    ? value(*n.right)
                                    : item(*n.right, root);
        out = lhs + " " + op + " " + rhs;
        break;
      }
      case Rule::Like:
        level = 2;
        out = item(*n.left, root) + " LIKE " + value(*n.right, true);
        break;
      case Rule::In:
      case Rule::NotIn:
        level = 2;
        out = item(*n.left, root) + (n.rule == Rule::In ? " IN (" : " NOT IN (") +
              emit(*n.right) + ")";
        break;
      default:
        throw std::logic_error("pred: unexpected rule");
    }
    if (level < parent_level) return "(" + out + ")";
    return out;
  }

  std::string from_expr(const SqlNode& n, const SqlNode& root) const {
    switch (n.rule) {
      case Rule::LeafTable:
        return schema.tables[n.table_index].original_name;
      case Rule::CrossJoin:
        return from_expr(*n.left, root) + ", " + from_expr(*n.right, root);
      case Rule::JoinOn: {
        const SqlNode& cj = *n.right;  // CrossJoin by construction
        return from_expr(*cj.left, root) + " JOIN " + from_expr(*cj.right, root) + " ON " +
               pred(*n.left, root, 0);
      }
      default:
        // derived table
        return "(" + emit(n) + ")";
    }
  }

  std::string emit(const SqlNode& n) const {
    switch (n.shape) {
      case RelShape::Limited:
        return emit(*n.right) + " LIMIT " + format_number(n.left->literal.num);
      case RelShape::Ordered: {
        const SqlNode& spec = *n.left;
        return emit(*n.right) + " ORDER BY " +
               column_name(spec.left->column_index, *n.right) +
               (spec.rule == Rule::Asc ? " ASC" : " DESC");
      }
      case RelShape::Complete: {
        if (n.is_set_op) {
          const char* op = n.rule == Rule::Union       ? " UNION "
                           : n.rule == Rule::Intersect ? " INTERSECT "
                                                       : " EXCEPT ";
          return emit(*n.left) + op + emit(*n.right);
        }
        // Project node: collect the clause chain beneath.
        const SqlNode* cursor = n.right.get();
        const SqlNode* having = nullptr;
        const SqlNode* group = nullptr;
        const SqlNode* where = nullptr;
        if (cursor->shape == RelShape::HavingApplied) {
          having = cursor;
          cursor = cursor->right.get();
        }
        if (cursor->shape == RelShape::Grouped) {
          group = cursor;
          cursor = cursor->right.get();
        }
        if (cursor->shape == RelShape::Filtered) {
          where = cursor;
          cursor = cursor->right.get();
        }
        std::vector<TreePtr> items;
        flatten_list(n.left, items);
        const bool all_distinct =
            !items.empty() && std::all_of(items.begin(), items.end(), [](const TreePtr& i) {
              return i->sem_type == SemType::Column && i->distinct_col;
            });
        std::string head = "SELECT ";
        if (all_distinct) head += "DISTINCT ";
        for (std::size_t i = 0; i < items.size(); ++i) {
          if (i) head += ", ";
          if (all_distinct)
            head += column_name(items[i]->column_index, n);
          else
            head += item(*items[i], n);
        }
        std::string out = head + " FROM ";
        if (cursor->is_complete())
          out += "(" + emit(*cursor) + ")";
        else
          out += from_expr(*cursor, n);
        if (where) out += " WHERE " + pred(*where->left, n, 0);
        if (group) out += " GROUP BY " + column_name(group->left->column_index, n);
        if (having) out += " HAVING " + pred(*having->left, n, 0);
        return out;
      }
      default:
        throw std::invalid_argument("emit_sql: tree is not a complete query (" +
                                    n.serial + ")");
    }
  }
};

}  // namespace

std::string emit_sql(const TreePtr& t, const Schema& s) {
  if (!t || t->sem_type != SemType::Relation || !t->is_complete())
    throw std::invalid_argument("emit_sql: tree is not a complete query");
  return Emitter{s}.emit(*t);
}

std::vector<TreePtr> decompose_by_height(const TreePtr& t, int h) {
  if (h < 0) throw std::invalid_argument("decompose_by_height: negative height");
  std::map<std::string, TreePtr> found;
  std::function<void(const TreePtr&)> walk = [&](const TreePtr& n) {
    if (n->height <= h) found.emplace(n->serial, n);
    if (n->left) walk(n->left);
    if (n->right) walk(n->right);
  };
  walk(t);
  std::vector<TreePtr> out;
  out.reserve(found.size());
  for (auto& [serial, node] : found) {
    (void)serial;
    out.push_back(node);
  }
  return out;
}

namespace {

void masked_serial_rec(const SqlNode& n, std::string& out);

bool cj_chain_all_atoms(const SqlNode& n) {
  if (n.rule != Rule::CrossJoin)
    return n.rule == Rule::LeafTable || n.is_complete();
  return cj_chain_all_atoms(*n.left) && cj_chain_all_atoms(*n.right);
}

void masked_chain(const SqlNode& n, Rule rule, std::vector<std::string>& parts) {
  if (n.rule == rule) {
    masked_chain(*n.left, rule, parts);
    masked_chain(*n.right, rule, parts);
  } else {
    std::string s;
    masked_serial_rec(n, s);
    parts.push_back(std::move(s));
  }
}

void masked_serial_rec(const SqlNode& n, std::string& out) {
  if (n.rule == Rule::LeafValue) {
    out += "(val ?)";
    return;
  }
  if (!n.left) {
    out += n.serial;
    return;
  }
  const Rule r = n.rule;
  const bool commutative = r == Rule::And || r == Rule::Or || r == Rule::Union ||
                           r == Rule::Intersect ||
                           (r == Rule::CrossJoin && cj_chain_all_atoms(n));
  if (commutative) {
    std::vector<std::string> parts;
    masked_chain(n, r, parts);
    std::sort(parts.begin(), parts.end());
    out += "(" + std::string(rule_name(r));
    for (const auto& p : parts) out += " " + p;
    out += ")";
    return;
  }
  out += "(" + std::string(rule_name(r)) + " ";
  masked_serial_rec(*n.left, out);
  if (n.right) {
    out += " ";
    masked_serial_rec(*n.right, out);
  }
  out += ")";
}

}  // namespace

std::string masked_serial(const TreePtr& t, const Schema& s) {
  (void)s;
  std::string out;
  masked_serial_rec(*t, out);
  return out;
}

}  // namespace rasap

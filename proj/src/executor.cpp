#include "rasap/executor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"

namespace rasap {

std::string cell_repr(const Cell& c) {
  if (cell_is_null(c)) return "~";
  if (const double* d = std::get_if<double>(&c)) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "n:%a", *d);
    return buf;
  }
  return "t:" + std::get<std::string>(c);
}

std::string row_repr(const Row& r) {
  std::string out;
  for (const auto& c : r) {
    out += cell_repr(c);
    out += '\x1f';
  }
  return out;
}

void MiniDatabase::validate(const Schema& s) const {
  for (const auto& [t, rows] : rows_by_table) {
    if (t < 0 || t >= static_cast<int>(s.tables.size()))
      throw std::invalid_argument("database: unknown table index " + std::to_string(t));
    std::vector<int> cols;
    for (int c = 0; c < static_cast<int>(s.columns.size()); ++c)
      if (s.columns[c].table_index == t) cols.push_back(c);
    for (const auto& row : rows) {
      if (row.size() != cols.size())
        throw std::invalid_argument("database: row arity mismatch in table " +
                                    s.tables[t].original_name);
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (cell_is_null(row[k])) continue;
        const bool is_num = std::holds_alternative<double>(row[k]);
        const bool want_num = s.columns[cols[k]].type_tag == ColumnType::Number;
        if (is_num != want_num)
          throw std::invalid_argument("database: type mismatch in column " +
                                      s.columns[cols[k]].original_name);
      }
    }
  }
}

MiniDatabase MiniDatabase::from_json_file(const std::string& path, const Schema& s) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open database fixture: " + path);
  nlohmann::json j;
  in >> j;
  MiniDatabase db;
  for (auto it = j.begin(); it != j.end(); ++it) {
    int table = -1;
    for (int t = 0; t < static_cast<int>(s.tables.size()); ++t)
      if (s.tables[t].original_name == it.key()) table = t;
    if (table < 0)
      throw std::runtime_error("database fixture: unknown table '" + it.key() + "'");
    std::vector<int> cols;
    for (int c = 0; c < static_cast<int>(s.columns.size()); ++c)
      if (s.columns[c].table_index == table) cols.push_back(c);
    std::size_t nrows = 0;
    std::vector<std::vector<Cell>> by_col(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::string& cname = s.columns[cols[k]].original_name;
      if (!it.value().contains(cname))
        throw std::runtime_error("database fixture: table '" + it.key() +
                                 "' missing column '" + cname + "'");
      const auto& arr = it.value().at(cname);
      for (const auto& v : arr) {
        if (v.is_null())
          by_col[k].emplace_back(std::monostate{});
        else if (s.columns[cols[k]].type_tag == ColumnType::Number)
          by_col[k].emplace_back(v.get<double>());
        else
          by_col[k].emplace_back(v.get<std::string>());
      }
      if (k == 0)
        nrows = by_col[k].size();
      else if (by_col[k].size() != nrows)
        throw std::runtime_error("database fixture: ragged columns in '" + it.key() + "'");
    }
    auto& rows = db.rows_by_table[table];
    for (std::size_t r = 0; r < nrows; ++r) {
      Row row;
      for (std::size_t k = 0; k < cols.size(); ++k) row.push_back(by_col[k][r]);
      rows.push_back(std::move(row));
    }
  }
  db.validate(s);
  return db;
}

namespace {

// One working row: values for the columns currently in scope.
using Env = std::map<int, Cell>;

struct Group {
  Cell key;
  std::vector<Env> rows;
};

struct Engine {
  const MiniDatabase& db;
  const Schema& schema;

  std::string lower(std::string v) const {
    for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return v;
  }

  std::vector<int> table_columns(int t) const {
    std::vector<int> cols;
    for (int c = 0; c < static_cast<int>(schema.columns.size()); ++c)
      if (schema.columns[c].table_index == t) cols.push_back(c);
    return cols;
  }

  // ---- scalar helpers -----------------------------------------------------
  static Cell literal_cell(const Literal& lit) {
    if (lit.tag == ColumnType::Number) return lit.num;
    return lit.text;
  }

  // three-valued logic reduced: any null operand fails the comparison
  bool compare(Rule op, const Cell& a, const Cell& b) const {
    if (cell_is_null(a) || cell_is_null(b)) return false;
    const bool na = std::holds_alternative<double>(a);
    const bool nb = std::holds_alternative<double>(b);
    if (na != nb) throw ExecError("comparison between text and number");
    int c;
    if (na) {
      const double x = std::get<double>(a), y = std::get<double>(b);
      c = x < y ? -1 : x > y ? 1 : 0;
    } else {
      c = std::get<std::string>(a).compare(std::get<std::string>(b));
      c = c < 0 ? -1 : c > 0 ? 1 : 0;
    }
    switch (op) {
      case Rule::Eq: return c == 0;
      case Rule::Ne: return c != 0;
      case Rule::Gt: return c > 0;
      case Rule::Ge: return c >= 0;
      case Rule::Lt: return c < 0;
      case Rule::Le: return c <= 0;
      default: throw ExecError("not a comparison");
    }
  }

  // null sorts before everything ascending
  static int order_cmp(const Cell& a, const Cell& b) {
    const bool an = cell_is_null(a), bn = cell_is_null(b);
    if (an && bn) return 0;
    if (an) return -1;
    if (bn) return 1;
    const bool num_a = std::holds_alternative<double>(a);
    const bool num_b = std::holds_alternative<double>(b);
    if (num_a != num_b) throw ExecError("ordering mixed text and number");
    if (num_a) {
      const double x = std::get<double>(a), y = std::get<double>(b);
      return x < y ? -1 : x > y ? 1 : 0;
    }
    const int c = std::get<std::string>(a).compare(std::get<std::string>(b));
    return c < 0 ? -1 : c > 0 ? 1 : 0;
  }

  // ---- aggregates -----------------------------------------------------------
  Cell aggregate(const SqlNode& agg, const std::vector<Env>& rows) const {
    const SqlNode& col = *agg.left;
    if (agg.rule == Rule::Count) {
      if (col.column_index == -1) return static_cast<double>(rows.size());
      if (col.distinct_col) {
        std::set<std::string> seen;
        for (const auto& env : rows) {
          const Cell& v = env.at(col.column_index);
          if (!cell_is_null(v)) seen.insert(cell_repr(v));
        }
        return static_cast<double>(seen.size());
      }
      double n = 0;
      for (const auto& env : rows)
        if (!cell_is_null(env.at(col.column_index))) n += 1;
      return n;
    }
    // numeric / comparable folds over non-null cells, in row order
    std::vector<Cell> values;
    for (const auto& env : rows) {
      const Cell& v = env.at(col.column_index);
      if (!cell_is_null(v)) values.push_back(v);
    }
    if (values.empty()) return std::monostate{};
    switch (agg.rule) {
      case Rule::Sum:
      case Rule::Avg: {
        double sum = 0;
        for (const auto& v : values) {
          if (!std::holds_alternative<double>(v)) throw ExecError("sum/avg over text");
          sum += std::get<double>(v);
        }
        return agg.rule == Rule::Sum ? sum : sum / static_cast<double>(values.size());
      }
      case Rule::Min:
      case Rule::Max: {
        Cell best = values[0];
        for (const auto& v : values) {
          const int c = order_cmp(v, best);
          if ((agg.rule == Rule::Min && c < 0) || (agg.rule == Rule::Max && c > 0)) best = v;
        }
        return best;
      }
      default:
        throw ExecError("unknown aggregate");
    }
  }

  // evaluates a column/aggregate item in either a plain-row or group context
  Cell item_value(const SqlNode& item, const Env* env, const Group* group,
                  const std::vector<Env>* all_rows) const {
    if (item.sem_type == SemType::Aggregate) {
      if (group) return aggregate(item, group->rows);
      if (all_rows) return aggregate(item, *all_rows);
      throw ExecError("aggregate outside a grouped context");
    }
    // plain column: first row of the group when grouped
    const Env* source = env;
    if (!source && group) source = group->rows.empty() ? nullptr : &group->rows[0];
    if (!source && all_rows) source = all_rows->empty() ? nullptr : &(*all_rows)[0];
    if (!source) return std::monostate{};
    auto it = source->find(item.column_index);
    if (it == source->end()) throw ExecError("column out of scope");
    return it->second;
  }

  bool eval_pred(const SqlNode& p, const Env* env, const Group* group,
                 const std::vector<Env>* all_rows) const {
    switch (p.rule) {
      case Rule::And:
        return eval_pred(*p.left, env, group, all_rows) &&
               eval_pred(*p.right, env, group, all_rows);
      case Rule::Or:
        return eval_pred(*p.left, env, group, all_rows) ||
               eval_pred(*p.right, env, group, all_rows);
      case Rule::Not:
        return !eval_pred(*p.left, env, group, all_rows);
      case Rule::Like: {
        const Cell c = item_value(*p.left, env, group, all_rows);
        if (cell_is_null(c)) return false;
        if (!std::holds_alternative<std::string>(c)) throw ExecError("LIKE over number");
        return lower(std::get<std::string>(c)).find(lower(p.right->literal.text)) !=
               std::string::npos;
      }
      case Rule::In:
      case Rule::NotIn: {
        const Cell c = item_value(*p.left, env, group, all_rows);
        QueryResult sub = exec_query(*p.right);
        bool found = false;
        if (!cell_is_null(c)) {
          for (const auto& row : sub.rows) {
            if (cell_is_null(row[0])) continue;
            if (cell_repr(row[0]) == cell_repr(c)) {
              found = true;
              break;
            }
          }
        }
        return p.rule == Rule::In ? found : !found;
      }
      default: {
        const Cell a = item_value(*p.left, env, group, all_rows);
        const Cell b = p.right->sem_type == SemType::Value
                           ? literal_cell(p.right->literal)
                           : item_value(*p.right, env, group, all_rows);
        return compare(p.rule, a, b);
      }
    }
  }

  // ---- FROM evaluation -------------------------------------------------------
  std::vector<Env> exec_from(const SqlNode& n) const {
    switch (n.rule) {
      case Rule::LeafTable: {
        std::vector<Env> out;
        const auto cols = table_columns(n.table_index);
        auto it = db.rows_by_table.find(n.table_index);
        if (it == db.rows_by_table.end()) return out;  // empty table
        for (const auto& row : it->second) {
          Env env;
          for (std::size_t k = 0; k < cols.size(); ++k) env[cols[k]] = row[k];
          out.push_back(std::move(env));
        }
        return out;
      }
      case Rule::CrossJoin: {
        const auto left = exec_from(*n.left);
        const auto right = exec_from(*n.right);
        std::vector<Env> out;
        for (const auto& l : left)
          for (const auto& r : right) {
            Env env = l;
            env.insert(r.begin(), r.end());
            out.push_back(std::move(env));
          }
        return out;
      }
      case Rule::JoinOn: {
        auto rows = exec_from(*n.right);
        std::vector<Env> out;
        for (auto& env : rows)
          if (eval_pred(*n.left, &env, nullptr, nullptr)) out.push_back(std::move(env));
        return out;
      }
      default: {
        // derived table: expose its plain projected columns
        QueryResult sub = exec_query(n);
        std::vector<int> positions;   // projected tuple positions
        std::vector<int> col_ids;     // schema column ids they expose
        for (std::size_t i = 0; i < n.proj.size(); ++i) {
          if (n.proj[i].agg == Rule::kCount) {
            positions.push_back(static_cast<int>(i));
            col_ids.push_back(n.proj[i].column);
          }
        }
        std::vector<Env> out;
        for (const auto& row : sub.rows) {
          Env env;
          for (std::size_t k = 0; k < positions.size(); ++k)
            env[col_ids[k]] = row[positions[k]];
          out.push_back(std::move(env));
        }
        return out;
      }
    }
  }

  // ---- full query -------------------------------------------------------------
  QueryResult exec_query(const SqlNode& n) const {
    switch (n.shape) {
      case RelShape::Limited: {
        QueryResult inner = exec_query(*n.right);
        const std::size_t limit = static_cast<std::size_t>(n.left->literal.num);
        if (inner.rows.size() > limit) inner.rows.resize(limit);
        return inner;
      }
      case RelShape::Ordered:
        return exec_ordered(n);
      case RelShape::Complete: {
        QueryResult out;
        out.rows = exec_complete(n).rows;
        return out;
      }
      default:
        throw ExecError("not a complete query: " + n.serial);
    }
  }

  QueryResult exec_ordered(const SqlNode& n) const {
    const SqlNode& spec = *n.left;
    const int key_col = spec.left->column_index;
    CompleteResult result = exec_complete(*n.right, key_col);
    std::vector<int> order(result.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    const bool desc = spec.rule == Rule::Desc;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const int c = order_cmp(result.keys[a], result.keys[b]);
      return desc ? c > 0 : c < 0;
    });
    QueryResult out;
    out.ordered = true;
    for (int idx : order) out.rows.push_back(std::move(result.rows[idx]));
    return out;
  }

  struct CompleteResult {
    std::vector<Row> rows;
    std::vector<Cell> keys;  // sort keys, parallel to rows (when requested)
  };

  // Evaluates a Complete node; when key_col >= 0 each output row also yields
  // its sort key (first-occurrence key survives DISTINCT dedup).
  CompleteResult exec_complete(const SqlNode& n, int key_col = -1) const {
    CompleteResult out;
    if (n.is_set_op) {
      if (key_col >= 0) throw ExecError("ORDER BY over set operations unsupported");
      QueryResult left = exec_query(*n.left);
      QueryResult right = exec_query(*n.right);
      std::set<std::string> right_set;
      for (const auto& r : right.rows) right_set.insert(row_repr(r));
      std::set<std::string> seen;
      auto push_unique = [&](const Row& r) {
        if (seen.insert(row_repr(r)).second) out.rows.push_back(r);
      };
      if (n.rule == Rule::Union) {
        for (const auto& r : left.rows) push_unique(r);
        for (const auto& r : right.rows) push_unique(r);
      } else if (n.rule == Rule::Intersect) {
        for (const auto& r : left.rows)
          if (right_set.count(row_repr(r))) push_unique(r);
      } else {  // Except
        for (const auto& r : left.rows)
          if (!right_set.count(row_repr(r))) push_unique(r);
      }
      return out;
    }

    // collect the clause chain under the projection
    const SqlNode* cursor = n.right.get();
    const SqlNode* having = nullptr;
    const SqlNode* group_by = nullptr;
    const SqlNode* where = nullptr;
    if (cursor->shape == RelShape::HavingApplied) {
      having = cursor;
      cursor = cursor->right.get();
    }
    if (cursor->shape == RelShape::Grouped) {
      group_by = cursor;
      cursor = cursor->right.get();
    }
    if (cursor->shape == RelShape::Filtered) {
      where = cursor;
      cursor = cursor->right.get();
    }
    std::vector<Env> rows = exec_from(*cursor);
    if (where) {
      std::vector<Env> kept;
      for (auto& env : rows)
        if (eval_pred(*where->left, &env, nullptr, nullptr)) kept.push_back(std::move(env));
      rows.swap(kept);
    }

    std::vector<TreePtr> items;
    flatten_items(n.left, items);
    const bool any_agg = std::any_of(items.begin(), items.end(), [](const TreePtr& i) {
      return i->sem_type == SemType::Aggregate;
    });
    const bool all_distinct =
        !items.empty() && std::all_of(items.begin(), items.end(), [](const TreePtr& i) {
          return i->sem_type == SemType::Column && i->distinct_col;
        });

    if (group_by) {
      const int gcol = group_by->left->column_index;
      std::vector<Group> groups;
      std::map<std::string, int> index;
      for (auto& env : rows) {
        const Cell key = env.at(gcol);
        const std::string rep = cell_repr(key);
        auto it = index.find(rep);
        if (it == index.end())
          it = index.emplace(rep, static_cast<int>(groups.size())).first,
          groups.push_back({key, {}});
        groups[it->second].rows.push_back(std::move(env));
      }
      for (const auto& g : groups) {
        if (having && !eval_pred(*having->left, nullptr, &g, nullptr)) continue;
        Row row;
        for (const auto& item : items) row.push_back(item_value(*item, nullptr, &g, nullptr));
        if (key_col >= 0) out.keys.push_back(g.rows[0].at(key_col));
        out.rows.push_back(std::move(row));
      }
    } else if (any_agg) {
      // a single implicit group over all rows
      Row row;
      for (const auto& item : items) row.push_back(item_value(*item, nullptr, nullptr, &rows));
      if (key_col >= 0)
        out.keys.push_back(rows.empty() ? Cell{std::monostate{}} : rows[0].at(key_col));
      out.rows.push_back(std::move(row));
    } else {
      for (const auto& env : rows) {
        Row row;
        for (const auto& item : items) row.push_back(item_value(*item, &env, nullptr, nullptr));
        if (key_col >= 0) {
          auto it = env.find(key_col);
          if (it == env.end()) throw ExecError("order key out of scope");
          out.keys.push_back(it->second);
        }
        out.rows.push_back(std::move(row));
      }
      if (all_distinct) {
        std::set<std::string> seen;
        std::vector<Row> unique;
        std::vector<Cell> unique_keys;
        for (std::size_t i = 0; i < out.rows.size(); ++i) {
          if (seen.insert(row_repr(out.rows[i])).second) {
            unique.push_back(std::move(out.rows[i]));
            if (key_col >= 0) unique_keys.push_back(out.keys[i]);
          }
        }
        out.rows.swap(unique);
        out.keys.swap(unique_keys);
      }
    }
    return out;
  }

  static void flatten_items(const TreePtr& n, std::vector<TreePtr>& out) {
    if (n->sem_type == SemType::ColumnList) {
      out.push_back(n->left);
      flatten_items(n->right, out);
    } else {
      out.push_back(n);
    }
  }
};

}  // namespace

QueryResult execute(const TreePtr& t, const MiniDatabase& db, const Schema& s) {
  if (!t || !t->is_complete()) throw ExecError("execute: tree is not a complete query");
  Engine engine{db, s};
  return engine.exec_query(*t);
}

bool execution_match(const TreePtr& pred, const TreePtr& gold, const MiniDatabase& db,
                     const Schema& s) {
  QueryResult gold_result = execute(gold, db, s);  // gold errors propagate
  QueryResult pred_result;
  try {
    pred_result = execute(pred, db, s);
  } catch (const ExecError&) {
    return false;
  }
  if (pred_result.rows.size() != gold_result.rows.size()) return false;
  std::vector<std::string> a, b;
  for (const auto& r : pred_result.rows) a.push_back(row_repr(r));
  for (const auto& r : gold_result.rows) b.push_back(row_repr(r));
  if (!gold_result.ordered) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
  }
  return a == b;
}

}  // namespace rasap

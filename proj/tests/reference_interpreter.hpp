#pragma once

// Naive row-by-row query interpreter, written independently of the engine in
// src/executor.cpp. Shares only the tree and cell types. Row-order contract
// (needed for exact comparison): FROM enumerates left-to-right nested loops,
// filters keep input order, groups appear in first-occurrence order.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rasap/executor.hpp"
#include "rasap/schema.hpp"
#include "rasap/sql_tree.hpp"

namespace rasap::testing {

struct RefRow {
  std::map<int, Cell> cols;  // schema column -> value
};

struct RefResult {
  std::vector<Row> tuples;
  bool ordered = false;
};

class ReferenceInterpreter {
 public:
  ReferenceInterpreter(const MiniDatabase& db, const Schema& s) : db_(db), schema_(s) {}

  RefResult run(const TreePtr& q) { return eval_query(*q); }

 private:
  const MiniDatabase& db_;
  const Schema& schema_;

  static std::string to_lower(std::string v) {
    for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return v;
  }

  std::vector<RefRow> scan_table(int t) const {
    std::vector<RefRow> out;
    std::vector<int> cols;
    for (int c = 0; c < static_cast<int>(schema_.columns.size()); ++c)
      if (schema_.columns[c].table_index == t) cols.push_back(c);
    auto it = db_.rows_by_table.find(t);
    if (it == db_.rows_by_table.end()) return out;
    for (const auto& stored : it->second) {
      RefRow r;
      for (std::size_t k = 0; k < cols.size(); ++k) r.cols[cols[k]] = stored[k];
      out.push_back(std::move(r));
    }
    return out;
  }

  std::vector<RefRow> eval_from(const SqlNode& n) {
    if (n.rule == Rule::LeafTable) return scan_table(n.table_index);
    if (n.rule == Rule::CrossJoin) {
      auto a = eval_from(*n.left);
      auto b = eval_from(*n.right);
      std::vector<RefRow> out;
      for (const auto& x : a)
        for (const auto& y : b) {
          RefRow r = x;
          for (const auto& [k, v] : y.cols) r.cols[k] = v;
          out.push_back(std::move(r));
        }
      return out;
    }
    if (n.rule == Rule::JoinOn) {
      auto rows = eval_from(*n.right);
      std::vector<RefRow> out;
      for (const auto& r : rows)
        if (truth(*n.left, &r, nullptr)) out.push_back(r);
      return out;
    }
    // derived table
    RefResult sub = eval_query(n);
    std::vector<RefRow> out;
    for (const auto& tuple : sub.tuples) {
      RefRow r;
      int pos = 0;
      for (const auto& p : n.proj) {
        if (p.agg == Rule::kCount) r.cols[p.column] = tuple[pos];
        ++pos;
      }
      out.push_back(std::move(r));
    }
    return out;
  }

  // group context: rows of the group; row context: one row
  Cell value_of(const SqlNode& item, const RefRow* row,
                const std::vector<RefRow>* group) {
    if (item.sem_type == SemType::Aggregate) return fold(item, *group);
    const RefRow* src = row;
    if (!src && group && !group->empty()) src = &(*group)[0];
    if (!src) return std::monostate{};
    return src->cols.at(item.column_index);
  }

  Cell fold(const SqlNode& agg, const std::vector<RefRow>& rows) {
    const SqlNode& col = *agg.left;
    if (agg.rule == Rule::Count) {
      if (col.column_index == -1) return double(rows.size());
      std::set<std::string> distinct;
      double n = 0;
      for (const auto& r : rows) {
        const Cell& v = r.cols.at(col.column_index);
        if (cell_is_null(v)) continue;
        if (col.distinct_col)
          distinct.insert(cell_repr(v));
        else
          n += 1;
      }
      return col.distinct_col ? double(distinct.size()) : n;
    }
    std::vector<Cell> vals;
    for (const auto& r : rows) {
      const Cell& v = r.cols.at(col.column_index);
      if (!cell_is_null(v)) vals.push_back(v);
    }
    if (vals.empty()) return std::monostate{};
    if (agg.rule == Rule::Sum || agg.rule == Rule::Avg) {
      double s = 0;
      for (const auto& v : vals) {
        if (!std::holds_alternative<double>(v)) throw ExecError("ref: sum/avg over text");
        s += std::get<double>(v);
      }
      return agg.rule == Rule::Sum ? s : s / double(vals.size());
    }
    Cell best = vals[0];
    for (const auto& v : vals) {
      const int c = cmp(v, best);
      if ((agg.rule == Rule::Min && c < 0) || (agg.rule == Rule::Max && c > 0)) best = v;
    }
    return best;
  }

  static int cmp(const Cell& a, const Cell& b) {
    const bool na = std::holds_alternative<double>(a);
    const bool nb = std::holds_alternative<double>(b);
    if (na != nb) throw ExecError("ref: mixed-type comparison");
    if (na) {
      const double x = std::get<double>(a), y = std::get<double>(b);
      return x < y ? -1 : x > y ? 1 : 0;
    }
    const int c = std::get<std::string>(a).compare(std::get<std::string>(b));
    return c < 0 ? -1 : c > 0 ? 1 : 0;
  }

  bool truth(const SqlNode& p, const RefRow* row, const std::vector<RefRow>* group) {
    switch (p.rule) {
      case Rule::And: return truth(*p.left, row, group) && truth(*p.right, row, group);
      case Rule::Or: return truth(*p.left, row, group) || truth(*p.right, row, group);
      case Rule::Not: return !truth(*p.left, row, group);
      case Rule::Like: {
        const Cell v = value_of(*p.left, row, group);
        if (cell_is_null(v)) return false;
        return to_lower(std::get<std::string>(v)).find(to_lower(p.right->literal.text)) !=
               std::string::npos;
      }
      case Rule::In:
      case Rule::NotIn: {
        const Cell v = value_of(*p.left, row, group);
        if (cell_is_null(v)) return p.rule == Rule::NotIn;
        RefResult sub = eval_query(*p.right);
        bool found = false;
        for (const auto& tuple : sub.tuples)
          if (!cell_is_null(tuple[0]) && cell_repr(tuple[0]) == cell_repr(v)) found = true;
        return p.rule == Rule::In ? found : !found;
      }
      default: {
        const Cell a = value_of(*p.left, row, group);
        const Cell b = p.right->sem_type == SemType::Value
                           ? (p.right->literal.tag == ColumnType::Number
                                  ? Cell(p.right->literal.num)
                                  : Cell(p.right->literal.text))
                           : value_of(*p.right, row, group);
        if (cell_is_null(a) || cell_is_null(b)) return false;
        const int c = cmp(a, b);
        switch (p.rule) {
          case Rule::Eq: return c == 0;
          case Rule::Ne: return c != 0;
          case Rule::Gt: return c > 0;
          case Rule::Ge: return c >= 0;
          case Rule::Lt: return c < 0;
          case Rule::Le: return c <= 0;
          default: throw ExecError("ref: bad predicate");
        }
      }
    }
  }

  RefResult eval_query(const SqlNode& n) {
    if (n.shape == RelShape::Limited) {
      RefResult inner = eval_query(*n.right);
      const std::size_t k = static_cast<std::size_t>(n.left->literal.num);
      if (inner.tuples.size() > k) inner.tuples.resize(k);
      return inner;
    }
    if (n.shape == RelShape::Ordered) {
      const SqlNode& spec = *n.left;
      std::vector<std::pair<Row, Cell>> pairs = project_with_key(*n.right,
                                                                 spec.left->column_index);
      const bool desc = spec.rule == Rule::Desc;
      std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
        const bool an = cell_is_null(a.second), bn = cell_is_null(b.second);
        int c;
        if (an && bn) c = 0;
        else if (an) c = -1;
        else if (bn) c = 1;
        else c = cmp(a.second, b.second);
        return desc ? c > 0 : c < 0;
      });
      RefResult out;
      out.ordered = true;
      for (auto& [row, key] : pairs) out.tuples.push_back(std::move(row));
      return out;
    }
    // Complete
    auto pairs = project_with_key(n, -1);
    RefResult out;
    for (auto& [row, key] : pairs) out.tuples.push_back(std::move(row));
    return out;
  }

  // projected tuples of a Complete node plus the value of sort-key column
  std::vector<std::pair<Row, Cell>> project_with_key(const SqlNode& n, int key_col) {
    std::vector<std::pair<Row, Cell>> out;
    if (n.is_set_op) {
      if (key_col >= 0) throw ExecError("ref: ordered set op");
      RefResult a = eval_query(*n.left);
      RefResult b = eval_query(*n.right);
      std::set<std::string> bset;
      for (const auto& t : b.tuples) bset.insert(row_repr(t));
      std::set<std::string> emitted;
      auto emit = [&](const Row& r) {
        if (emitted.insert(row_repr(r)).second) out.emplace_back(r, Cell{});
      };
      if (n.rule == Rule::Union) {
        for (const auto& r : a.tuples) emit(r);
        for (const auto& r : b.tuples) emit(r);
      } else if (n.rule == Rule::Intersect) {
        for (const auto& r : a.tuples)
          if (bset.count(row_repr(r))) emit(r);
      } else {
        for (const auto& r : a.tuples)
          if (!bset.count(row_repr(r))) emit(r);
      }
      return out;
    }

    const SqlNode* cur = n.right.get();
    const SqlNode* having = nullptr;
    const SqlNode* group = nullptr;
    const SqlNode* where = nullptr;
    if (cur->shape == RelShape::HavingApplied) { having = cur; cur = cur->right.get(); }
    if (cur->shape == RelShape::Grouped) { group = cur; cur = cur->right.get(); }
    if (cur->shape == RelShape::Filtered) { where = cur; cur = cur->right.get(); }

    std::vector<RefRow> rows = eval_from(*cur);
    if (where) {
      std::vector<RefRow> kept;
      for (const auto& r : rows)
        if (truth(*where->left, &r, nullptr)) kept.push_back(r);
      rows.swap(kept);
    }

    std::vector<TreePtr> items;
    std::function<void(const TreePtr&)> flat = [&](const TreePtr& x) {
      if (x->sem_type == SemType::ColumnList) {
        items.push_back(x->left);
        flat(x->right);
      } else {
        items.push_back(x);
      }
    };
    flat(n.left);
    const bool has_agg = std::any_of(items.begin(), items.end(), [](const TreePtr& i) {
      return i->sem_type == SemType::Aggregate;
    });
    const bool all_distinct =
        !items.empty() && std::all_of(items.begin(), items.end(), [](const TreePtr& i) {
          return i->sem_type == SemType::Column && i->distinct_col;
        });

    if (group) {
      const int gcol = group->left->column_index;
      std::vector<std::string> order;
      std::map<std::string, std::vector<RefRow>> buckets;
      for (const auto& r : rows) {
        const std::string key = cell_repr(r.cols.at(gcol));
        if (!buckets.count(key)) order.push_back(key);
        buckets[key].push_back(r);
      }
      for (const auto& key : order) {
        const auto& members = buckets[key];
        if (having && !truth(*having->left, nullptr, &members)) continue;
        Row tuple;
        for (const auto& item : items) tuple.push_back(value_of(*item, nullptr, &members));
        Cell k = key_col >= 0 ? members[0].cols.at(key_col) : Cell{};
        out.emplace_back(std::move(tuple), std::move(k));
      }
    } else if (has_agg) {
      Row tuple;
      for (const auto& item : items) tuple.push_back(value_of(*item, nullptr, &rows));
      Cell k = key_col >= 0 && !rows.empty() ? rows[0].cols.at(key_col) : Cell{};
      out.emplace_back(std::move(tuple), std::move(k));
    } else {
      for (const auto& r : rows) {
        Row tuple;
        for (const auto& item : items) tuple.push_back(value_of(*item, &r, nullptr));
        Cell k = key_col >= 0 ? r.cols.at(key_col) : Cell{};
        out.emplace_back(std::move(tuple), std::move(k));
      }
      if (all_distinct) {
        std::set<std::string> seen;
        std::vector<std::pair<Row, Cell>> unique;
        for (auto& p : out)
          if (seen.insert(row_repr(p.first)).second) unique.push_back(std::move(p));
        out.swap(unique);
      }
    }
    return out;
  }
};

}  // namespace rasap::testing

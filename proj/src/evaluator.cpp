#include "rasap/evaluator.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "rasap/sql_parse.hpp"

namespace rasap {

namespace {

// Splits the canonical spine of a (non-set-op) complete query.
struct Spine {
  const SqlNode* limit = nullptr;
  const SqlNode* order = nullptr;
  const SqlNode* project = nullptr;
  const SqlNode* having = nullptr;
  const SqlNode* group = nullptr;
  const SqlNode* where = nullptr;
  const SqlNode* from = nullptr;
};

Spine split_spine(const SqlNode* n) {
  Spine sp;
  if (n->shape == RelShape::Limited) {
    sp.limit = n;
    n = n->right.get();
  }
  if (n->shape == RelShape::Ordered) {
    sp.order = n;
    n = n->right.get();
  }
  sp.project = n;
  n = n->right.get();
  if (n->shape == RelShape::HavingApplied) {
    sp.having = n;
    n = n->right.get();
  }
  if (n->shape == RelShape::Grouped) {
    sp.group = n;
    n = n->right.get();
  }
  if (n->shape == RelShape::Filtered) {
    sp.where = n;
    n = n->right.get();
  }
  sp.from = n;
  return sp;
}

void collect_items(const TreePtr& n, std::vector<TreePtr>& out) {
  if (n->sem_type == SemType::ColumnList) {
    out.push_back(n->left);
    collect_items(n->right, out);
  } else {
    out.push_back(n);
  }
}

void walk_from(const TreePtr& n, const Schema& s, ClauseDecomposition& d) {
  switch (n->rule) {
    case Rule::LeafTable:
      d.from_tables.insert("tab:" + std::to_string(n->table_index));
      return;
    case Rule::CrossJoin:
      walk_from(n->left, s, d);
      walk_from(n->right, s, d);
      return;
    case Rule::JoinOn:
      d.join_conds.insert(masked_serial(n->left, s));
      walk_from(n->right, s, d);
      return;
    default:
      // derived table
      d.from_tables.insert("sub:" + decompose_clauses(n, s).key());
      return;
  }
}

}  // namespace

std::string ClauseDecomposition::key() const {
  std::string out = "{sel:";
  for (const auto& i : select_items) out += i + ";";
  out += "|where:" + where_key + "|group:";
  for (const auto& g : group_cols) out += g + ";";
  out += "|having:" + having_key + "|order:";
  for (const auto& [col, desc] : order_spec) out += col + (desc ? " desc" : " asc") + ";";
  out += std::string("|limit:") + (has_limit ? "1" : "0") + "|from:";
  for (const auto& f : from_tables) out += f + ";";
  out += "|on:";
  for (const auto& j : join_conds) out += j + ";";
  if (set_op >= 0) {
    out += "|setop:" + std::string(rule_name(static_cast<Rule>(set_op))) + "[";
    for (const auto& c : set_children) out += c + ",";
    out += "]";
  }
  out += "}";
  return out;
}

ClauseDecomposition decompose_clauses(const TreePtr& t, const Schema& s) {
  if (!t || !t->is_complete())
    throw std::invalid_argument("decompose_clauses: not a complete query");
  TreePtr canon = canonicalize(t, s);
  ClauseDecomposition d;

  const SqlNode* n = canon.get();
  if (n->shape == RelShape::Limited) {
    d.has_limit = true;
    n = n->right.get();
  }
  if (n->shape == RelShape::Ordered) {
    const SqlNode& spec = *n->left;
    d.order_spec.emplace_back(spec.left->serial, spec.rule == Rule::Desc);
    n = n->right.get();
  }
  if (n->is_set_op) {
    d.set_op = static_cast<int>(n->rule);
    std::vector<std::string> kids = {decompose_clauses(n->left, s).key(),
                                     decompose_clauses(n->right, s).key()};
    if (n->rule != Rule::Except) std::sort(kids.begin(), kids.end());
    d.set_children = std::move(kids);
    return d;
  }

  Spine sp = split_spine(n);
  std::vector<TreePtr> items;
  collect_items(sp.project->left, items);
  for (const auto& item : items) d.select_items.insert(item->serial);
  if (sp.where) d.where_key = masked_serial(sp.where->left, s);
  if (sp.group) d.group_cols.insert(sp.group->left->serial);
  if (sp.having) d.having_key = masked_serial(sp.having->left, s);
  walk_from(TreePtr(canon, sp.from), s, d);  // aliasing pointer into canon
  return d;
}

bool exact_set_match(const TreePtr& pred, const TreePtr& gold, const Schema& s) {
  return decompose_clauses(pred, s) == decompose_clauses(gold, s);
}

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
    case Difficulty::Extra: return "extra";
  }
  return "?";
}

namespace {

int pred_atoms(const SqlNode& p) {
  if (p.rule == Rule::And || p.rule == Rule::Or)
    return pred_atoms(*p.left) + pred_atoms(*p.right);
  if (p.rule == Rule::Not) return pred_atoms(*p.left);
  return 1;
}

int subquery_count(const SqlNode& n) {
  int count = 0;
  if ((n.rule == Rule::In || n.rule == Rule::NotIn) && n.right) ++count;
  if (n.left) count += subquery_count(*n.left);
  if (n.right) count += subquery_count(*n.right);
  return count;
}

}  // namespace

Difficulty difficulty_of(const TreePtr& t, const Schema& s) {
  TreePtr canon = canonicalize(t, s);
  int score = 0;
  const SqlNode* n = canon.get();
  if (n->shape == RelShape::Limited) {
    ++score;
    n = n->right.get();
  }
  if (n->shape == RelShape::Ordered) {
    ++score;
    n = n->right.get();
  }
  if (n->is_set_op) {
    score += 2;
    // score the heavier operand
    const Difficulty a = difficulty_of(n->left, s);
    const Difficulty b = difficulty_of(n->right, s);
    const int base = std::max(static_cast<int>(a), static_cast<int>(b));
    score += base * 2;  // coarse: operands contribute their own bucket
    return score <= 1   ? Difficulty::Easy
           : score <= 3 ? Difficulty::Medium
           : score <= 5 ? Difficulty::Hard
                        : Difficulty::Extra;
  }
  Spine sp = split_spine(n);
  std::vector<TreePtr> items;
  collect_items(sp.project->left, items);
  for (const auto& item : items)
    if (item->sem_type == SemType::Aggregate) ++score;
  if (sp.where) score += pred_atoms(*sp.where->left);
  if (sp.group) ++score;
  if (sp.having) ++score;
  score += 2 * subquery_count(*canon);
  ClauseDecomposition d = decompose_clauses(canon, s);
  score += std::max(0, static_cast<int>(d.from_tables.size()) - 1);
  return score <= 1   ? Difficulty::Easy
         : score <= 3 ? Difficulty::Medium
         : score <= 5 ? Difficulty::Hard
                      : Difficulty::Extra;
}

EvalReport evaluate_corpus(const std::vector<EvalCase>& cases) {
  EvalReport report;
  for (const auto& c : cases) {
    ExampleEval ex;
    TreePtr gold;
    try {
      gold = parse_sql(c.gold_sql, *c.schema);
    } catch (const std::exception&) {
      ex.gold_error = true;
      report.examples.push_back(ex);
      ++report.excluded;
      continue;
    }
    ex.bucket = difficulty_of(gold, *c.schema);
    TreePtr pred;
    try {
      pred = parse_sql(c.pred_sql, *c.schema);
      ex.parsed = true;
    } catch (const std::exception&) {
      ex.parsed = false;
    }
    if (ex.parsed) {
      ex.em = exact_set_match(pred, gold, *c.schema);
      if (c.db) {
        try {
          ex.exec = execution_match(pred, gold, *c.db, *c.schema);
        } catch (const ExecError&) {
          // gold-side execution failure: dataset problem
          ex.gold_error = true;
          ex.em = false;
          ex.exec = false;
          report.examples.push_back(ex);
          ++report.excluded;
          continue;
        }
      }
    }
    report.examples.push_back(ex);
    ++report.overall.count;
    auto& bucket = report.by_bucket[static_cast<int>(ex.bucket)];
    ++bucket.count;
    if (ex.em) {
      ++report.overall.em_hits;
      ++bucket.em_hits;
    }
    if (ex.exec) {
      ++report.overall.exec_hits;
      ++bucket.exec_hits;
    }
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["count"] = overall.count;
  j["excluded"] = excluded;
  j["em_rate"] = overall.em_rate();
  j["exec_rate"] = overall.exec_rate();
  for (int b = 0; b < 4; ++b) {
    nlohmann::json bj;
    bj["count"] = by_bucket[b].count;
    bj["em_rate"] = by_bucket[b].em_rate();
    bj["exec_rate"] = by_bucket[b].exec_rate();
    j["buckets"][difficulty_name(static_cast<Difficulty>(b))] = bj;
  }
  nlohmann::json exs = nlohmann::json::array();
  for (const auto& ex : examples) {
    exs.push_back({{"em", ex.em},
                   {"exec", ex.exec},
                   {"parsed", ex.parsed},
                   {"gold_error", ex.gold_error},
                   {"bucket", difficulty_name(ex.bucket)}});
  }
  j["examples"] = exs;
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << "bucket   count  em      exec\n";
  auto line = [&](const char* name, const BucketStats& st) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%-8s %5d  %5.3f  %5.3f\n", name, st.count, st.em_rate(),
                  st.exec_rate());
    out << buf;
  };
  for (int b = 0; b < 4; ++b)
    line(difficulty_name(static_cast<Difficulty>(b)), by_bucket[b]);
  line("all", overall);
  if (excluded) out << "excluded (gold errors): " << excluded << "\n";
  return out.str();
}

}  // namespace rasap

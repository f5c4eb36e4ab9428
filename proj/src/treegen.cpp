#include "rasap/treegen.hpp"

#include <algorithm>
#include <stdexcept>

namespace rasap {

namespace {

class Generator {
 public:
  Generator(const Schema& s, std::mt19937_64& rng, const TreeGenOptions& opts)
      : s_(s), rng_(rng), opts_(opts) {}

  TreePtr query() {
    for (int attempt = 0; attempt < 64; ++attempt) {
      TreePtr q = try_query(opts_.allow_set_ops && chance(0.15), opts_.allow_subqueries);
      if (q && q->height <= opts_.max_height) return q;
    }
    throw std::runtime_error("random_query: could not generate within height budget");
  }

 private:
  const Schema& s_;
  std::mt19937_64& rng_;
  const TreeGenOptions& opts_;

  bool chance(double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p;
  }
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::vector<int> columns_of(int table) const {
    std::vector<int> out;
    for (int c = 0; c < static_cast<int>(s_.columns.size()); ++c)
      if (s_.columns[c].table_index == table) out.push_back(c);
    return out;
  }

  TreePtr apply(Rule r, std::vector<TreePtr> ch) { return apply_or_throw(r, ch, s_); }

  TreePtr value_for(int col) {
    const auto& def = s_.columns[col];
    if (def.type_tag == ColumnType::Number) {
      const int v = uniform(1, 2000);
      Literal lit{ColumnType::Number, std::to_string(v), static_cast<double>(v),
                  Literal::Source::QuestionSpan};
      return make_value_leaf(lit);
    }
    std::string text;
    auto it = s_.cell_values.find(col);
    if (it != s_.cell_values.end() && !it->second.empty()) {
      text = it->second[uniform(0, static_cast<int>(it->second.size()) - 1)];
    } else {
      text = "w" + std::to_string(uniform(0, 20));
    }
    Literal lit{ColumnType::Text, text, 0.0, Literal::Source::QuestionSpan};
    return make_value_leaf(lit);
  }

  TreePtr atom(const std::vector<int>& scope, bool allow_sub) {
    const int col = scope[uniform(0, static_cast<int>(scope.size()) - 1)];
    const auto colleaf = make_column_leaf(col, s_);
    const bool is_num = s_.columns[col].type_tag == ColumnType::Number;
    if (allow_sub && chance(0.18)) {
      if (TreePtr sub = subquery_matching(col)) {
        return apply(chance(0.5) ? Rule::In : Rule::NotIn, {colleaf, sub});
      }
    }
    if (!is_num && chance(0.3)) {
      // LIKE with a single word drawn from a value
      TreePtr v = value_for(col);
      std::string word = v->literal.text;
      const auto space = word.find(' ');
      if (space != std::string::npos) word = word.substr(0, space);
      if (word.empty()) word = "w";
      Literal lit{ColumnType::Text, word, 0.0, Literal::Source::QuestionSpan};
      return apply(Rule::Like, {colleaf, make_value_leaf(lit)});
    }
    static const Rule num_ops[] = {Rule::Eq, Rule::Ne, Rule::Gt, Rule::Ge, Rule::Lt, Rule::Le};
    static const Rule txt_ops[] = {Rule::Eq, Rule::Ne};
    const Rule op = is_num ? num_ops[uniform(0, 5)] : txt_ops[uniform(0, 1)];
    return apply(op, {colleaf, value_for(col)});
  }

  TreePtr pred(const std::vector<int>& scope, bool allow_sub) {
    TreePtr p = atom(scope, allow_sub);
    const int extra = uniform(0, 2);
    for (int i = 0; i < extra; ++i) {
      TreePtr q = atom(scope, false);
      p = apply(chance(0.7) ? Rule::And : Rule::Or, {p, q});
    }
    if (chance(0.12)) p = apply(Rule::Not, {p});
    return p;
  }

  // single-column subquery whose projected type matches `col`
  TreePtr subquery_matching(int col) {
    const ColumnType want = s_.columns[col].type_tag;
    std::vector<int> candidates;
    for (int c = 0; c < static_cast<int>(s_.columns.size()); ++c)
      if (s_.columns[c].type_tag == want) candidates.push_back(c);
    if (candidates.empty()) return nullptr;
    const int target = candidates[uniform(0, static_cast<int>(candidates.size()) - 1)];
    const int table = s_.columns[target].table_index;
    TreePtr spine = make_table_leaf(table, s_);
    if (chance(0.5)) spine = apply(Rule::Selection, {pred(columns_of(table), false), spine});
    return apply(Rule::Project, {make_column_leaf(target, s_), spine});
  }

  TreePtr agg_item(const std::vector<int>& scope) {
    const int kind = uniform(0, 4);
    if (kind == 0) {
      TreePtr star = make_column_leaf(-1, s_);
      return apply(Rule::Count, {star});
    }
    std::vector<int> nums;
    for (int c : scope)
      if (s_.columns[c].type_tag == ColumnType::Number) nums.push_back(c);
    const Rule r = kind == 1 ? Rule::Sum : kind == 2 ? Rule::Avg : kind == 3 ? Rule::Min
                                                                             : Rule::Max;
    if ((r == Rule::Sum || r == Rule::Avg) && nums.empty())
      return apply(Rule::Count, {make_column_leaf(-1, s_)});
    const std::vector<int>& pool = (r == Rule::Sum || r == Rule::Avg) ? nums : scope;
    TreePtr col = make_column_leaf(pool[uniform(0, static_cast<int>(pool.size()) - 1)], s_);
    if (r == Rule::Count && chance(0.3)) col = apply(Rule::Distinct, {col});
    return apply(r, {col});
  }

  TreePtr core(bool allow_sub) {
    // FROM
    int base = uniform(0, static_cast<int>(s_.tables.size()) - 1);
    TreePtr from = make_table_leaf(base, s_);
    std::vector<int> scope = columns_of(base);
    if (opts_.allow_joins && chance(0.25) && !s_.foreign_keys.empty()) {
      const auto [ca, cb] = s_.foreign_keys[uniform(
          0, static_cast<int>(s_.foreign_keys.size()) - 1)];
      const int ta = s_.columns[ca].table_index;
      const int tb = s_.columns[cb].table_index;
      if (ta != tb && s_.columns[ca].type_tag == s_.columns[cb].type_tag) {
        TreePtr product =
            apply(Rule::CrossJoin, {make_table_leaf(ta, s_), make_table_leaf(tb, s_)});
        TreePtr cond = apply(Rule::Eq, {make_column_leaf(ca, s_), make_column_leaf(cb, s_)});
        from = apply(Rule::JoinOn, {cond, product});
        scope = columns_of(ta);
        const auto more = columns_of(tb);
        scope.insert(scope.end(), more.begin(), more.end());
      }
    }

    TreePtr spine = from;
    if (chance(0.55)) spine = apply(Rule::Selection, {pred(scope, allow_sub), spine});

    const bool grouped = chance(0.3);
    int group_col = -1;
    if (grouped) {
      group_col = scope[uniform(0, static_cast<int>(scope.size()) - 1)];
      spine = apply(Rule::GroupBy, {make_column_leaf(group_col, s_), spine});
      if (chance(0.5)) {
        TreePtr cnt = apply(Rule::Count, {make_column_leaf(-1, s_)});
        const int threshold = uniform(1, 5);
        Literal lit{ColumnType::Number, std::to_string(threshold),
                    static_cast<double>(threshold), Literal::Source::QuestionSpan};
        static const Rule ops[] = {Rule::Ge, Rule::Gt, Rule::Eq, Rule::Le};
        TreePtr having = apply(ops[uniform(0, 3)], {cnt, make_value_leaf(lit)});
        spine = apply(Rule::Having, {having, spine});
      }
    }

    // SELECT
    std::vector<TreePtr> items;
    if (grouped) {
      items.push_back(make_column_leaf(group_col, s_));
      if (chance(0.7)) items.push_back(agg_item(scope));
    } else if (chance(0.25)) {
      items.push_back(agg_item(scope));
    } else {
      const int k = uniform(1, 2);
      std::vector<int> pool = scope;
      std::shuffle(pool.begin(), pool.end(), rng_);
      for (int i = 0; i < k && i < static_cast<int>(pool.size()); ++i) {
        TreePtr col = make_column_leaf(pool[i], s_);
        items.push_back(col);
      }
      if (items.size() == 1 && chance(0.2))
        items[0] = apply(Rule::Distinct, {items[0]});
    }
    TreePtr list = items.back();
    for (int i = static_cast<int>(items.size()) - 2; i >= 0; --i)
      list = apply(Rule::List, {items[i], list});
    TreePtr q = apply(Rule::Project, {list, spine});

    // ORDER BY / LIMIT only over plain-column projections
    if (!grouped && chance(0.3)) {
      TreePtr key = make_column_leaf(scope[uniform(0, static_cast<int>(scope.size()) - 1)], s_);
      TreePtr spec = apply(chance(0.5) ? Rule::Asc : Rule::Desc, {key});
      q = apply(Rule::OrderBy, {spec, q});
      if (chance(0.6)) {
        const int n = uniform(1, 10);
        Literal lit{ColumnType::Number, std::to_string(n), static_cast<double>(n),
                    Literal::Source::QuestionSpan};
        q = apply(Rule::Limit, {make_value_leaf(lit), q});
      }
    }
    return q;
  }

  TreePtr try_query(bool set_op, bool allow_sub) {
    if (!set_op) return core(allow_sub);
    // Arity/type-matched operands: same table, same projected column.
    const int table = uniform(0, static_cast<int>(s_.tables.size()) - 1);
    const auto cols = columns_of(table);
    const int col = cols[uniform(0, static_cast<int>(cols.size()) - 1)];
    auto operand = [&]() {
      TreePtr spine = make_table_leaf(table, s_);
      spine = apply(Rule::Selection, {pred(cols, false), spine});
      return apply(Rule::Project, {make_column_leaf(col, s_), spine});
    };
    static const Rule ops[] = {Rule::Union, Rule::Intersect, Rule::Except};
    return apply(ops[uniform(0, 2)], {operand(), operand()});
  }
};

}  // namespace

TreePtr random_query(const Schema& s, std::mt19937_64& rng, const TreeGenOptions& opts) {
  if (s.tables.empty() || s.columns.empty())
    throw std::invalid_argument("random_query: schema has no tables or columns");
  Generator g(s, rng, opts);
  return g.query();
}

}  // namespace rasap

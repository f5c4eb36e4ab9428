#include "rasap/synth.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "rasap/sql_tree.hpp"

namespace rasap {

namespace {

std::string spoken(const std::string& original_name) {
  std::string out;
  for (char c : original_name) out += c == '_' ? ' ' : c;
  return out;
}

struct Filler {
  const Schema& s;
  std::mt19937_64& rng;

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  int any_table() { return uniform(0, static_cast<int>(s.tables.size()) - 1); }

  std::vector<int> columns_of(int t, bool numeric_only = false,
                              bool text_only = false) const {
    std::vector<int> out;
    for (int c = 0; c < static_cast<int>(s.columns.size()); ++c) {
      if (s.columns[c].table_index != t) continue;
      if (numeric_only && s.columns[c].type_tag != ColumnType::Number) continue;
      if (text_only && s.columns[c].type_tag != ColumnType::Text) continue;
      out.push_back(c);
    }
    return out;
  }

  int pick(const std::vector<int>& pool) {
    return pool[uniform(0, static_cast<int>(pool.size()) - 1)];
  }

  const std::string& tname(int t) const { return s.tables[t].original_name; }
  const std::string& cname(int c) const { return s.columns[c].original_name; }

  int number_value() { return uniform(1, 2000); }

  std::string text_value(int col) {
    auto it = s.cell_values.find(col);
    if (it != s.cell_values.end() && !it->second.empty())
      return it->second[uniform(0, static_cast<int>(it->second.size()) - 1)];
    return "w" + std::to_string(uniform(0, 30));
  }

  std::string one_word(const std::string& value) {
    const auto space = value.find(' ');
    std::string word = space == std::string::npos ? value : value.substr(0, space);
    return word.empty() ? "w" : word;
  }

  // a simple comparison condition; both clauses of the pair speak and spell it
  struct Cond {
    std::string text;  // question phrasing
    std::string sql;
  };

  Cond num_cond(int col) {
    static const struct {
      const char* phrase;
      const char* op;
    } ops[] = {{"is greater than", ">"}, {"is less than", "<"},   {"is at least", ">="},
               {"is at most", "<="},     {"is exactly", "="},     {"is not", "!="}};
    const auto& op = ops[uniform(0, 5)];
    const int v = number_value();
    return {spoken(cname(col)) + " " + op.phrase + " " + std::to_string(v),
            cname(col) + " " + op.op + " " + std::to_string(v)};
  }

  Cond text_cond(int col) {
    const std::string v = text_value(col);
    if (uniform(0, 1)) {
      return {spoken(cname(col)) + " equals '" + v + "'", cname(col) + " = '" + v + "'"};
    }
    return {spoken(cname(col)) + " is not '" + v + "'", cname(col) + " != '" + v + "'"};
  }

  Cond any_cond(int table) {
    const auto nums = columns_of(table, true);
    const auto texts = columns_of(table, false, true);
    if (!nums.empty() && (texts.empty() || uniform(0, 1))) return num_cond(pick(nums));
    if (!texts.empty()) return text_cond(pick(texts));
    return num_cond(pick(columns_of(table, true)));
  }
};

Example make_example(const Schema& s, int template_id, std::mt19937_64& rng) {
  Filler f{s, rng};
  Example ex;
  ex.db_id = s.db_id;
  const int t = f.any_table();
  const auto cols = f.columns_of(t);
  const auto nums = f.columns_of(t, true);
  const auto texts = f.columns_of(t, false, true);
  const std::string table_spoken = spoken(f.tname(t));

  switch (template_id) {
    case 0: {  // plain projection
      const int c = f.pick(cols);
      ex.question = "List the " + spoken(f.cname(c)) + " of all " + table_spoken + " .";
      ex.gold_sql = "SELECT " + f.cname(c) + " FROM " + f.tname(t);
      break;
    }
    case 1: {  // two-column projection
      const int c1 = f.pick(cols);
      const int c2 = f.pick(cols);
      ex.question = "List the " + spoken(f.cname(c1)) + " and the " + spoken(f.cname(c2)) +
                    " of all " + table_spoken + " .";
      ex.gold_sql = "SELECT " + f.cname(c1) + ", " + f.cname(c2) + " FROM " + f.tname(t);
      break;
    }
    case 2: {  // distinct
      const int c = f.pick(cols);
      ex.question =
          "List the distinct " + spoken(f.cname(c)) + " of " + table_spoken + " .";
      ex.gold_sql = "SELECT DISTINCT " + f.cname(c) + " FROM " + f.tname(t);
      break;
    }
    case 3: {  // count rows
      ex.question = "How many rows does " + table_spoken + " have ?";
      ex.gold_sql = "SELECT count(*) FROM " + f.tname(t);
      break;
    }
    case 4:
    case 23:
    case 24:
    case 25: {  // numeric aggregates, one template per function
      static const struct {
        const char* phrase;
        const char* fn;
      } aggs[] = {{"total", "sum"}, {"average", "avg"}, {"minimum", "min"},
                  {"maximum", "max"}};
      if (nums.empty()) return make_example(s, 3, rng);
      const auto& agg = aggs[template_id == 4 ? 0 : template_id - 22];
      const int c = f.pick(nums);
      ex.question = std::string("What is the ") + agg.phrase + " " + spoken(f.cname(c)) +
                    " of " + table_spoken + " ?";
      ex.gold_sql =
          "SELECT " + std::string(agg.fn) + "(" + f.cname(c) + ") FROM " + f.tname(t);
      break;
    }
    case 5: {  // count distinct
      const int c = f.pick(cols);
      ex.question = "How many distinct " + spoken(f.cname(c)) + " values does " +
                    table_spoken + " have ?";
      ex.gold_sql = "SELECT count(DISTINCT " + f.cname(c) + ") FROM " + f.tname(t);
      break;
    }
    case 6: {  // numeric filter
      if (nums.empty()) return make_example(s, 0, rng);
      const int proj = f.pick(cols);
      auto cond = f.num_cond(f.pick(nums));
      ex.question = "List the " + spoken(f.cname(proj)) + " of " + table_spoken +
                    " whose " + cond.text + " .";
      ex.gold_sql =
          "SELECT " + f.cname(proj) + " FROM " + f.tname(t) + " WHERE " + cond.sql;
      break;
    }
    case 7: {  // text filter
      if (texts.empty()) return make_example(s, 6, rng);
      const int proj = f.pick(cols);
      auto cond = f.text_cond(f.pick(texts));
      ex.question = "List the " + spoken(f.cname(proj)) + " of " + table_spoken +
                    " whose " + cond.text + " .";
      ex.gold_sql =
          "SELECT " + f.cname(proj) + " FROM " + f.tname(t) + " WHERE " + cond.sql;
      break;
    }
    case 8: {  // LIKE
      if (texts.empty()) return make_example(s, 6, rng);
      const int c = f.pick(texts);
      const std::string word = f.one_word(f.text_value(c));
      const int proj = f.pick(cols);
      ex.question = "List the " + spoken(f.cname(proj)) + " of " + table_spoken +
                    " whose " + spoken(f.cname(c)) + " contains '" + word + "' .";
      ex.gold_sql = "SELECT " + f.cname(proj) + " FROM " + f.tname(t) + " WHERE " +
                    f.cname(c) + " LIKE '%" + word + "%'";
      break;
    }
    case 9: {  // conjunction
      auto c1 = f.any_cond(t);
      auto c2 = f.any_cond(t);
      const int proj = f.pick(cols);
      ex.question = "List the " + spoken(f.cname(proj)) + " of " + table_spoken +
                    " whose " + c1.text + " and whose " + c2.text + " .";
      ex.gold_sql = "SELECT " + f.cname(proj) + " FROM " + f.tname(t) + " WHERE " + c1.sql +
                    " AND " + c2.sql;
      break;
    }
    case 10: {  // disjunction
      auto c1 = f.any_cond(t);
      auto c2 = f.any_cond(t);
      const int proj = f.pick(cols);
      ex.question = "List the " + spoken(f.cname(proj)) + " of " + table_spoken +
                    " whose " + c1.text + " or whose " + c2.text + " .";
      ex.gold_sql = "SELECT " + f.cname(proj) + " FROM " + f.tname(t) + " WHERE " + c1.sql +
                    " OR " + c2.sql;
      break;
    }
    case 11: {  // negation
      auto cond = f.any_cond(t);
      const int proj = f.pick(cols);
      ex.question = "List the " + spoken(f.cname(proj)) + " of " + table_spoken +
                    " where it is not true that the " + cond.text + " .";
      ex.gold_sql =
          "SELECT " + f.cname(proj) + " FROM " + f.tname(t) + " WHERE NOT " + cond.sql;
      break;
    }
    case 12: {  // group + count
      const int c = f.pick(cols);
      ex.question =
          "For each " + spoken(f.cname(c)) + " of " + table_spoken + " count the rows .";
      ex.gold_sql = "SELECT " + f.cname(c) + ", count(*) FROM " + f.tname(t) +
                    " GROUP BY " + f.cname(c);
      break;
    }
    case 13: {  // having threshold
      const int c = f.pick(cols);
      const int k = f.uniform(1, 5);
      ex.question = "List the " + spoken(f.cname(c)) + " values that appear at least " +
                    std::to_string(k) + " times in " + table_spoken + " .";
      ex.gold_sql = "SELECT " + f.cname(c) + " FROM " + f.tname(t) + " GROUP BY " +
                    f.cname(c) + " HAVING count(*) >= " + std::to_string(k);
      break;
    }
    case 14: {  // order by
      const int proj = f.pick(cols);
      const int key = f.pick(cols);
      const bool desc = f.uniform(0, 1) == 1;
      ex.question = "List the " + spoken(f.cname(proj)) + " of " + table_spoken +
                    " ordered by " + spoken(f.cname(key)) +
                    (desc ? " descending ." : " ascending .");
      ex.gold_sql = "SELECT " + f.cname(proj) + " FROM " + f.tname(t) + " ORDER BY " +
                    f.cname(key) + (desc ? " DESC" : " ASC");
      break;
    }
    case 15: {  // order + limit
      const int proj = f.pick(cols);
      const int key = f.pick(cols);
      const int k = f.uniform(1, 10);
      ex.question = "List the top " + std::to_string(k) + " " + spoken(f.cname(proj)) +
                    " of " + table_spoken + " ordered by " + spoken(f.cname(key)) +
                    " descending .";
      ex.gold_sql = "SELECT " + f.cname(proj) + " FROM " + f.tname(t) + " ORDER BY " +
                    f.cname(key) + " DESC LIMIT " + std::to_string(k);
      break;
    }
    case 16:    // IN subquery over a foreign key
    case 17: {  // NOT IN variant
      if (s.foreign_keys.empty()) return make_example(s, 9, rng);
      const auto [ca, cb] =
          s.foreign_keys[f.uniform(0, static_cast<int>(s.foreign_keys.size()) - 1)];
      const int ta = s.columns[ca].table_index;
      const int tb = s.columns[cb].table_index;
      if (ta == tb) return make_example(s, 9, rng);
      auto cond = f.any_cond(tb);
      const int proj = f.pick(f.columns_of(ta));
      const bool negated = template_id == 17;
      ex.question = std::string("List the ") + spoken(f.cname(proj)) + " of " +
                    spoken(f.tname(ta)) + (negated ? " that have no " : " that have a ") +
                    spoken(f.tname(tb)) + " whose " + cond.text + " .";
      ex.gold_sql = "SELECT " + f.cname(proj) + " FROM " + f.tname(ta) + " WHERE " +
                    f.cname(ca) + (negated ? " NOT IN (" : " IN (") + "SELECT " +
                    f.cname(cb) + " FROM " + f.tname(tb) + " WHERE " + cond.sql + ")";
      break;
    }
    case 18: {  // join through a foreign key
      if (s.foreign_keys.empty()) return make_example(s, 9, rng);
      const auto [ca, cb] =
          s.foreign_keys[f.uniform(0, static_cast<int>(s.foreign_keys.size()) - 1)];
      const int ta = s.columns[ca].table_index;
      const int tb = s.columns[cb].table_index;
      if (ta == tb) return make_example(s, 9, rng);
      auto cond = f.any_cond(tb);
      const int proj = f.pick(f.columns_of(ta));
      ex.question = "Show the " + spoken(f.cname(proj)) + " of " + spoken(f.tname(ta)) +
                    " joined with " + spoken(f.tname(tb)) + " where the " + cond.text + " .";
      ex.gold_sql = "SELECT " + f.tname(ta) + "." + f.cname(proj) + " FROM " + f.tname(ta) +
                    " JOIN " + f.tname(tb) + " ON " + f.tname(ta) + "." + f.cname(ca) +
                    " = " + f.tname(tb) + "." + f.cname(cb) + " WHERE " + cond.sql;
      break;
    }
    case 19: {  // cross join pairing
      if (s.tables.size() < 2) return make_example(s, 1, rng);
      int t2 = f.any_table();
      if (t2 == t) t2 = (t + 1) % static_cast<int>(s.tables.size());
      const int c1 = f.pick(f.columns_of(t));
      const int c2 = f.pick(f.columns_of(t2));
      ex.question = "Pair every " + spoken(f.cname(c1)) + " of " + table_spoken +
                    " with every " + spoken(f.cname(c2)) + " of " + spoken(f.tname(t2)) +
                    " .";
      ex.gold_sql = "SELECT " + f.tname(t) + "." + f.cname(c1) + ", " + f.tname(t2) + "." +
                    f.cname(c2) + " FROM " + f.tname(t) + ", " + f.tname(t2);
      break;
    }
    case 20:    // union
    case 21:    // intersect
    case 22: {  // except
      const int c = f.pick(cols);
      auto c1 = f.any_cond(t);
      auto c2 = f.any_cond(t);
      const char* word = template_id == 20   ? " or alternatively whose "
                         : template_id == 21 ? " and also whose "
                                             : " but not whose ";
      const char* op = template_id == 20   ? " UNION "
                       : template_id == 21 ? " INTERSECT "
                                           : " EXCEPT ";
      ex.question = "List the " + spoken(f.cname(c)) + " of " + table_spoken + " whose " +
                    c1.text + word + c2.text + " .";
      ex.gold_sql = "SELECT " + f.cname(c) + " FROM " + f.tname(t) + " WHERE " + c1.sql +
                    op + "SELECT " + f.cname(c) + " FROM " + f.tname(t) + " WHERE " +
                    c2.sql;
      break;
    }
    default:
      throw std::logic_error("unknown template");
  }
  return ex;
}

constexpr int kTemplateCount = 26;

}  // namespace

std::vector<Example> generate_synthetic(std::uint64_t seed, int n,
                                        const std::map<std::string, Schema>& schema_pool) {
  if (n <= 0) throw std::invalid_argument("generate_synthetic: n must be positive");
  if (schema_pool.empty())
    throw std::invalid_argument("generate_synthetic: empty schema pool");
  std::vector<const Schema*> pool;
  for (const auto& [id, s] : schema_pool) pool.push_back(&s);
  std::vector<Example> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    // one private stream per example: insertion order cannot leak state
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(i));
    const Schema& s = *pool[i % pool.size()];
    out.push_back(make_example(s, i % kTemplateCount, rng));
  }
  return out;
}

}  // namespace rasap

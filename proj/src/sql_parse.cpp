#include "rasap/sql_parse.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace rasap {

namespace {

enum class Tok { Ident, Number, String, Symbol, End };

struct Token {
  Tok kind;
  std::string text;   // lowercased for idents, raw for strings
  double num = 0.0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) {
    std::size_t i = 0;
    const std::size_t n = src.size();
    while (i < n) {
      const char c = src[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t b = i;
        while (i < n && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_')) ++i;
        std::string t = src.substr(b, i - b);
        for (char& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        toks_.push_back({Tok::Ident, std::move(t)});
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
        std::size_t b = i;
        while (i < n && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '.')) ++i;
        Token t{Tok::Number, src.substr(b, i - b)};
        t.num = std::strtod(t.text.c_str(), nullptr);
        toks_.push_back(std::move(t));
        continue;
      }
      if (c == '\'' || c == '"') {
        const char q = c;
        std::string out;
        ++i;
        bool closed = false;
        while (i < n) {
          if (src[i] == q) {
            if (q == '\'' && i + 1 < n && src[i + 1] == '\'') {
              out += '\'';
              i += 2;
              continue;
            }
            ++i;
            closed = true;
            break;
          }
          out += src[i++];
        }
        if (!closed) throw SqlParseError("unterminated string literal");
        toks_.push_back({Tok::String, std::move(out)});
        continue;
      }
      // multi-char operators
      if ((c == '!' || c == '<' || c == '>') && i + 1 < n &&
          (src[i + 1] == '=' || (c == '<' && src[i + 1] == '>'))) {
        toks_.push_back({Tok::Symbol, src.substr(i, 2)});
        i += 2;
        continue;
      }
      toks_.push_back({Tok::Symbol, std::string(1, c)});
      ++i;
    }
    toks_.push_back({Tok::End, ""});
  }

  const Token& peek(int ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  Token next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool eat_symbol(const std::string& s) {
    if (peek().kind == Tok::Symbol && peek().text == s) {
      next();
      return true;
    }
    return false;
  }
  bool eat_kw(const std::string& kw) {
    if (peek().kind == Tok::Ident && peek().text == kw) {
      next();
      return true;
    }
    return false;
  }
  bool peek_kw(const std::string& kw, int ahead = 0) const {
    return peek(ahead).kind == Tok::Ident && peek(ahead).text == kw;
  }
  void expect_symbol(const std::string& s) {
    if (!eat_symbol(s)) throw SqlParseError("expected '" + s + "' near '" + peek().text + "'");
  }
  void expect_kw(const std::string& kw) {
    if (!eat_kw(kw)) throw SqlParseError("expected " + kw + " near '" + peek().text + "'");
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// One source in the FROM clause: a schema table or a derived query.
struct FromSource {
  std::string alias;  // lowercased; empty when none
  int table_index = -1;
  TreePtr derived;  // non-null for subqueries
};

struct UnresolvedColumn {
  std::string qualifier;  // lowercased, may be empty
  std::string name;       // lowercased; "*" for star
};

class Parser {
 public:
  Parser(const std::string& sql, const Schema& schema) : lex_(sql), schema_(schema) {}

  TreePtr parse() {
    TreePtr q = parse_compound();
    if (lex_.eat_symbol(";")) { /* trailing semicolon ok */ }
    if (lex_.peek().kind != Tok::End)
      throw SqlParseError("trailing input near '" + lex_.peek().text + "'");
    return canonicalize(q, schema_);
  }

 private:
  Lexer lex_;
  const Schema& schema_;

  [[noreturn]] void unsupported(const std::string& what) { throw UnsupportedSqlError(what); }

  TreePtr apply(Rule r, const std::vector<TreePtr>& children) {
    auto result = apply_rule(r, children, schema_);
    if (result.error) throw SqlParseError(result.error->message());
    return result.tree;
  }

  // ---- compound query --------------------------------------------------
  TreePtr parse_compound() {
    TreePtr acc = parse_select_core();
    while (true) {
      Rule op;
      if (lex_.eat_kw("union")) {
        if (lex_.peek_kw("all")) unsupported("UNION ALL");
        op = Rule::Union;
      } else if (lex_.eat_kw("intersect")) {
        op = Rule::Intersect;
      } else if (lex_.eat_kw("except")) {
        op = Rule::Except;
      } else {
        break;
      }
      TreePtr rhs = parse_select_core();
      acc = apply(op, {acc, rhs});
    }
    // Trailing ORDER BY / LIMIT bind to the whole compound.
    if (peek_order_by()) {
      eat_order_by();
      acc = apply(Rule::OrderBy, {parse_order_spec(), acc});
    }
    if (lex_.eat_kw("limit")) acc = apply(Rule::Limit, {parse_limit_value(), acc});
    return acc;
  }

  bool peek_order_by() {
    return lex_.peek_kw("orderby") || (lex_.peek_kw("order") && lex_.peek_kw("by", 1));
  }
  void eat_order_by() {
    if (lex_.eat_kw("orderby")) return;
    lex_.expect_kw("order");
    lex_.expect_kw("by");
  }
  bool peek_group_by() {
    return lex_.peek_kw("groupby") || (lex_.peek_kw("group") && lex_.peek_kw("by", 1));
  }
  void eat_group_by() {
    if (lex_.eat_kw("groupby")) return;
    lex_.expect_kw("group");
    lex_.expect_kw("by");
  }

  // ---- select core -------------------------------------------------------
  struct RawItem {
    bool star = false;
    std::optional<Rule> agg;
    bool distinct = false;  // DISTINCT inside aggregate or on the item
    UnresolvedColumn col;
  };

  TreePtr parse_select_core() {
    lex_.expect_kw("select");
    const bool select_distinct = lex_.eat_kw("distinct");
    std::vector<RawItem> raw_items;
    raw_items.push_back(parse_item());
    while (lex_.eat_symbol(",")) raw_items.push_back(parse_item());

    lex_.expect_kw("from");
    std::vector<FromSource> sources;
    TreePtr from = parse_from_clause(sources);

    TreePtr spine = from;
    if (lex_.eat_kw("where")) spine = apply(Rule::Selection, {parse_pred(sources), spine});
    if (peek_group_by()) {
      eat_group_by();
      TreePtr key = resolve_column(parse_colref(), sources);
      if (lex_.peek().kind == Tok::Symbol && lex_.peek().text == ",")
        unsupported("multi-column GROUP BY");
      spine = apply(Rule::GroupBy, {key, spine});
    }
    if (lex_.eat_kw("having")) spine = apply(Rule::Having, {parse_pred(sources), spine});

    TreePtr items = build_items(raw_items, select_distinct, sources);
    TreePtr q = apply(Rule::Project, {items, spine});

    if (peek_order_by()) {
      eat_order_by();
      q = apply(Rule::OrderBy, {parse_order_spec_scoped(sources), q});
      if (lex_.peek().kind == Tok::Symbol && lex_.peek().text == ",")
        unsupported("multi-key ORDER BY");
    }
    if (lex_.eat_kw("limit")) q = apply(Rule::Limit, {parse_limit_value(), q});
    return q;
  }

  RawItem parse_item() {
    RawItem item;
    if (lex_.eat_symbol("*")) {
      item.star = true;
      return item;
    }
    if (auto agg = peek_agg()) {
      item.agg = agg;
      lex_.next();
      lex_.expect_symbol("(");
      if (lex_.eat_kw("distinct")) item.distinct = true;
      if (lex_.eat_symbol("*"))
        item.col = {"", "*"};
      else
        item.col = parse_colref();
      lex_.expect_symbol(")");
      return item;
    }
    if (lex_.eat_kw("distinct")) item.distinct = true;  // e.g. count(distinct x) handled above
    item.col = parse_colref();
    return item;
  }

  std::optional<Rule> peek_agg() const {
    if (lex_.peek().kind != Tok::Ident) return std::nullopt;
    const std::string& t = lex_.peek().text;
    // only when followed by '('
    if (!(lex_.peek(1).kind == Tok::Symbol && lex_.peek(1).text == "(")) return std::nullopt;
    if (t == "count") return Rule::Count;
    if (t == "sum") return Rule::Sum;
    if (t == "avg") return Rule::Avg;
    if (t == "min") return Rule::Min;
    if (t == "max") return Rule::Max;
    return std::nullopt;
  }

  UnresolvedColumn parse_colref() {
    if (lex_.peek().kind != Tok::Ident)
      throw SqlParseError("expected column name near '" + lex_.peek().text + "'");
    std::string first = lex_.next().text;
    if (lex_.eat_symbol(".")) {
      if (lex_.eat_symbol("*")) return {first, "*"};
      if (lex_.peek().kind != Tok::Ident)
        throw SqlParseError("expected column after '" + first + ".'");
      return {first, lex_.next().text};
    }
    return {"", first};
  }

  // ---- FROM --------------------------------------------------------------
  TreePtr parse_from_clause(std::vector<FromSource>& sources) {
    TreePtr acc = parse_from_item(sources);
    while (true) {
      if (lex_.eat_symbol(",")) {
        TreePtr rhs = parse_from_item(sources);
        acc = apply(Rule::CrossJoin, {acc, rhs});
      } else if (lex_.peek_kw("join") || (lex_.peek_kw("inner") && lex_.peek_kw("join", 1))) {
        lex_.eat_kw("inner");
        lex_.expect_kw("join");
        TreePtr rhs = parse_from_item(sources);
        TreePtr product = apply(Rule::CrossJoin, {acc, rhs});
        lex_.expect_kw("on");
        TreePtr cond = parse_pred(sources);
        acc = apply(Rule::JoinOn, {cond, product});
      } else if (lex_.peek_kw("left") || lex_.peek_kw("right") || lex_.peek_kw("full") ||
                 lex_.peek_kw("outer") || lex_.peek_kw("cross")) {
        unsupported("non-inner join");
      } else {
        break;
      }
    }
    return acc;
  }

  TreePtr parse_from_item(std::vector<FromSource>& sources) {
    FromSource src;
    TreePtr node;
    if (lex_.eat_symbol("(")) {
      node = parse_compound();
      lex_.expect_symbol(")");
      src.derived = node;
    } else {
      if (lex_.peek().kind != Tok::Ident)
        throw SqlParseError("expected table name near '" + lex_.peek().text + "'");
      const std::string name = lex_.next().text;
      src.table_index = find_table(name);
      if (src.table_index < 0) throw SqlParseError("unknown table '" + name + "'");
      for (const auto& other : sources)
        if (other.table_index == src.table_index) unsupported("self-join of " + name);
      node = make_table_leaf(src.table_index, schema_);
    }
    if (lex_.eat_kw("as")) {
      if (lex_.peek().kind != Tok::Ident) throw SqlParseError("expected alias after AS");
      src.alias = lex_.next().text;
    } else if (lex_.peek().kind == Tok::Ident && !reserved(lex_.peek().text)) {
      src.alias = lex_.next().text;
    }
    sources.push_back(src);
    return node;
  }

  static bool reserved(const std::string& w) {
    static const std::set<std::string> kw = {
        "select", "from",  "where",  "group",  "groupby", "having", "order",
        "orderby", "by",   "limit",  "union",  "intersect", "except", "join",
        "inner",  "left",  "right",  "full",   "outer",   "cross",  "on",
        "and",    "or",    "not",    "in",     "like",    "as",     "distinct",
        "asc",    "desc",  "all"};
    return kw.count(w) > 0;
  }

  int find_table(const std::string& lower_name) const {
    for (int t = 0; t < static_cast<int>(schema_.tables.size()); ++t) {
      std::string orig = schema_.tables[t].original_name;
      for (char& c : orig) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (orig == lower_name) return t;
    }
    return -1;
  }

  // ---- name resolution -----------------------------------------------------
  TreePtr resolve_column(const UnresolvedColumn& u, const std::vector<FromSource>& sources) {
    if (u.name == "*") return make_column_leaf(-1, schema_);
    std::vector<int> hits;
    for (const auto& src : sources) {
      if (!u.qualifier.empty()) {
        const bool alias_match = src.alias == u.qualifier;
        const bool name_match =
            src.table_index >= 0 && lower_eq(schema_.tables[src.table_index].original_name,
                                             u.qualifier);
        if (!alias_match && !name_match) continue;
      }
      if (src.table_index >= 0) {
        for (int c = 0; c < static_cast<int>(schema_.columns.size()); ++c)
          if (schema_.columns[c].table_index == src.table_index &&
              lower_eq(schema_.columns[c].original_name, u.name))
            hits.push_back(c);
      } else if (src.derived) {
        for (int c : src.derived->scope)
          if (lower_eq(schema_.columns[c].original_name, u.name)) hits.push_back(c);
      }
    }
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    if (hits.empty())
      throw SqlParseError("unknown column '" + (u.qualifier.empty() ? u.name
                                                : u.qualifier + "." + u.name) + "'");
    if (hits.size() > 1)
      throw SqlParseError("ambiguous column '" + u.name + "'");
    return make_column_leaf(hits[0], schema_);
  }

  static bool lower_eq(const std::string& original, const std::string& lower) {
    if (original.size() != lower.size()) return false;
    for (std::size_t i = 0; i < original.size(); ++i)
      if (std::tolower(static_cast<unsigned char>(original[i])) != lower[i]) return false;
    return true;
  }

  TreePtr build_items(const std::vector<RawItem>& raw, bool select_distinct,
                      const std::vector<FromSource>& sources) {
    std::vector<TreePtr> items;
    for (const auto& r : raw) {
      if (r.star) {
        if (r.agg) throw SqlParseError("bad * usage");
        // expand to the full scope, source by source
        for (const auto& src : sources) {
          if (src.table_index >= 0) {
            for (int c = 0; c < static_cast<int>(schema_.columns.size()); ++c)
              if (schema_.columns[c].table_index == src.table_index)
                items.push_back(make_column_leaf(c, schema_));
          } else if (src.derived) {
            for (int c : src.derived->scope) items.push_back(make_column_leaf(c, schema_));
          }
        }
        continue;
      }
      TreePtr col = resolve_column(r.col, sources);
      if (r.agg) {
        if (r.distinct && col->column_index >= 0)
          col = apply(Rule::Distinct, {col});
        items.push_back(apply(*r.agg, {col}));
      } else {
        if (r.distinct || select_distinct) col = apply(Rule::Distinct, {col});
        items.push_back(col);
      }
    }
    if (items.empty()) throw SqlParseError("empty select list");
    TreePtr acc = items.back();
    for (int i = static_cast<int>(items.size()) - 2; i >= 0; --i)
      acc = apply(Rule::List, {items[i], acc});
    return acc;
  }

  // ---- predicates ------------------------------------------------------------
  TreePtr parse_pred(const std::vector<FromSource>& sources) {
    TreePtr acc = parse_and(sources);
    while (lex_.eat_kw("or")) acc = apply(Rule::Or, {acc, parse_and(sources)});
    return acc;
  }

  TreePtr parse_and(const std::vector<FromSource>& sources) {
    TreePtr acc = parse_not(sources);
    while (lex_.eat_kw("and")) acc = apply(Rule::And, {acc, parse_not(sources)});
    return acc;
  }

  TreePtr parse_not(const std::vector<FromSource>& sources) {
    if (lex_.eat_kw("not")) return apply(Rule::Not, {parse_not(sources)});
    if (lex_.peek().kind == Tok::Symbol && lex_.peek().text == "(") {
      lex_.next();
      TreePtr p = parse_pred(sources);
      lex_.expect_symbol(")");
      return p;
    }
    return parse_atom(sources);
  }

  TreePtr parse_atom(const std::vector<FromSource>& sources) {
    // left operand: aggregate or column
    TreePtr left;
    if (auto agg = peek_agg()) {
      lex_.next();
      lex_.expect_symbol("(");
      bool inner_distinct = lex_.eat_kw("distinct");
      TreePtr col;
      if (lex_.eat_symbol("*"))
        col = make_column_leaf(-1, schema_);
      else
        col = resolve_column(parse_colref(), sources);
      lex_.expect_symbol(")");
      if (inner_distinct) col = apply(Rule::Distinct, {col});
      left = apply(*agg, {col});
    } else {
      left = resolve_column(parse_colref(), sources);
    }

    if (lex_.eat_kw("not")) {
      lex_.expect_kw("in");
      return parse_in(left, sources, true);
    }
    if (lex_.eat_kw("in")) return parse_in(left, sources, false);
    if (lex_.eat_kw("like")) {
      if (lex_.peek().kind != Tok::String) throw SqlParseError("LIKE needs a string pattern");
      std::string pat = lex_.next().text;
      if (pat.size() < 2 || pat.front() != '%' || pat.back() != '%')
        unsupported("LIKE pattern other than '%...%'");
      pat = pat.substr(1, pat.size() - 2);
      if (pat.find('%') != std::string::npos || pat.find('_') != std::string::npos)
        unsupported("LIKE wildcard inside pattern");
      Literal lit{ColumnType::Text, pat, 0.0, Literal::Source::QuestionSpan};
      return apply(Rule::Like, {left, make_value_leaf(lit)});
    }
    if (lex_.eat_kw("between")) unsupported("BETWEEN");
    if (lex_.eat_kw("is")) unsupported("IS NULL");

    Rule op;
    if (lex_.eat_symbol("=")) op = Rule::Eq;
    else if (lex_.eat_symbol("!=") || lex_.eat_symbol("<>")) op = Rule::Ne;
    else if (lex_.eat_symbol(">=")) op = Rule::Ge;
    else if (lex_.eat_symbol("<=")) op = Rule::Le;
    else if (lex_.eat_symbol(">")) op = Rule::Gt;
    else if (lex_.eat_symbol("<")) op = Rule::Lt;
    else throw SqlParseError("expected comparison near '" + lex_.peek().text + "'");

    TreePtr right;
    if (lex_.peek().kind == Tok::Number || lex_.peek().kind == Tok::String ||
        (lex_.peek().kind == Tok::Symbol && lex_.peek().text == "-")) {
      right = parse_value();
    } else if (lex_.peek().kind == Tok::Symbol && lex_.peek().text == "(") {
      unsupported("scalar subquery comparison");
    } else {
      right = resolve_column(parse_colref(), sources);
    }
    return apply(op, {left, right});
  }

  TreePtr parse_in(TreePtr left, const std::vector<FromSource>& sources, bool negated) {
    (void)sources;
    lex_.expect_symbol("(");
    if (!lex_.peek_kw("select")) unsupported("IN with a value list");
    TreePtr sub = parse_compound();
    lex_.expect_symbol(")");
    return apply(negated ? Rule::NotIn : Rule::In, {left, sub});
  }

  TreePtr parse_value() {
    if (lex_.eat_symbol("-")) {
      if (lex_.peek().kind != Tok::Number) throw SqlParseError("expected number after '-'");
      Token t = lex_.next();
      Literal lit{ColumnType::Number, "-" + t.text, -t.num, Literal::Source::QuestionSpan};
      return make_value_leaf(lit);
    }
    Token t = lex_.next();
    if (t.kind == Tok::Number) {
      Literal lit{ColumnType::Number, t.text, t.num, Literal::Source::QuestionSpan};
      return make_value_leaf(lit);
    }
    if (t.kind == Tok::String) {
      Literal lit{ColumnType::Text, t.text, 0.0, Literal::Source::QuestionSpan};
      return make_value_leaf(lit);
    }
    throw SqlParseError("expected a literal value near '" + t.text + "'");
  }

  TreePtr parse_order_spec_scoped(const std::vector<FromSource>& sources) {
    if (peek_agg()) unsupported("ORDER BY aggregate");
    TreePtr col = resolve_column(parse_colref(), sources);
    Rule dir = Rule::Asc;
    if (lex_.eat_kw("desc")) dir = Rule::Desc;
    else lex_.eat_kw("asc");
    return apply(dir, {col});
  }

  TreePtr parse_order_spec() {
    // After a set-op chain there is no source list; reject (the grammar does
    // not order set operations anyway).
    unsupported("ORDER BY over set operations");
  }

  TreePtr parse_limit_value() {
    if (lex_.peek().kind != Tok::Number) throw SqlParseError("LIMIT needs a number");
    Token t = lex_.next();
    Literal lit{ColumnType::Number, t.text, t.num, Literal::Source::QuestionSpan};
    return make_value_leaf(lit);
  }
};

}  // namespace

TreePtr parse_sql(const std::string& sql, const Schema& schema) {
  Parser p(sql, schema);
  return p.parse();
}

}  // namespace rasap

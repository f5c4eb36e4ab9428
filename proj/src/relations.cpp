#include "rasap/relations.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

namespace rasap {

const char* relation_label_name(RelationLabel label) {
  switch (label) {
    case RelationLabel::Self: return "SELF";
    case RelationLabel::QQDistN2: return "QQ-DIST(-2)";
    case RelationLabel::QQDistN1: return "QQ-DIST(-1)";
    case RelationLabel::QQDist0: return "QQ-DIST(0)";
    case RelationLabel::QQDistP1: return "QQ-DIST(1)";
    case RelationLabel::QQDistP2: return "QQ-DIST(2)";
    case RelationLabel::QQNone: return "QQ-NONE";
    case RelationLabel::CCSameTable: return "SAME-TABLE";
    case RelationLabel::CCForeignF: return "FOREIGN-F";
    case RelationLabel::CCForeignR: return "FOREIGN-R";
    case RelationLabel::CCNone: return "CC-NONE";
    case RelationLabel::CTPrimaryKeyF: return "PRIMARY-KEY-F";
    case RelationLabel::CTHasF: return "HAS-F";
    case RelationLabel::CTNone: return "CT-NONE";
    case RelationLabel::TCPrimaryKeyR: return "PRIMARY-KEY-R";
    case RelationLabel::TCHasR: return "HAS-R";
    case RelationLabel::TCNone: return "TC-NONE";
    case RelationLabel::TTForeignF: return "FOREIGN-TAB-F";
    case RelationLabel::TTForeignR: return "FOREIGN-TAB-R";
    case RelationLabel::TTForeignB: return "FOREIGN-TAB-B";
    case RelationLabel::TTNone: return "TT-NONE";
    case RelationLabel::QSNoMatch: return "NO-MATCH";
    case RelationLabel::QSPartialMatch: return "PARTIAL-MATCH";
    case RelationLabel::QSExactMatch: return "EXACT-MATCH";
    case RelationLabel::QCHasValue: return "HAS-VALUE";
    case RelationLabel::SQNoMatchRev: return "NO-MATCH-REV";
    case RelationLabel::SQPartialMatchRev: return "PARTIAL-MATCH-REV";
    case RelationLabel::SQExactMatchRev: return "EXACT-MATCH-REV";
    case RelationLabel::CQHasValueRev: return "HAS-VALUE-REV";
    case RelationLabel::kCount: break;
  }
  throw std::logic_error("relation_label_name: invalid label");
}

NodeKind RelationMatrix::kind_of(int node) const {
  if (node < n_columns) return NodeKind::Column;
  if (node < n_columns + n_tables) return NodeKind::Table;
  return NodeKind::Question;
}

std::string RelationMatrix::node_name(int node, const Schema& s,
                                      const QuestionTokens& q) const {
  switch (kind_of(node)) {
    case NodeKind::Column:
      return "col:" + std::to_string(node) + ":" + s.columns[node].original_name;
    case NodeKind::Table: {
      const int t = node - n_columns;
      return "tab:" + std::to_string(t) + ":" + s.tables[t].original_name;
    }
    case NodeKind::Question: {
      const int i = node - n_columns - n_tables;
      return "q:" + std::to_string(i) + ":" + q.tokens[i];
    }
  }
  return "?";
}

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> normalized_tokens(const std::vector<std::string>& words) {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(normalize_word(w));
  return out;
}

std::string joined(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

std::vector<std::vector<NameMatch>> link_names(const QuestionTokens& q, const Schema& s) {
  const int nq = static_cast<int>(q.tokens.size());
  const int nodes = static_cast<int>(s.columns.size() + s.tables.size());
  std::vector<std::string> qnorm = normalized_tokens(q.tokens);

  struct NodeName {
    std::vector<std::string> tokens;
    std::string full;
  };
  std::vector<NodeName> names;
  names.reserve(nodes);
  for (const auto& c : s.columns) {
    NodeName n{normalized_tokens(c.name_tokens), {}};
    n.full = joined(n.tokens);
    names.push_back(std::move(n));
  }
  for (const auto& t : s.tables) {
    NodeName n{normalized_tokens(t.name_tokens), {}};
    n.full = joined(n.tokens);
    names.push_back(std::move(n));
  }

  std::vector<std::vector<NameMatch>> out(nq, std::vector<NameMatch>(nodes, NameMatch::NoMatch));
  for (int ti = 0; ti < nq; ++ti) {
    for (int node = 0; node < nodes; ++node) {
      const auto& name = names[node];
      const int len = static_cast<int>(name.tokens.size());
      bool exact = false;
      // Exact match: some n-gram of |name| tokens containing ti equals the
      // full normalized name.
      for (int a = std::max(0, ti - len + 1); a <= ti && a + len <= nq; ++a) {
        std::vector<std::string> gram(qnorm.begin() + a, qnorm.begin() + a + len);
        if (joined(gram) == name.full) {
          exact = true;
          break;
        }
      }
      if (exact) {
        out[ti][node] = NameMatch::ExactMatch;
      } else if (std::find(name.tokens.begin(), name.tokens.end(), qnorm[ti]) !=
                 name.tokens.end()) {
        out[ti][node] = NameMatch::PartialMatch;
      }
    }
  }
  return out;
}

std::vector<std::pair<int, int>> link_values(const QuestionTokens& q, const Schema& s) {
  std::vector<std::pair<int, int>> out;
  if (s.cell_values.empty()) return out;
  for (int ti = 0; ti < static_cast<int>(q.tokens.size()); ++ti) {
    const std::string& tok = q.tokens[ti];  // already lowercase
    for (const auto& [col, cells] : s.cell_values) {
      bool hit = false;
      for (const auto& cell : cells) {
        if (lower(cell).find(tok) != std::string::npos) {
          hit = true;
          break;
        }
      }
      if (hit) out.emplace_back(ti, col);
    }
  }
  return out;
}

std::vector<CellMatch> find_cell_matches(const QuestionTokens& q, const Schema& s) {
  std::vector<CellMatch> out;
  if (s.cell_values.empty()) return out;
  const std::string raw_lower = lower(q.raw);
  const int nq = static_cast<int>(q.tokens.size());
  for (const auto& [col, cells] : s.cell_values) {
    for (const auto& cell : cells) {
      const std::string needle = lower(cell);
      if (needle.empty()) continue;
      const auto pos = raw_lower.find(needle);
      if (pos == std::string::npos) continue;
      const int begin_char = static_cast<int>(pos);
      const int end_char = static_cast<int>(pos + needle.size());
      int tb = -1, te = -1;
      for (int i = 0; i < nq; ++i) {
        if (q.spans[i].second > begin_char && q.spans[i].first < end_char) {
          if (tb < 0) tb = i;
          te = i + 1;
        }
      }
      if (tb >= 0) out.push_back({col, tb, te, cell});
    }
  }
  return out;
}

RelationMatrix build_relation_matrix(const QuestionTokens& q, const Schema& s,
                                     const RelationOptions& opts) {
  s.validate();
  RelationMatrix m;
  m.n_columns = static_cast<int>(s.columns.size());
  m.n_tables = static_cast<int>(s.tables.size());
  m.n_question = static_cast<int>(q.tokens.size());
  const int n = m.size();
  m.labels.assign(static_cast<std::size_t>(n) * n, static_cast<int>(RelationLabel::Self));

  auto set = [&](int i, int j, RelationLabel l) {
    m.labels[static_cast<std::size_t>(i) * n + j] = static_cast<int>(l);
  };

  // Schema topology lookups.
  std::set<std::pair<int, int>> fk;  // (from column, to column)
  std::set<std::pair<int, int>> tab_fk;  // (from table, to table)
  for (const auto& [from, to] : s.foreign_keys) {
    fk.emplace(from, to);
    const int tf = s.columns[from].table_index;
    const int tt = s.columns[to].table_index;
    if (tf != tt) tab_fk.emplace(tf, tt);
  }

  const auto names = link_names(q, s);
  std::set<std::pair<int, int>> value_links;
  for (const auto& [tok, col] : link_values(q, s)) value_links.emplace(tok, col);

  const int col0 = 0, tab0 = m.n_columns, q0 = m.n_columns + m.n_tables;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;  // diagonal stays SELF
      const NodeKind ki = m.kind_of(i), kj = m.kind_of(j);
      RelationLabel label;
      if (ki == NodeKind::Question && kj == NodeKind::Question) {
        const int d = (j - q0) - (i - q0);
        if (d < -2 || d > 2) {
          label = RelationLabel::QQNone;
        } else {
          label = static_cast<RelationLabel>(static_cast<int>(RelationLabel::QQDist0) + d);
        }
      } else if (ki == NodeKind::Column && kj == NodeKind::Column) {
        const int ci = i - col0, cj = j - col0;
        if (fk.count({ci, cj}))
          label = RelationLabel::CCForeignF;
        else if (fk.count({cj, ci}))
          label = RelationLabel::CCForeignR;
        else if (s.columns[ci].table_index == s.columns[cj].table_index)
          label = RelationLabel::CCSameTable;
        else
          label = RelationLabel::CCNone;
      } else if (ki == NodeKind::Column && kj == NodeKind::Table) {
        const int ci = i - col0, tj = j - tab0;
        if (s.columns[ci].table_index == tj)
          label = s.columns[ci].is_primary_key ? RelationLabel::CTPrimaryKeyF
                                               : RelationLabel::CTHasF;
        else
          label = RelationLabel::CTNone;
      } else if (ki == NodeKind::Table && kj == NodeKind::Column) {
        const int ti = i - tab0, cj = j - col0;
        if (s.columns[cj].table_index == ti)
          label = s.columns[cj].is_primary_key ? RelationLabel::TCPrimaryKeyR
                                               : RelationLabel::TCHasR;
        else
          label = RelationLabel::TCNone;
      } else if (ki == NodeKind::Table && kj == NodeKind::Table) {
        const int ti = i - tab0, tj = j - tab0;
        const bool f = tab_fk.count({ti, tj}) > 0;
        const bool r = tab_fk.count({tj, ti}) > 0;
        if (f && r)
          label = RelationLabel::TTForeignB;
        else if (f)
          label = RelationLabel::TTForeignF;
        else if (r)
          label = RelationLabel::TTForeignR;
        else
          label = RelationLabel::TTNone;
      } else if (ki == NodeKind::Question) {
        // question -> column/table
        const int tok = i - q0;
        const int node = j;  // columns/tables share the link_names index space
        const NameMatch nm = names[tok][node];
        const bool has_value =
            kj == NodeKind::Column && value_links.count({tok, node - col0}) > 0;
        if (nm == NameMatch::ExactMatch && opts.exact_over_value)
          label = RelationLabel::QSExactMatch;
        else if (has_value)
          label = RelationLabel::QCHasValue;
        else if (nm == NameMatch::ExactMatch)
          label = RelationLabel::QSExactMatch;
        else if (nm == NameMatch::PartialMatch)
          label = RelationLabel::QSPartialMatch;
        else
          label = RelationLabel::QSNoMatch;
      } else {
        // column/table -> question: mirror of the above
        const int tok = j - q0;
        const int node = i;
        const NameMatch nm = names[tok][node];
        const bool has_value =
            ki == NodeKind::Column && value_links.count({tok, node - col0}) > 0;
        if (nm == NameMatch::ExactMatch && opts.exact_over_value)
          label = RelationLabel::SQExactMatchRev;
        else if (has_value)
          label = RelationLabel::CQHasValueRev;
        else if (nm == NameMatch::ExactMatch)
          label = RelationLabel::SQExactMatchRev;
        else if (nm == NameMatch::PartialMatch)
          label = RelationLabel::SQPartialMatchRev;
        else
          label = RelationLabel::SQNoMatchRev;
      }
      set(i, j, label);
    }
  }
  return m;
}

}  // namespace rasap

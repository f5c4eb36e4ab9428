#include "rasap/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace rasap {

namespace {

namespace agx = rasap::ag;

// (score desc, longer serialization first, then lexicographic) — the longer-
// first clause makes a full query beat its own carried sub-queries on ties.
bool better(double score_a, const std::string& serial_a, double score_b,
            const std::string& serial_b) {
  if (score_a != score_b) return score_a > score_b;
  if (serial_a.size() != serial_b.size()) return serial_a.size() > serial_b.size();
  return serial_a < serial_b;
}

bool better_item(const BeamItem& a, const BeamItem& b) {
  return better(a.score, a.tree->serial, b.score, b.tree->serial);
}

// Cheap semantic-type screen before the full apply_rule check.
bool plausible_unary(Rule r, SemType t) {
  switch (r) {
    case Rule::Keep: return true;
    case Rule::Distinct:
    case Rule::Count:
    case Rule::Sum:
    case Rule::Avg:
    case Rule::Min:
    case Rule::Max:
    case Rule::Asc:
    case Rule::Desc: return t == SemType::Column;
    case Rule::Not: return t == SemType::Predicate;
    default: return false;
  }
}

bool plausible_binary(Rule r, SemType a, SemType b) {
  switch (r) {
    case Rule::Eq:
    case Rule::Ne:
    case Rule::Gt:
    case Rule::Ge:
    case Rule::Lt:
    case Rule::Le:
      return (a == SemType::Column || a == SemType::Aggregate) &&
             (b == SemType::Value || b == SemType::Column);
    case Rule::Like: return a == SemType::Column && b == SemType::Value;
    case Rule::In:
    case Rule::NotIn: return a == SemType::Column && b == SemType::Relation;
    case Rule::And:
    case Rule::Or: return a == SemType::Predicate && b == SemType::Predicate;
    case Rule::Selection:
    case Rule::Having:
    case Rule::JoinOn: return a == SemType::Predicate && b == SemType::Relation;
    case Rule::Project:
      return (a == SemType::Column || a == SemType::Aggregate ||
              a == SemType::ColumnList) &&
             b == SemType::Relation;
    case Rule::GroupBy: return a == SemType::Column && b == SemType::Relation;
    case Rule::OrderBy: return a == SemType::OrderSpec && b == SemType::Relation;
    case Rule::Limit: return a == SemType::Value && b == SemType::Relation;
    case Rule::CrossJoin:
    case Rule::Union:
    case Rule::Intersect:
    case Rule::Except: return a == SemType::Relation && b == SemType::Relation;
    case Rule::List:
      return (a == SemType::Column || a == SemType::Aggregate) &&
             (b == SemType::Column || b == SemType::Aggregate ||
              b == SemType::ColumnList);
    default: return false;
  }
}

agx::Var two_layer_relu(const agx::Var& x, const ParamStore& params, const std::string& p) {
  auto h1 = agx::relu(agx::add_rowvec(agx::matmul(x, params.get(p + ".w1")),
                                      params.get(p + ".b1")));
  return agx::relu(agx::add_rowvec(agx::matmul(h1, params.get(p + ".w2")),
                                   params.get(p + ".b2")));
}

bool numeric_token(const std::string& tok) {
  if (tok.empty()) return false;
  bool dot = false;
  for (char c : tok) {
    if (c == '.') {
      if (dot) return false;
      dot = true;
    } else if (!std::isdigit(static_cast<unsigned char>(c))) {
      return false;
    }
  }
  return std::isdigit(static_cast<unsigned char>(tok.front())) &&
         std::isdigit(static_cast<unsigned char>(tok.back()));
}

// Small number words appear in questions far more often than digits
// ("at least two books").
int number_word(const std::string& tok) {
  static const std::map<std::string, int> words = {
      {"zero", 0}, {"one", 1}, {"two", 2},   {"three", 3}, {"four", 4}, {"five", 5},
      {"six", 6},  {"seven", 7}, {"eight", 8}, {"nine", 9},  {"ten", 10}};
  auto it = words.find(tok);
  return it == words.end() ? -1 : it->second;
}

}  // namespace

void DecoderConfig::check() const {
  if (K <= 0 || T < 0 || d_b <= 0 || comp_heads <= 0 || comp_ff <= 0 || d_score <= 0)
    throw std::invalid_argument("decoder config: dimensions must be positive");
  if (d_b % comp_heads != 0)
    throw std::invalid_argument("decoder config: d_b must be divisible by comp_heads");
  if (comp_layers != 1)
    throw std::invalid_argument("decoder config: only a single composer layer is supported");
}

void init_decoder_params(ParamStore& params, const DecoderConfig& cfg, int encoder_width) {
  cfg.check();
  const int dc = cfg.ctx_head_dim();
  params.make_matrix("dec.leaf.w", encoder_width, cfg.d_b);
  params.make_zeros("dec.leaf.b", 1, cfg.d_b);
  params.make_embedding("dec.leaf_score.w", cfg.d_b, 1);
  params.make_embedding("dec.star", 1, encoder_width);
  for (int h = 0; h < cfg.comp_heads; ++h) {
    const std::string p = "dec.ctx.h" + std::to_string(h) + ".";
    params.make_matrix(p + "wq", cfg.d_b, dc);
    params.make_matrix(p + "wk", encoder_width, dc);
    params.make_matrix(p + "wv", encoder_width, dc);
  }
  params.make_embedding("dec.op_emb", kNumRules, cfg.d_b);
  params.make_embedding("dec.comp.pos", 3, cfg.d_b);
  for (int h = 0; h < cfg.comp_heads; ++h) {
    const std::string p = "dec.comp.h" + std::to_string(h) + ".";
    params.make_matrix(p + "wq", cfg.d_b, dc);
    params.make_matrix(p + "wk", cfg.d_b, dc);
    params.make_matrix(p + "wv", cfg.d_b, dc);
  }
  params.make_matrix("dec.comp.wo", cfg.d_b, cfg.d_b);
  params.make_zeros("dec.comp.bo", 1, cfg.d_b);
  params.make_ones("dec.comp.ln1.gain", 1, cfg.d_b);
  params.make_zeros("dec.comp.ln1.bias", 1, cfg.d_b);
  params.make_matrix("dec.comp.ff1.w", cfg.d_b, cfg.comp_ff);
  params.make_zeros("dec.comp.ff1.b", 1, cfg.comp_ff);
  params.make_matrix("dec.comp.ff2.w", cfg.comp_ff, cfg.d_b);
  params.make_zeros("dec.comp.ff2.b", 1, cfg.d_b);
  params.make_ones("dec.comp.ln2.gain", 1, cfg.d_b);
  params.make_zeros("dec.comp.ln2.bias", 1, cfg.d_b);
  params.make_matrix("dec.ffu.w1", 2 * cfg.d_b, cfg.d_score);
  params.make_zeros("dec.ffu.b1", 1, cfg.d_score);
  params.make_matrix("dec.ffu.w2", cfg.d_score, cfg.d_score);
  params.make_zeros("dec.ffu.b2", 1, cfg.d_score);
  params.make_matrix("dec.ffb.w1", 4 * cfg.d_b, cfg.d_score);
  params.make_zeros("dec.ffb.b1", 1, cfg.d_score);
  params.make_matrix("dec.ffb.w2", cfg.d_score, cfg.d_score);
  params.make_zeros("dec.ffb.b2", 1, cfg.d_score);
  params.make_embedding("dec.wu", kNumRules, cfg.d_score);
  params.make_embedding("dec.wb", kNumRules, cfg.d_score);
}

LeafCandidates enumerate_leaves(const EncoderOutput& enc, const QuestionTokens& q,
                                const Schema& s, const ParamStore& params,
                                const DecoderConfig& cfg) {
  struct Raw {
    TreePtr tree;
    agx::Var source;  // 1 x d_x
  };
  std::vector<Raw> raw;
  const int nc = enc.n_columns, nt = enc.n_tables;

  for (int c = 0; c < nc; ++c)
    raw.push_back({make_column_leaf(c, s), agx::gather_rows(enc.node_reps, {c})});
  raw.push_back({make_column_leaf(-1, s), params.get("dec.star")});
  for (int t = 0; t < nt; ++t)
    raw.push_back({make_table_leaf(t, s), agx::gather_rows(enc.node_reps, {nc + t})});

  auto span_source = [&](int begin, int end) {
    std::vector<int> idx;
    for (int i = begin; i < end; ++i) idx.push_back(i);
    return agx::mean_rows(agx::gather_rows(enc.token_reps, idx));
  };

  std::set<std::string> seen;
  auto add_literal = [&](Literal lit, int tb, int te) {
    auto leaf = make_value_leaf(std::move(lit));
    if (!seen.insert(leaf->serial).second) return;
    raw.push_back({leaf, span_source(tb, te)});
  };

  // numbers straight from question tokens, digits or small number words
  for (int i = 0; i < static_cast<int>(q.tokens.size()); ++i) {
    if (numeric_token(q.tokens[i])) {
      Literal lit{ColumnType::Number, q.tokens[i], std::strtod(q.tokens[i].c_str(), nullptr),
                  Literal::Source::QuestionSpan};
      add_literal(std::move(lit), i, i + 1);
    } else if (const int w = number_word(q.tokens[i]); w >= 0) {
      Literal lit{ColumnType::Number, format_number(w), static_cast<double>(w),
                  Literal::Source::QuestionSpan};
      add_literal(std::move(lit), i, i + 1);
    }
  }
  // quoted spans keep their raw text
  for (std::size_t pos = 0; pos < q.raw.size(); ++pos) {
    const char quote = q.raw[pos];
    if (quote != '\'' && quote != '"') continue;
    const auto close = q.raw.find(quote, pos + 1);
    if (close == std::string::npos) break;
    const std::string text = q.raw.substr(pos + 1, close - pos - 1);
    if (!text.empty()) {
      int tb = -1, te = -1;
      for (int i = 0; i < static_cast<int>(q.tokens.size()); ++i) {
        if (q.spans[i].second > static_cast<int>(pos) &&
            q.spans[i].first < static_cast<int>(close + 1)) {
          if (tb < 0) tb = i;
          te = i + 1;
        }
      }
      if (tb >= 0) {
        Literal lit{ColumnType::Text, text, 0.0, Literal::Source::QuestionSpan};
        add_literal(std::move(lit), tb, te);
      }
    }
    pos = close;
  }
  // cell-value matches
  for (const auto& m : find_cell_matches(q, s)) {
    const ColumnType tag = s.columns[m.column_index].type_tag;
    Literal lit{tag, m.cell_text, 0.0, Literal::Source::CellValue};
    if (tag == ColumnType::Number) {
      char* end = nullptr;
      lit.num = std::strtod(m.cell_text.c_str(), &end);
      if (end == m.cell_text.c_str() || *end != '\0') continue;  // not numeric after all
      lit.text = format_number(lit.num);
    }
    add_literal(std::move(lit), m.token_begin, m.token_end);
  }

  if (raw.empty()) throw std::runtime_error("init_leaves: no leaf candidates");

  std::vector<agx::Var> sources;
  sources.reserve(raw.size());
  for (auto& r : raw) sources.push_back(r.source);
  auto stacked = agx::concat_rows(sources);
  auto vecs = agx::add_rowvec(agx::matmul(stacked, params.get("dec.leaf.w")),
                              params.get("dec.leaf.b"));
  auto logits = agx::transpose(agx::matmul(vecs, params.get("dec.leaf_score.w")));

  LeafCandidates out;
  out.logits = logits;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.trees.push_back(raw[i].tree);
    out.vecs.push_back(agx::slice_rows(vecs, static_cast<int>(i), 1));
  }
  return out;
}

Beam init_leaves(const EncoderOutput& enc, const QuestionTokens& q, const Schema& s,
                 const ParamStore& params, const DecoderConfig& cfg,
                 const std::vector<TreePtr>& force_include, const TreeScorer& scorer) {
  cfg.check();
  Beam beam;
  beam.step = 0;

  std::vector<BeamItem> items;
  if (scorer) {
    // external scorer: no vectors needed
    LeafCandidates cands = enumerate_leaves(enc, q, s, params, cfg);
    for (std::size_t i = 0; i < cands.trees.size(); ++i)
      items.push_back({cands.trees[i], nullptr, scorer(cands.trees[i]), false});
  } else {
    LeafCandidates cands = enumerate_leaves(enc, q, s, params, cfg);
    for (std::size_t i = 0; i < cands.trees.size(); ++i)
      items.push_back({cands.trees[i], cands.vecs[i],
                       cands.logits->value.at(0, static_cast<int>(i)), false});
  }

  std::set<std::string> forced;
  for (const auto& t : force_include) forced.insert(t->serial);
  for (auto& item : items) item.is_gold = forced.count(item.tree->serial) > 0;
  for (const auto& serial : forced) {
    const bool present = std::any_of(items.begin(), items.end(), [&](const BeamItem& it) {
      return it.tree->serial == serial;
    });
    if (!present)
      throw std::runtime_error("init_leaves: forced leaf not among candidates: " + serial);
  }

  std::sort(items.begin(), items.end(), better_item);
  for (const auto& item : items) {
    const bool room = static_cast<int>(beam.items.size()) < cfg.K;
    if (item.is_gold || room) beam.items.push_back(item);
  }
  std::sort(beam.items.begin(), beam.items.end(), better_item);
  return beam;
}

ag::Var contextualize(const std::vector<ag::Var>& beam_vecs, const ag::Var& token_reps,
                      const ParamStore& params, const DecoderConfig& cfg) {
  if (beam_vecs.empty()) throw std::invalid_argument("contextualize: empty beam");
  auto z = agx::concat_rows(beam_vecs);
  const int dc = cfg.ctx_head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dc));
  std::vector<agx::Var> heads;
  heads.reserve(cfg.comp_heads);
  for (int h = 0; h < cfg.comp_heads; ++h) {
    const std::string p = "dec.ctx.h" + std::to_string(h) + ".";
    auto qm = agx::matmul(z, params.get(p + "wq"));
    auto km = agx::matmul(token_reps, params.get(p + "wk"));
    auto vm = agx::matmul(token_reps, params.get(p + "wv"));
    auto attn = agx::softmax(agx::scale(agx::matmul(qm, agx::transpose(km)), scale), 1);
    heads.push_back(agx::matmul(attn, vm));
  }
  return agx::concat_cols(heads);
}

ag::Var compose(Rule rule, const ag::Var& z_i, const ag::Var& z_j, const ParamStore& params,
                const DecoderConfig& cfg) {
  if (rule == Rule::Keep) return z_i;
  auto pos = params.get("dec.comp.pos");
  std::vector<agx::Var> rows;
  rows.push_back(agx::add(agx::gather_rows(params.get("dec.op_emb"), {static_cast<int>(rule)}),
                          agx::gather_rows(pos, {0})));
  rows.push_back(agx::add(z_i, agx::gather_rows(pos, {1})));
  if (z_j) rows.push_back(agx::add(z_j, agx::gather_rows(pos, {2})));
  auto x = agx::concat_rows(rows);

  const int dc = cfg.ctx_head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dc));
  std::vector<agx::Var> heads;
  heads.reserve(cfg.comp_heads);
  for (int h = 0; h < cfg.comp_heads; ++h) {
    const std::string p = "dec.comp.h" + std::to_string(h) + ".";
    auto qm = agx::matmul(x, params.get(p + "wq"));
    auto km = agx::matmul(x, params.get(p + "wk"));
    auto vm = agx::matmul(x, params.get(p + "wv"));
    auto attn = agx::softmax(agx::scale(agx::matmul(qm, agx::transpose(km)), scale), 1);
    heads.push_back(agx::matmul(attn, vm));
  }
  auto attn_out = agx::add_rowvec(agx::matmul(agx::concat_cols(heads), params.get("dec.comp.wo")),
                                  params.get("dec.comp.bo"));
  auto y1 = agx::layer_norm(agx::add(x, attn_out), params.get("dec.comp.ln1.gain"),
                            params.get("dec.comp.ln1.bias"));
  auto hidden = agx::relu(agx::add_rowvec(agx::matmul(y1, params.get("dec.comp.ff1.w")),
                                          params.get("dec.comp.ff1.b")));
  auto ff = agx::add_rowvec(agx::matmul(hidden, params.get("dec.comp.ff2.w")),
                            params.get("dec.comp.ff2.b"));
  auto y2 = agx::layer_norm(agx::add(y1, ff), params.get("dec.comp.ln2.gain"),
                            params.get("dec.comp.ln2.bias"));
  return agx::slice_rows(y2, 0, 1);
}

Frontier score_frontier(const Beam& beam, const ag::Var& ctx, const ParamStore& params,
                        const DecoderConfig& cfg, const RuleSet& rules, const Schema& s,
                        const TreeScorer& scorer) {
  if (beam.items.empty()) throw std::invalid_argument("score_frontier: empty beam");
  const int m = static_cast<int>(beam.items.size());

  Frontier frontier;
  std::vector<std::pair<int, int>> unary_pick;   // (beam item, rule row)
  std::vector<std::pair<int, int>> binary_pick;  // (pair row, rule row)
  std::vector<int> pair_i, pair_j;
  std::map<std::pair<int, int>, int> pair_row;

  for (int i = 0; i < m; ++i) {
    const TreePtr& t = beam.items[i].tree;
    for (Rule r : rules.unary) {
      if (!plausible_unary(r, t->sem_type)) continue;
      auto res = apply_rule(r, {t}, s);
      if (!res.tree) continue;
      FrontierCandidate c;
      c.rule = r;
      c.i = i;
      c.tree = res.tree;
      c.logit_index = static_cast<int>(frontier.candidates.size());
      frontier.candidates.push_back(std::move(c));
      unary_pick.emplace_back(i, static_cast<int>(r));
    }
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const TreePtr& a = beam.items[i].tree;
      const TreePtr& b = beam.items[j].tree;
      for (Rule r : rules.binary) {
        if (!plausible_binary(r, a->sem_type, b->sem_type)) continue;
        auto res = apply_rule(r, {a, b}, s);
        if (!res.tree) continue;
        FrontierCandidate c;
        c.rule = r;
        c.i = i;
        c.j = j;
        c.tree = res.tree;
        c.logit_index = static_cast<int>(frontier.candidates.size());
        frontier.candidates.push_back(std::move(c));
        auto key = std::make_pair(i, j);
        auto it = pair_row.find(key);
        if (it == pair_row.end()) {
          it = pair_row.emplace(key, static_cast<int>(pair_i.size())).first;
          pair_i.push_back(i);
          pair_j.push_back(j);
        }
        binary_pick.emplace_back(it->second, static_cast<int>(r));
      }
    }
  }
  if (frontier.candidates.empty())
    throw std::runtime_error("score_frontier: empty frontier");

  if (scorer) {
    for (auto& c : frontier.candidates) c.score = scorer(c.tree);
    return frontier;
  }

  std::vector<agx::Var> vecs;
  vecs.reserve(m);
  for (const auto& item : beam.items) vecs.push_back(item.vec);
  auto z = agx::concat_rows(vecs);

  auto u_in = agx::concat_cols({z, ctx});
  auto u_hidden = two_layer_relu(u_in, params, "dec.ffu");
  auto u_scores = agx::matmul(u_hidden, agx::transpose(params.get("dec.wu")));

  agx::Var logits;
  if (!binary_pick.empty()) {
    auto zi = agx::gather_rows(z, pair_i);
    auto ci = agx::gather_rows(ctx, pair_i);
    auto zj = agx::gather_rows(z, pair_j);
    auto cj = agx::gather_rows(ctx, pair_j);
    auto b_in = agx::concat_cols({zi, ci, zj, cj});
    auto b_hidden = two_layer_relu(b_in, params, "dec.ffb");
    auto b_scores = agx::matmul(b_hidden, agx::transpose(params.get("dec.wb")));
    logits = agx::concat_cols({agx::gather_elems(u_scores, unary_pick),
                               agx::gather_elems(b_scores, binary_pick)});
  } else {
    logits = agx::gather_elems(u_scores, unary_pick);
  }

  // candidates were pushed unary-first, matching the logits layout
  for (auto& c : frontier.candidates) c.score = logits->value.at(0, c.logit_index);
  frontier.logits = logits;
  return frontier;
}

namespace {

// Deduplicates by serialization, keeps gold items unconditionally, fills the
// rest to K by score, and composes vectors for what survives.
Beam select_beam(const Frontier& frontier, const Beam& prev, int step, int K,
                 const std::set<std::string>& gold_serials, const ParamStore& params,
                 const DecoderConfig& cfg, bool with_vectors) {
  std::vector<int> order(frontier.candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = frontier.candidates[a];
    const auto& cb = frontier.candidates[b];
    return better(ca.score, ca.tree->serial, cb.score, cb.tree->serial);
  });

  Beam next;
  next.step = step;
  std::set<std::string> taken;
  auto add = [&](const FrontierCandidate& c, bool gold) {
    if (!taken.insert(c.tree->serial).second) return;
    BeamItem item;
    item.tree = c.tree;
    item.score = c.score;
    item.is_gold = gold;
    if (with_vectors) {
      const auto& zi = prev.items[c.i].vec;
      item.vec = c.j >= 0 ? compose(c.rule, zi, prev.items[c.j].vec, params, cfg)
                          : compose(c.rule, zi, nullptr, params, cfg);
    }
    next.items.push_back(std::move(item));
  };

  if (!gold_serials.empty()) {
    for (int idx : order) {
      const auto& c = frontier.candidates[idx];
      if (gold_serials.count(c.tree->serial)) add(c, true);
    }
  }
  for (int idx : order) {
    if (static_cast<int>(next.items.size()) >= K) break;
    const auto& c = frontier.candidates[idx];
    add(c, gold_serials.count(c.tree->serial) > 0);
  }
  std::sort(next.items.begin(), next.items.end(), better_item);
  return next;
}

void record_trace(std::vector<DecodeTraceStep>& trace, const Beam& beam, bool want) {
  if (!want) return;
  DecodeTraceStep st;
  st.step = beam.step;
  for (const auto& item : beam.items) st.items.emplace_back(item.tree, item.score);
  trace.push_back(std::move(st));
}

}  // namespace

DecodeResult decode(const EncoderOutput& enc, const QuestionTokens& q, const Schema& s,
                    const ParamStore& params, const DecoderConfig& cfg, const RuleSet& rules,
                    const TreeScorer& scorer, bool want_trace) {
  cfg.check();
  DecodeResult result;
  Beam beam = init_leaves(enc, q, s, params, cfg, {}, scorer);
  record_trace(result.trace, beam, want_trace);

  const bool with_vectors = !scorer;
  TreePtr best_r;
  double best_r_score = 0.0;
  auto consider_r = [&](const BeamItem& item) {
    if (item.tree->sem_type != SemType::Relation) return;
    if (!best_r || better(item.score, item.tree->serial, best_r_score, best_r->serial)) {
      best_r = item.tree;
      best_r_score = item.score;
    }
  };
  std::vector<Beam> kept_beams;
  kept_beams.push_back(beam);
  for (const auto& item : kept_beams.back().items) consider_r(item);

  const std::size_t cap = static_cast<std::size_t>(cfg.frontier_cap_factor) * cfg.K *
                          (rules.unary.size() + rules.binary.size());
  for (int t = 1; t <= cfg.T; ++t) {
    agx::Var ctx;
    if (with_vectors) {
      std::vector<agx::Var> vecs;
      for (const auto& item : kept_beams.back().items) vecs.push_back(item.vec);
      ctx = contextualize(vecs, enc.token_reps, params, cfg);
    }
    Frontier frontier =
        score_frontier(kept_beams.back(), ctx, params, cfg, rules, s, scorer);
    if (frontier.candidates.size() > cap) {
      std::sort(frontier.candidates.begin(), frontier.candidates.end(),
                [](const FrontierCandidate& a, const FrontierCandidate& b) {
                  return better(a.score, a.tree->serial, b.score, b.tree->serial);
                });
      frontier.candidates.resize(cap);
    }
    Beam next = select_beam(frontier, kept_beams.back(), t, cfg.K, {}, params, cfg,
                            with_vectors);
    kept_beams.push_back(std::move(next));
    record_trace(result.trace, kept_beams.back(), want_trace);
    for (const auto& item : kept_beams.back().items) consider_r(item);
  }

  // Highest-scoring complete query on the final beam, then any relation-typed
  // tree seen anywhere.
  const BeamItem* best_complete = nullptr;
  for (const auto& item : kept_beams.back().items) {
    if (item.tree->sem_type == SemType::Relation && item.tree->is_complete()) {
      if (!best_complete || better_item(item, *best_complete)) best_complete = &item;
    }
  }
  if (best_complete) {
    result.tree = best_complete->tree;
    result.complete = true;
    return result;
  }
  if (best_r) {
    result.tree = best_r;
    result.complete = false;
    return result;
  }
  throw NoParseError();
}

TrainingLoss training_loss(const TreePtr& gold, const EncoderOutput& enc,
                           const QuestionTokens& q, const Schema& s, const ParamStore& params,
                           const DecoderConfig& cfg, const RuleSet& rules) {
  cfg.check();
  if (gold->height > cfg.T)
    throw std::invalid_argument("training_loss: gold height " + std::to_string(gold->height) +
                                " exceeds T=" + std::to_string(cfg.T));
  TrainingLoss out;

  // Step 0: leaf selection.
  LeafCandidates leaves = enumerate_leaves(enc, q, s, params, cfg);
  std::map<std::string, int> leaf_index;
  for (std::size_t i = 0; i < leaves.trees.size(); ++i)
    leaf_index.emplace(leaves.trees[i]->serial, static_cast<int>(i));
  std::vector<TreePtr> gold_leaves = decompose_by_height(gold, 0);
  std::vector<int> gold_idx;
  for (const auto& g : gold_leaves) {
    auto it = leaf_index.find(g->serial);
    if (it == leaf_index.end())
      throw std::runtime_error("training_loss: gold leaf not reachable: " + g->serial);
    gold_idx.push_back(it->second);
  }
  agx::Var loss = agx::cross_entropy(leaves.logits, gold_idx);
  out.frontier_sizes.push_back(static_cast<int>(leaves.trees.size()));
  out.gold_counts.push_back(static_cast<int>(gold_idx.size()));

  std::vector<TreePtr> forced = gold_leaves;
  Beam beam = init_leaves(enc, q, s, params, cfg, forced, nullptr);

  for (int t = 1; t <= cfg.T; ++t) {
    std::vector<agx::Var> vecs;
    for (const auto& item : beam.items) vecs.push_back(item.vec);
    auto ctx = contextualize(vecs, enc.token_reps, params, cfg);
    Frontier frontier = score_frontier(beam, ctx, params, cfg, rules, s, nullptr);

    std::set<std::string> gold_serials;
    for (const auto& g : decompose_by_height(gold, t)) gold_serials.insert(g->serial);
    std::vector<int> step_gold;
    std::set<std::string> matched;
    for (const auto& c : frontier.candidates) {
      if (gold_serials.count(c.tree->serial)) {
        step_gold.push_back(c.logit_index);
        matched.insert(c.tree->serial);
      }
    }
    if (matched.size() != gold_serials.size()) {
      for (const auto& serial : gold_serials)
        if (!matched.count(serial))
          throw std::runtime_error("training_loss: gold subtree not on frontier: " + serial);
    }
    loss = agx::add(loss, agx::cross_entropy(frontier.logits, step_gold));
    out.frontier_sizes.push_back(static_cast<int>(frontier.candidates.size()));
    out.gold_counts.push_back(static_cast<int>(step_gold.size()));

    beam = select_beam(frontier, beam, t, cfg.K, gold_serials, params, cfg, true);
  }
  out.loss = loss;
  return out;
}

}  // namespace rasap

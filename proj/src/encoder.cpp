#include "rasap/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace rasap {

namespace ag2 = rasap::ag;

void EncoderConfig::check() const {
  if (d_x <= 0 || heads <= 0 || n_layers < 0 || d_ff <= 0)
    throw std::invalid_argument("encoder config: dimensions must be positive");
  if (d_x % heads != 0)
    throw std::invalid_argument("encoder config: d_x must be divisible by the head count");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("encoder config: dropout outside [0,1)");
}

namespace {

std::string lname(int layer, const char* suffix) {
  return "enc.l" + std::to_string(layer) + "." + suffix;
}

}  // namespace

void init_encoder_params(ParamStore& params, const EncoderConfig& cfg) {
  cfg.check();
  if (cfg.vocab_size <= 0)
    throw std::invalid_argument("encoder config: vocab_size not set");
  params.make_embedding("emb.token", cfg.vocab_size, cfg.d_x);
  params.make_embedding("emb.kind", 3, cfg.d_x);
  params.make_embedding("emb.type", 2, cfg.d_x);
  const int dh = cfg.head_dim();
  for (int l = 0; l < cfg.n_layers; ++l) {
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string p = "enc.l" + std::to_string(l) + ".h" + std::to_string(h) + ".";
      params.make_matrix(p + "wq", cfg.d_x, dh);
      params.make_matrix(p + "wk", cfg.d_x, dh);
      params.make_matrix(p + "wv", cfg.d_x, dh);
    }
    params.make_embedding(lname(l, "rk"), kNumRelationLabels, dh);
    params.make_embedding(lname(l, "rv"), kNumRelationLabels, dh);
    params.make_ones(lname(l, "ln1.gain"), 1, cfg.d_x);
    params.make_zeros(lname(l, "ln1.bias"), 1, cfg.d_x);
    params.make_matrix(lname(l, "ff1.w"), cfg.d_x, cfg.d_ff);
    params.make_zeros(lname(l, "ff1.b"), 1, cfg.d_ff);
    params.make_matrix(lname(l, "ff2.w"), cfg.d_ff, cfg.d_x);
    params.make_zeros(lname(l, "ff2.b"), 1, cfg.d_x);
    params.make_ones(lname(l, "ln2.gain"), 1, cfg.d_x);
    params.make_zeros(lname(l, "ln2.bias"), 1, cfg.d_x);
  }
}

ag2::Var embed_initial(const QuestionTokens& q, const Schema& s, const Vocabulary& vocab,
                       const ParamStore& params, const EncoderConfig& cfg) {
  cfg.check();
  auto token_emb = params.get("emb.token");
  auto kind_emb = params.get("emb.kind");
  auto type_emb = params.get("emb.type");

  auto name_vector = [&](const std::vector<std::string>& words) {
    std::vector<int> ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(vocab.id_of(w));
    return ag2::mean_rows(ag2::gather_rows(token_emb, ids));
  };

  std::vector<ag2::Var> rows;
  rows.reserve(s.columns.size() + s.tables.size() + q.tokens.size());
  for (const auto& col : s.columns) {
    auto v = ag2::add(name_vector(col.name_tokens), ag2::gather_rows(kind_emb, {0}));
    const int tag = col.type_tag == ColumnType::Number ? 0 : 1;
    rows.push_back(ag2::add(v, ag2::gather_rows(type_emb, {tag})));
  }
  for (const auto& tab : s.tables)
    rows.push_back(ag2::add(name_vector(tab.name_tokens), ag2::gather_rows(kind_emb, {1})));
  for (const auto& tok : q.tokens)
    rows.push_back(ag2::add(ag2::gather_rows(token_emb, {vocab.id_of(tok)}),
                            ag2::gather_rows(kind_emb, {2})));
  return ag2::concat_rows(rows);
}

ag2::Var rat_layer(const ag2::Var& x, const RelationMatrix& rels, const ParamStore& params,
                   const EncoderConfig& cfg, int layer_index, bool training,
                   std::mt19937_64* rng) {
  const int n = x->value.rows();
  if (rels.size() != n)
    throw std::invalid_argument("rat_layer: relation matrix size " +
                                std::to_string(rels.size()) + " != node count " +
                                std::to_string(n));
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto rk = params.get(lname(layer_index, "rk"));
  auto rv = params.get(lname(layer_index, "rv"));

  std::mt19937_64 dummy;
  std::mt19937_64& r = rng ? *rng : dummy;

  std::vector<ag2::Var> heads;
  heads.reserve(cfg.heads);
  for (int h = 0; h < cfg.heads; ++h) {
    const std::string p =
        "enc.l" + std::to_string(layer_index) + ".h" + std::to_string(h) + ".";
    auto qh = ag2::matmul(x, params.get(p + "wq"));
    auto kh = ag2::matmul(x, params.get(p + "wk"));
    auto vh = ag2::matmul(x, params.get(p + "wv"));
    auto scores = ag2::relation_scores(qh, kh, rk, rels.labels, scale);
    if (!scores->value.all_finite())
      throw std::runtime_error("rat_layer: non-finite attention scores");
    auto attn = ag2::softmax(scores, 1);
    attn = ag2::dropout(attn, cfg.dropout, r, training);
    heads.push_back(ag2::relation_values(attn, vh, rv, rels.labels));
  }
  auto z = ag2::concat_cols(heads);
  auto y1 = ag2::layer_norm(ag2::add(x, z), params.get(lname(layer_index, "ln1.gain")),
                            params.get(lname(layer_index, "ln1.bias")));
  auto hidden = ag2::relu(ag2::add_rowvec(ag2::matmul(y1, params.get(lname(layer_index, "ff1.w"))),
                                          params.get(lname(layer_index, "ff1.b"))));
  auto ff = ag2::add_rowvec(ag2::matmul(hidden, params.get(lname(layer_index, "ff2.w"))),
                            params.get(lname(layer_index, "ff2.b")));
  ff = ag2::dropout(ff, cfg.dropout, r, training);
  auto y = ag2::layer_norm(ag2::add(y1, ff), params.get(lname(layer_index, "ln2.gain")),
                           params.get(lname(layer_index, "ln2.bias")));
  if (!y->value.all_finite()) throw std::runtime_error("rat_layer: non-finite output");
  return y;
}

EncoderOutput encode(const QuestionTokens& q, const Schema& s, const RelationMatrix& rels,
                     const Vocabulary& vocab, const ParamStore& params,
                     const EncoderConfig& cfg, bool training, std::mt19937_64* rng) {
  auto x = embed_initial(q, s, vocab, params, cfg);
  for (int l = 0; l < cfg.n_layers; ++l)
    x = rat_layer(x, rels, params, cfg, l, training, rng);
  EncoderOutput out;
  out.node_reps = x;
  out.n_columns = static_cast<int>(s.columns.size());
  out.n_tables = static_cast<int>(s.tables.size());
  out.n_question = static_cast<int>(q.tokens.size());
  out.token_reps = ag2::slice_rows(x, out.n_columns + out.n_tables, out.n_question);
  return out;
}

}  // namespace rasap

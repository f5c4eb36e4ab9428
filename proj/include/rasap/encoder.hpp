#pragma once

#include <random>

#include "rasap/param_store.hpp"
#include "rasap/relations.hpp"
#include "rasap/schema.hpp"
#include "rasap/vocab.hpp"

namespace rasap {

struct EncoderConfig {
  int d_x = 64;
  int heads = 8;
  int n_layers = 4;
  int d_ff = 256;
  double dropout = 0.2;
  int vocab_size = 0;

  int head_dim() const { return d_x / heads; }
  void check() const;
};

// Contextualized node representations in column/table/question order.
struct EncoderOutput {
  ag::Var node_reps;   // n x d_x
  ag::Var token_reps;  // question slice, |Q| x d_x
  int n_columns = 0;
  int n_tables = 0;
  int n_question = 0;
};

void init_encoder_params(ParamStore& params, const EncoderConfig& cfg);

// Mean of name-token embeddings plus node-kind embedding (plus the value-type
// embedding for columns).
ag::Var embed_initial(const QuestionTokens& q, const Schema& s, const Vocabulary& vocab,
                      const ParamStore& params, const EncoderConfig& cfg);

// One relation-aware self-attention layer over the node matrix.
ag::Var rat_layer(const ag::Var& x, const RelationMatrix& rels, const ParamStore& params,
                  const EncoderConfig& cfg, int layer_index, bool training = false,
                  std::mt19937_64* rng = nullptr);

EncoderOutput encode(const QuestionTokens& q, const Schema& s, const RelationMatrix& rels,
                     const Vocabulary& vocab, const ParamStore& params,
                     const EncoderConfig& cfg, bool training = false,
                     std::mt19937_64* rng = nullptr);

}  // namespace rasap

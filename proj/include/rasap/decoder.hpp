#pragma once

#include <functional>
#include <optional>

#include "rasap/encoder.hpp"
#include "rasap/sql_tree.hpp"

namespace rasap {

struct DecoderConfig {
  int K = 30;            // beam size
  int T = 9;             // decoding steps
  int d_b = 256;         // tree-vector width (composer dimension)
  int comp_layers = 1;   // composer transformer layers
  int comp_heads = 8;
  int comp_ff = 512;     // composer feed-forward width
  int d_score = 256;     // FF_U / FF_B hidden width
  int frontier_cap_factor = 10;  // cap = factor * K * |rules|

  int ctx_head_dim() const { return d_b / comp_heads; }
  void check() const;
};

struct BeamItem {
  TreePtr tree;
  ag::Var vec;    // 1 x d_b; null when decoding with an external scorer
  double score = 0.0;
  bool is_gold = false;  // set during teacher forcing
};

struct Beam {
  int step = 0;
  std::vector<BeamItem> items;
};

// One type-valid rule application on the current beam.
struct FrontierCandidate {
  Rule rule;
  int i = -1;  // operand index in the beam
  int j = -1;  // second operand, -1 for unary
  TreePtr tree;
  double score = 0.0;
  int logit_index = -1;  // column in the frontier logits row
};

struct Frontier {
  std::vector<FrontierCandidate> candidates;
  ag::Var logits;  // 1 x |candidates|, differentiable; null with external scorer
};

struct NoParseError : std::runtime_error {
  NoParseError() : std::runtime_error("decoder produced no relation-typed tree") {}
};

// External scorer: replaces the learned scoring function (used by the oracle
// decoding tests). Vector computation is skipped entirely when set.
using TreeScorer = std::function<double(const TreePtr&)>;

void init_decoder_params(ParamStore& params, const DecoderConfig& cfg, int encoder_width);

// Leaf candidates: schema columns, '*', tables, numeric question tokens,
// quoted spans, and cell-value matches. Top-K by learned score; trees in
// `force_include` are always kept.
Beam init_leaves(const EncoderOutput& enc, const QuestionTokens& q, const Schema& s,
                 const ParamStore& params, const DecoderConfig& cfg,
                 const std::vector<TreePtr>& force_include = {},
                 const TreeScorer& scorer = nullptr);

// Differentiable leaf logits paired with the candidate trees, for the
// leaf-selection term of the training loss.
struct LeafCandidates {
  std::vector<TreePtr> trees;
  std::vector<ag::Var> vecs;
  ag::Var logits;  // 1 x |trees|
};
LeafCandidates enumerate_leaves(const EncoderOutput& enc, const QuestionTokens& q,
                                const Schema& s, const ParamStore& params,
                                const DecoderConfig& cfg);

// Cross-attention of beam vectors over the question tokens (queries = trees,
// keys/values = token representations).
ag::Var contextualize(const std::vector<ag::Var>& beam_vecs, const ag::Var& token_reps,
                      const ParamStore& params, const DecoderConfig& cfg);

// New tree vector for a rule application; KEEP copies its operand bit-exactly.
ag::Var compose(Rule rule, const ag::Var& z_i, const ag::Var& z_j, const ParamStore& params,
                const DecoderConfig& cfg);

// Scores every type-valid unary application on each beam item (KEEP included)
// and every type-valid binary application on each ordered pair, including
// (i, i). With `scorer` set, the learned path is bypassed.
Frontier score_frontier(const Beam& beam, const ag::Var& ctx, const ParamStore& params,
                        const DecoderConfig& cfg, const RuleSet& rules, const Schema& s,
                        const TreeScorer& scorer = nullptr);

struct DecodeTraceStep {
  int step;
  std::vector<std::pair<TreePtr, double>> items;  // (tree, score)
};

struct DecodeResult {
  TreePtr tree;
  bool complete = false;  // true when the tree is a full query
  std::vector<DecodeTraceStep> trace;
};

DecodeResult decode(const EncoderOutput& enc, const QuestionTokens& q, const Schema& s,
                    const ParamStore& params, const DecoderConfig& cfg,
                    const RuleSet& rules = RuleSet::full(), const TreeScorer& scorer = nullptr,
                    bool want_trace = false);

struct TrainingLoss {
  ag::Var loss;                      // scalar
  std::vector<int> frontier_sizes;   // per step, leaf step first
  std::vector<int> gold_counts;      // gold candidates per step
};

// Teacher forcing: gold sub-trees are force-inserted into the beam at every
// step and the loss is the cross-entropy of the gold frontier items against
// the full frontier (plus the leaf-selection term at step zero).
TrainingLoss training_loss(const TreePtr& gold, const EncoderOutput& enc,
                           const QuestionTokens& q, const Schema& s, const ParamStore& params,
                           const DecoderConfig& cfg, const RuleSet& rules = RuleSet::full());

}  // namespace rasap

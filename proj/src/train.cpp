#include "rasap/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>

#include "json.hpp"
#include "rasap/evaluator.hpp"
#include "rasap/optimizer.hpp"
#include "rasap/sql_parse.hpp"

namespace rasap {

Model Model::build(const TrainConfig& cfg, Vocabulary vocab) {
  Model m;
  m.vocab = std::move(vocab);
  m.encoder = cfg.encoder;
  m.encoder.vocab_size = m.vocab.size();
  m.decoder = cfg.decoder;
  m.params = std::make_unique<ParamStore>(cfg.seed);
  init_encoder_params(*m.params, m.encoder);
  init_decoder_params(*m.params, m.decoder, m.encoder.d_x);
  TrainConfig meta = cfg;
  meta.encoder.vocab_size = m.vocab.size();
  m.params->set_meta("config", meta.to_json());
  m.params->set_meta("vocab_size", std::to_string(m.vocab.size()));
  for (int i = 0; i < m.vocab.size(); ++i)
    m.params->set_meta("vocab." + std::to_string(i), m.vocab.tokens()[i]);
  return m;
}

void Model::save(const std::string& path) const { params->save(path); }

Model Model::load(const std::string& path) {
  auto store = std::make_unique<ParamStore>(ParamStore::load(path));
  const std::string config_text = store->meta_or("config", "");
  if (config_text.empty()) throw std::runtime_error("checkpoint missing config metadata");
  TrainConfig cfg = TrainConfig::from_json(config_text);
  Model m;
  m.encoder = cfg.encoder;
  m.decoder = cfg.decoder;
  const int vocab_size = std::stoi(store->meta_or("vocab_size", "0"));
  Vocabulary vocab;
  for (int i = 1; i < vocab_size; ++i) {  // index 0 is [unk], present already
    const std::string tok = store->meta_or("vocab." + std::to_string(i), "");
    if (tok.empty()) throw std::runtime_error("checkpoint vocabulary is truncated");
    vocab.add(tok);
  }
  m.vocab = std::move(vocab);
  m.params = std::move(store);
  return m;
}

DecodeResult Model::parse_question(const QuestionTokens& q, const Schema& s,
                                   const TreeScorer& scorer, bool want_trace) const {
  auto rels = build_relation_matrix(q, s);
  auto enc = encode(q, s, rels, vocab, *params, encoder);
  return decode(enc, q, s, *params, decoder, RuleSet::full(), scorer, want_trace);
}

std::string Model::parse_to_sql(const std::string& question, const Schema& s) const {
  auto result = parse_question(tokenize(question), s);
  return emit_sql(result.tree, s);  // throws on incomplete trees
}

Vocabulary build_vocabulary(const std::map<std::string, Schema>& schemas,
                            const std::vector<Example>& examples) {
  std::vector<std::string> tokens;
  for (const auto& [id, s] : schemas) {
    for (const auto& t : s.tables)
      tokens.insert(tokens.end(), t.name_tokens.begin(), t.name_tokens.end());
    for (const auto& c : s.columns)
      tokens.insert(tokens.end(), c.name_tokens.begin(), c.name_tokens.end());
  }
  for (const auto& ex : examples) {
    auto q = tokenize(ex.question);
    tokens.insert(tokens.end(), q.tokens.begin(), q.tokens.end());
  }
  return Vocabulary::build(tokens);
}

namespace {

struct Prepared {
  const Schema* schema;
  QuestionTokens question;
  RelationMatrix rels;
  TreePtr gold;
  std::string gold_sql;
  bool unreachable = false;
};

double evaluate_em(const Model& model, const std::vector<Prepared>& examples,
                   const std::vector<int>& indices, int cap) {
  if (indices.empty()) return 0.0;
  int hits = 0, count = 0;
  for (int idx : indices) {
    if (count >= cap) break;
    const Prepared& p = examples[idx];
    ++count;
    try {
      auto enc = encode(p.question, *p.schema, p.rels, model.vocab, *model.params,
                        model.encoder);
      auto result =
          decode(enc, p.question, *p.schema, *model.params, model.decoder);
      if (result.complete && exact_set_match(result.tree, p.gold, *p.schema)) ++hits;
    } catch (const NoParseError&) {
    } catch (const std::exception&) {
    }
  }
  return count ? static_cast<double>(hits) / count : 0.0;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, Dataset& dataset, const std::string& checkpoint_path,
                  std::ostream& metrics, std::ostream* info) {
  TrainResult result;
  if (dataset.examples.empty()) throw std::invalid_argument("train: empty corpus");

  Vocabulary vocab = build_vocabulary(dataset.schemas, dataset.examples);
  Model model = Model::build(cfg, std::move(vocab));

  // Precompute graphs and gold trees.
  std::vector<Prepared> prepared;
  for (const auto& ex : dataset.examples) {
    Prepared p;
    p.schema = &dataset.schemas.at(ex.db_id);
    p.question = tokenize(ex.question);
    p.rels = build_relation_matrix(p.question, *p.schema);
    p.gold = parse_sql(ex.gold_sql, *p.schema);
    p.gold_sql = ex.gold_sql;
    prepared.push_back(std::move(p));
  }

  // Held-out slice: every k-th example when the corpus is large enough.
  std::vector<int> train_idx, heldout_idx;
  const int stride = cfg.heldout_fraction > 0
                         ? std::max(2, static_cast<int>(std::lround(1.0 / cfg.heldout_fraction)))
                         : 0;
  for (int i = 0; i < static_cast<int>(prepared.size()); ++i) {
    if (stride > 0 && prepared.size() >= 20 && i % stride == stride - 1)
      heldout_idx.push_back(i);
    else
      train_idx.push_back(i);
  }

  std::mt19937_64 rng(cfg.seed);
  Adam opt(cfg.lr_encoder, cfg.lr_decoder);
  const int window = std::max(1, cfg.batch_size * cfg.grad_accum);
  DecoderConfig train_dec = model.decoder;  // teacher-forcing beam may be narrower
  if (cfg.train_beam > 0) train_dec.K = cfg.train_beam;

  double best_em = -1.0;
  int step = 0;
  bool stop = false;
  std::set<int> dead;  // examples whose gold the forced beam cannot reach

  auto run_eval = [&]() {
    const double train_em =
        evaluate_em(model, prepared, train_idx, cfg.eval_max_examples);
    const double held_em =
        evaluate_em(model, prepared, heldout_idx, cfg.eval_max_examples);
    const double score = heldout_idx.empty() ? train_em : held_em;
    const bool improved = score > best_em;
    if (improved) {
      best_em = score;
      if (!checkpoint_path.empty()) model.save(checkpoint_path);
    }
    nlohmann::json j{{"type", "eval"},
                     {"step", step},
                     {"train_em", train_em},
                     {"improved", improved}};
    if (!heldout_idx.empty()) j["heldout_em"] = held_em;
    metrics << j.dump() << "\n" << std::flush;
    if (cfg.em_stop > 0.0 && train_em >= cfg.em_stop) stop = true;
    return improved;
  };

  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    std::vector<int> order = train_idx;
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    while (cursor < order.size() && !stop) {
      const std::size_t end = std::min(order.size(), cursor + window);
      model.params->zero_grad();
      double window_loss = 0.0;
      int used = 0;
      for (std::size_t k = cursor; k < end; ++k) {
        const int idx = order[k];
        if (dead.count(idx)) continue;
        Prepared& p = prepared[idx];
        try {
          auto enc = encode(p.question, *p.schema, p.rels, model.vocab, *model.params,
                            model.encoder, true, &rng);
          auto tl = training_loss(p.gold, enc, p.question, *p.schema, *model.params,
                                  train_dec);
          auto scaled = ag::scale(tl.loss, 1.0 / static_cast<double>(end - cursor));
          window_loss += tl.loss->value.data[0];
          ag::backward(scaled);
          ++used;
        } catch (const std::runtime_error& e) {
          if (std::string(e.what()).find("not reachable") != std::string::npos ||
              std::string(e.what()).find("not on frontier") != std::string::npos) {
            dead.insert(idx);
            ++result.unreachable_examples;
            if (info) *info << "excluding unreachable example " << idx << ": " << e.what()
                            << "\n";
          } else {
            throw;
          }
        }
      }
      cursor = end;
      if (used == 0) continue;
      const double mean_loss = window_loss / used;
      if (!std::isfinite(mean_loss)) {
        result.diverged = true;
        nlohmann::json j{{"type", "diverged"}, {"step", step}};
        metrics << j.dump() << "\n" << std::flush;
        result.steps = step;
        result.best_em = std::max(best_em, 0.0);
        return result;
      }
      opt.step(*model.params);
      ++step;
      nlohmann::json j{
          {"type", "step"}, {"step", step}, {"epoch", epoch}, {"loss", mean_loss}};
      metrics << j.dump() << "\n";
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) run_eval();
      if (cfg.max_steps > 0 && step >= cfg.max_steps) stop = true;
    }
    if (cfg.eval_every == 0 && !stop) run_eval();
  }
  run_eval();
  if (best_em < 0 && !checkpoint_path.empty()) model.save(checkpoint_path);
  result.steps = step;
  result.best_em = std::max(best_em, 0.0);
  nlohmann::json j{{"type", "final"}, {"steps", step}, {"best_em", result.best_em}};
  metrics << j.dump() << "\n" << std::flush;
  return result;
}

}  // namespace rasap

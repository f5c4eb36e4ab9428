#pragma once

#include <iosfwd>
#include <memory>

#include "rasap/config.hpp"
#include "rasap/dataset.hpp"
#include "rasap/decoder.hpp"
#include "rasap/vocab.hpp"

namespace rasap {

// A trained (or freshly initialized) parser: parameters plus everything
// needed to run it standalone.
struct Model {
  std::unique_ptr<ParamStore> params;
  Vocabulary vocab;
  EncoderConfig encoder;
  DecoderConfig decoder;

  static Model build(const TrainConfig& cfg, Vocabulary vocab);
  void save(const std::string& path) const;
  static Model load(const std::string& path);

  // encode + decode in evaluation mode; throws NoParseError when the beam
  // never forms a relation-typed tree.
  DecodeResult parse_question(const QuestionTokens& q, const Schema& s,
                              const TreeScorer& scorer = nullptr,
                              bool want_trace = false) const;
  std::string parse_to_sql(const std::string& question, const Schema& s) const;
};

Vocabulary build_vocabulary(const std::map<std::string, Schema>& schemas,
                            const std::vector<Example>& examples);

struct TrainResult {
  int steps = 0;
  double best_em = 0.0;
  bool diverged = false;
  int unreachable_examples = 0;  // golds the teacher-forced beam cannot reach
};

// Teacher-forced training with gradient accumulation and two learning-rate
// groups. Writes one JSON object per line to `metrics`: step records with the
// loss, eval records with exact-match rates, and a final summary. Checkpoints
// to `checkpoint_path` whenever the evaluated EM improves.
TrainResult train(const TrainConfig& cfg, Dataset& dataset,
                  const std::string& checkpoint_path, std::ostream& metrics,
                  std::ostream* info = nullptr);

}  // namespace rasap

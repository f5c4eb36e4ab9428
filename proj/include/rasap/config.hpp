#pragma once

#include <cstdint>
#include <string>

#include "rasap/decoder.hpp"
#include "rasap/encoder.hpp"

namespace rasap {

struct TrainConfig {
  std::uint64_t seed = 1;
  int epochs = 520;
  int batch_size = 12;
  int grad_accum = 5;
  double lr_encoder = 3e-6;     // embedding tables (the backbone stand-in)
  double lr_decoder = 0.000186; // everything else
  EncoderConfig encoder;        // d_x=64, 8 heads, 4 layers, d_ff=256, dropout 0.2
  DecoderConfig decoder;        // K=30, T=9, d_b=256, composer 1x8x256

  // run control
  int max_steps = 0;            // optimizer-step cap, 0 = epochs only
  int eval_every = 0;           // steps between EM evals, 0 = once per epoch
  int eval_max_examples = 64;   // examples per EM evaluation
  double em_stop = 0.0;         // stop early at this train-slice EM
  double heldout_fraction = 0.1;
  // beam width during teacher forcing; decoder.K is the inference beam.
  // 0 means use decoder.K for both.
  int train_beam = 0;

  std::string to_json() const;                     // one line, checkpoint-safe
  static TrainConfig from_json(const std::string& text);
  static TrainConfig load_file(const std::string& path);  // "" gives defaults
  // dotted-path override, e.g. "decoder.K=8" or "lr_decoder=0.001"
  void apply_override(const std::string& assignment);
};

}  // namespace rasap

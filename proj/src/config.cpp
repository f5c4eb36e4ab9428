#include "rasap/config.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace rasap {

namespace {

using nlohmann::json;

json encoder_json(const EncoderConfig& e) {
  return {{"d_x", e.d_x},   {"heads", e.heads},     {"layers", e.n_layers},
          {"d_ff", e.d_ff}, {"dropout", e.dropout}, {"vocab_size", e.vocab_size}};
}

json decoder_json(const DecoderConfig& d) {
  return {{"K", d.K},
          {"T", d.T},
          {"d_b", d.d_b},
          {"comp_heads", d.comp_heads},
          {"comp_ff", d.comp_ff},
          {"d_score", d.d_score},
          {"frontier_cap_factor", d.frontier_cap_factor}};
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string TrainConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["grad_accum"] = grad_accum;
  j["lr_encoder"] = lr_encoder;
  j["lr_decoder"] = lr_decoder;
  j["encoder"] = encoder_json(encoder);
  j["decoder"] = decoder_json(decoder);
  j["max_steps"] = max_steps;
  j["eval_every"] = eval_every;
  j["eval_max_examples"] = eval_max_examples;
  j["em_stop"] = em_stop;
  j["heldout_fraction"] = heldout_fraction;
  j["train_beam"] = train_beam;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  TrainConfig c;
  maybe(j, "seed", c.seed);
  maybe(j, "epochs", c.epochs);
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "grad_accum", c.grad_accum);
  maybe(j, "lr_encoder", c.lr_encoder);
  maybe(j, "lr_decoder", c.lr_decoder);
  maybe(j, "max_steps", c.max_steps);
  maybe(j, "eval_every", c.eval_every);
  maybe(j, "eval_max_examples", c.eval_max_examples);
  maybe(j, "em_stop", c.em_stop);
  maybe(j, "heldout_fraction", c.heldout_fraction);
  maybe(j, "train_beam", c.train_beam);
  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    maybe(e, "d_x", c.encoder.d_x);
    maybe(e, "heads", c.encoder.heads);
    maybe(e, "layers", c.encoder.n_layers);
    maybe(e, "d_ff", c.encoder.d_ff);
    maybe(e, "dropout", c.encoder.dropout);
    maybe(e, "vocab_size", c.encoder.vocab_size);
  }
  if (j.contains("decoder")) {
    const json& d = j.at("decoder");
    maybe(d, "K", c.decoder.K);
    maybe(d, "T", c.decoder.T);
    maybe(d, "d_b", c.decoder.d_b);
    maybe(d, "comp_heads", c.decoder.comp_heads);
    maybe(d, "comp_ff", c.decoder.comp_ff);
    maybe(d, "d_score", c.decoder.d_score);
    maybe(d, "frontier_cap_factor", c.decoder.frontier_cap_factor);
  }
  return c;
}

TrainConfig TrainConfig::load_file(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void TrainConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json j = json::parse(to_json());
  json* cursor = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (!cursor->contains(part))
      throw std::invalid_argument("unknown config key: " + key);
    if (dot == std::string::npos) {
      json& leaf = (*cursor)[part];
      if (leaf.is_number_float())
        leaf = std::stod(value);
      else if (leaf.is_number_integer() || leaf.is_number_unsigned())
        leaf = std::stoll(value);
      else
        leaf = value;
      break;
    }
    cursor = &(*cursor)[part];
    start = dot + 1;
  }
  *this = from_json(j.dump());
}

}  // namespace rasap

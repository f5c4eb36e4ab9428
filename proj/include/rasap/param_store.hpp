#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "rasap/autodiff.hpp"

namespace rasap {

// Named store of learnable tensors. Initialization is derived from
// (seed, parameter name), so creation order does not affect values and the
// same seed always reproduces the same bits.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  // Glorot-uniform matrix: uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
  ag::Var make_matrix(const std::string& name, int rows, int cols);
  // Embedding-style table: normal(0, 0.02).
  ag::Var make_embedding(const std::string& name, int rows, int cols);
  ag::Var make_zeros(const std::string& name, int rows, int cols);
  ag::Var make_ones(const std::string& name, int rows, int cols);

  ag::Var get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  const std::map<std::string, ag::Var>& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }

  void zero_grad();

  // Free-form metadata persisted with the checkpoint (vocabulary, dims, ...).
  void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
  const std::map<std::string, std::string>& meta() const { return meta_; }
  std::string meta_or(const std::string& key, const std::string& fallback) const;

  // Checkpoints round-trip bit-exactly (values are written as hex floats).
  void save(const std::string& path) const;
  static ParamStore load(const std::string& path);

 private:
  ag::Var insert(const std::string& name, Tensor t);
  std::mt19937_64 rng_for(const std::string& name) const;

  std::uint64_t seed_;
  std::map<std::string, ag::Var> params_;
  std::map<std::string, std::string> meta_;
};

// Max relative error between analytic gradients and central differences,
// sampled over up to `samples_per_param` coordinates of every parameter.
// `f` must rebuild the graph from current parameter values on each call.
double grad_check(const std::function<ag::Var()>& f, ParamStore& params, double eps,
                  int samples_per_param = 24, std::uint64_t sample_seed = 7);

}  // namespace rasap

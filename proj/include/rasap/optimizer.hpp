#pragma once

#include <map>
#include <string>

#include "rasap/param_store.hpp"

namespace rasap {

// Adam with two learning-rate groups: embedding tables (the pretrained-
// backbone stand-in) train at `lr_embeddings`, everything else at `lr_model`.
class Adam {
 public:
  Adam(double lr_embeddings, double lr_model, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_emb_(lr_embeddings), lr_model_(lr_model), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update from the accumulated gradients; does not zero them.
  void step(ParamStore& params);

  static bool is_embedding_param(const std::string& name) {
    return name.rfind("emb.", 0) == 0;
  }

 private:
  struct Moments {
    Tensor m, v;
  };
  double lr_emb_, lr_model_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace rasap

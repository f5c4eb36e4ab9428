#include "rasap/optimizer.hpp"

#include <cmath>

namespace rasap {

void Adam::step(ParamStore& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (const auto& [name, var] : params.params()) {
    if (var->grad.shape != var->value.shape) continue;  // no gradient this step
    auto [it, fresh] = state_.try_emplace(name);
    if (fresh) {
      it->second.m = Tensor::zeros(var->value.shape);
      it->second.v = Tensor::zeros(var->value.shape);
    }
    const double lr = is_embedding_param(name) ? lr_emb_ : lr_model_;
    auto& m = it->second.m.data;
    auto& v = it->second.v.data;
    for (std::size_t i = 0; i < var->value.data.size(); ++i) {
      const double g = var->grad.data[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      var->value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace rasap

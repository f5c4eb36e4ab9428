#include "rasap/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace rasap::ag {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() +
                              " and " + b.shape_str());
}

Var make_node(Tensor value, std::vector<Var> inputs, const char* op,
              std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  n->op = op;
  for (const auto& in : n->inputs)
    if (in->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

void require_rank2(const Var& a, const char* op) {
  if (a->value.ndim() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " +
                                a->value.shape_str());
}

}  // namespace

void Node::ensure_grad() {
  if (grad.shape != value.shape) grad = Tensor::zeros(value.shape);
}

void Node::add_grad(const Tensor& g) {
  ensure_grad();
  for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += g.data[i];
}

Var constant(Tensor t) { return leaf(std::move(t), false); }

Var leaf(Tensor t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = requires_grad;
  return n;
}

Var add(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) shape_error("add", a->value, b->value);
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  return make_node(std::move(out), {a, b}, "add", [](Node& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->add_grad(self.grad);
    if (self.inputs[1]->requires_grad) self.inputs[1]->add_grad(self.grad);
  });
}

Var add_rowvec(const Var& x, const Var& b) {
  require_rank2(x, "add_rowvec");
  if (b->value.ndim() != 2 || b->value.rows() != 1 || b->value.cols() != x->value.cols())
    shape_error("add_rowvec", x->value, b->value);
  Tensor out = x->value;
  const int n = out.rows(), d = out.cols();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) += b->value.at(0, j);
  return make_node(std::move(out), {x, b}, "add_rowvec", [](Node& self) {
    const int n = self.value.rows(), d = self.value.cols();
    if (self.inputs[0]->requires_grad) self.inputs[0]->add_grad(self.grad);
    if (self.inputs[1]->requires_grad) {
      self.inputs[1]->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) self.inputs[1]->grad.at(0, j) += self.grad.at(i, j);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) shape_error("sub", a->value, b->value);
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->value.data[i];
  return make_node(std::move(out), {a, b}, "sub", [](Node& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->add_grad(self.grad);
    if (self.inputs[1]->requires_grad) {
      self.inputs[1]->ensure_grad();
      for (std::size_t i = 0; i < self.grad.data.size(); ++i)
        self.inputs[1]->grad.data[i] -= self.grad.data[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) shape_error("mul", a->value, b->value);
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  return make_node(std::move(out), {a, b}, "mul", [](Node& self) {
    auto& a = self.inputs[0];
    auto& b = self.inputs[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.data.size(); ++i)
        a->grad.data[i] += self.grad.data[i] * b->value.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.data.size(); ++i)
        b->grad.data[i] += self.grad.data[i] * a->value.data[i];
    }
  });
}

Var scale(const Var& a, double c) {
  Tensor out = a->value;
  for (double& v : out.data) v *= c;
  return make_node(std::move(out), {a}, "scale", [c](Node& self) {
    auto& a = self.inputs[0];
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      a->grad.data[i] += self.grad.data[i] * c;
  });
}

Var relu(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return make_node(std::move(out), {a}, "relu", [](Node& self) {
    auto& a = self.inputs[0];
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      if (a->value.data[i] > 0.0) a->grad.data[i] += self.grad.data[i];
  });
}

Var transpose(const Var& a) {
  require_rank2(a, "transpose");
  const int n = a->value.rows(), d = a->value.cols();
  Tensor out({d, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.at(j, i) = a->value.at(i, j);
  return make_node(std::move(out), {a}, "transpose", [](Node& self) {
    auto& a = self.inputs[0];
    a->ensure_grad();
    const int n = a->value.rows(), d = a->value.cols();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) a->grad.at(i, j) += self.grad.at(j, i);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int n = parts[0]->value.rows();
  int total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p->value.rows() != n) shape_error("concat_cols", parts[0]->value, p->value);
    total += p->value.cols();
  }
  Tensor out({n, total});
  int off = 0;
  for (const auto& p : parts) {
    const int d = p->value.cols();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) out.at(i, off + j) = p->value.at(i, j);
    off += d;
  }
  return make_node(std::move(out), parts, "concat_cols", [](Node& self) {
    const int n = self.value.rows();
    int off = 0;
    for (auto& p : self.inputs) {
      const int d = p->value.cols();
      if (p->requires_grad) {
        p->ensure_grad();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < d; ++j) p->grad.at(i, j) += self.grad.at(i, off + j);
      }
      off += d;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const int d = parts[0]->value.cols();
  int total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p->value.cols() != d) shape_error("concat_rows", parts[0]->value, p->value);
    total += p->value.rows();
  }
  Tensor out({total, d});
  int off = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < p->value.rows(); ++i)
      for (int j = 0; j < d; ++j) out.at(off + i, j) = p->value.at(i, j);
    off += p->value.rows();
  }
  return make_node(std::move(out), parts, "concat_rows", [](Node& self) {
    const int d = self.value.cols();
    int off = 0;
    for (auto& p : self.inputs) {
      if (p->requires_grad) {
        p->ensure_grad();
        for (int i = 0; i < p->value.rows(); ++i)
          for (int j = 0; j < d; ++j) p->grad.at(i, j) += self.grad.at(off + i, j);
      }
      off += p->value.rows();
    }
  });
}

Var slice_rows(const Var& a, int start, int len) {
  require_rank2(a, "slice_rows");
  if (start < 0 || len <= 0 || start + len > a->value.rows())
    throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of " + a->value.shape_str());
  const int d = a->value.cols();
  Tensor out({len, d});
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) = a->value.at(start + i, j);
  return make_node(std::move(out), {a}, "slice_rows", [start](Node& self) {
    auto& a = self.inputs[0];
    a->ensure_grad();
    const int d = self.value.cols();
    for (int i = 0; i < self.value.rows(); ++i)
      for (int j = 0; j < d; ++j) a->grad.at(start + i, j) += self.grad.at(i, j);
  });
}

Var gather_rows(const Var& a, std::vector<int> indices) {
  require_rank2(a, "gather_rows");
  const int d = a->value.cols();
  for (int idx : indices)
    if (idx < 0 || idx >= a->value.rows())
      throw std::invalid_argument("gather_rows: index " + std::to_string(idx) + " out of " +
                                  a->value.shape_str());
  Tensor out({static_cast<int>(indices.size()), d});
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (int j = 0; j < d; ++j) out.at(static_cast<int>(i), j) = a->value.at(indices[i], j);
  return make_node(std::move(out), {a}, "gather_rows", [idx = std::move(indices)](Node& self) {
    auto& a = self.inputs[0];
    a->ensure_grad();
    const int d = self.value.cols();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < d; ++j) a->grad.at(idx[i], j) += self.grad.at(static_cast<int>(i), j);
  });
}

Var mean_rows(const Var& a) {
  require_rank2(a, "mean_rows");
  const int n = a->value.rows(), d = a->value.cols();
  Tensor out({1, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.at(0, j) += a->value.at(i, j);
  for (int j = 0; j < d; ++j) out.at(0, j) /= n;
  return make_node(std::move(out), {a}, "mean_rows", [](Node& self) {
    auto& a = self.inputs[0];
    a->ensure_grad();
    const int n = a->value.rows(), d = a->value.cols();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) a->grad.at(i, j) += self.grad.at(0, j) / n;
  });
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a->value.data) s += v;
  return make_node(Tensor::scalar(s), {a}, "sum_all", [](Node& self) {
    auto& a = self.inputs[0];
    a->ensure_grad();
    const double g = self.grad.data[0];
    for (double& v : a->grad.data) v += g;
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a->value.cols() != b->value.rows()) shape_error("matmul", a->value, b->value);
  const int n = a->value.rows(), k = a->value.cols(), m = b->value.cols();
  Tensor out({n, m});
  const double* pa = a->value.data.data();
  const double* pb = b->value.data.data();
  double* po = out.data.data();
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = pa[static_cast<std::size_t>(i) * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + static_cast<std::size_t>(p) * m;
      double* orow = po + static_cast<std::size_t>(i) * m;
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  return make_node(std::move(out), {a, b}, "matmul", [](Node& self) {
    auto& a = self.inputs[0];
    auto& b = self.inputs[1];
    const int n = a->value.rows(), k = a->value.cols(), m = b->value.cols();
    if (a->requires_grad) {
      // dA = dOut * B^T
      a->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
          const double g = self.grad.at(i, j);
          if (g == 0.0) continue;
          for (int p = 0; p < k; ++p) a->grad.at(i, p) += g * b->value.at(p, j);
        }
    }
    if (b->requires_grad) {
      // dB = A^T * dOut
      b->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < k; ++p) {
          const double av = a->value.at(i, p);
          if (av == 0.0) continue;
          for (int j = 0; j < m; ++j) b->grad.at(p, j) += av * self.grad.at(i, j);
        }
    }
  });
}

namespace {

// Softmax over contiguous lines of length `len`, `count` of them, with stride 1.
// For axis-0 softmax we transpose around it.
void softmax_lines(const double* in, double* out, int count, int len) {
  for (int r = 0; r < count; ++r) {
    const double* x = in + static_cast<std::size_t>(r) * len;
    double* y = out + static_cast<std::size_t>(r) * len;
    double mx = x[0];
    for (int j = 1; j < len; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < len; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (int j = 0; j < len; ++j) y[j] /= sum;
  }
}

Var softmax_last(const Var& a) {
  const int ndim = a->value.ndim();
  const int len = ndim == 1 ? a->value.shape[0] : a->value.cols();
  const int count = static_cast<int>(a->value.numel() / len);
  Tensor out(a->value.shape);
  softmax_lines(a->value.data.data(), out.data.data(), count, len);
  return make_node(std::move(out), {a}, "softmax", [count, len](Node& self) {
    auto& a = self.inputs[0];
    a->ensure_grad();
    for (int r = 0; r < count; ++r) {
      const double* y = self.value.data.data() + static_cast<std::size_t>(r) * len;
      const double* dy = self.grad.data.data() + static_cast<std::size_t>(r) * len;
      double* dx = a->grad.data.data() + static_cast<std::size_t>(r) * len;
      double dot = 0.0;
      for (int j = 0; j < len; ++j) dot += y[j] * dy[j];
      for (int j = 0; j < len; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  });
}

}  // namespace

Var softmax(const Var& a, int axis) {
  if (!a->value.all_finite())
    throw std::invalid_argument("softmax: input contains NaN or Inf");
  const int ndim = a->value.ndim();
  if (ndim == 1) {
    if (axis != 0 && axis != -1)
      throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " invalid for " +
                                  a->value.shape_str());
    return softmax_last(a);
  }
  if (ndim != 2)
    throw std::invalid_argument("softmax: rank-" + std::to_string(ndim) + " input unsupported");
  if (axis == 1 || axis == -1) return softmax_last(a);
  if (axis == 0) return transpose(softmax_last(transpose(a)));
  throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " invalid for " +
                              a->value.shape_str());
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias) {
  require_rank2(x, "layer_norm");
  const int n = x->value.rows(), d = x->value.cols();
  if (d == 0) throw std::invalid_argument("layer_norm: zero-length rows");
  if (gain->value.cols() != d || bias->value.cols() != d)
    throw std::invalid_argument("layer_norm: gain/bias " + gain->value.shape_str() + "/" +
                                bias->value.shape_str() + " do not match row width " +
                                std::to_string(d));
  constexpr double kEps = 1e-5;
  Tensor out({n, d});
  Tensor xhat({n, d});  // kept alive in the closure for backward
  std::vector<double> inv_sigma(n);
  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += x->value.at(i, j);
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = x->value.at(i, j) - mean;
      var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_sigma[i] = inv;
    for (int j = 0; j < d; ++j) {
      const double h = (x->value.at(i, j) - mean) * inv;
      xhat.at(i, j) = h;
      out.at(i, j) = h * gain->value.at(0, j) + bias->value.at(0, j);
    }
  }
  return make_node(std::move(out), {x, gain, bias}, "layer_norm",
                   [xh = std::move(xhat), is = std::move(inv_sigma)](Node& self) {
                     auto& x = self.inputs[0];
                     auto& gain = self.inputs[1];
                     auto& bias = self.inputs[2];
                     const int n = self.value.rows(), d = self.value.cols();
                     if (gain->requires_grad) {
                       gain->ensure_grad();
                       for (int i = 0; i < n; ++i)
                         for (int j = 0; j < d; ++j)
                           gain->grad.at(0, j) += self.grad.at(i, j) * xh.at(i, j);
                     }
                     if (bias->requires_grad) {
                       bias->ensure_grad();
                       for (int i = 0; i < n; ++i)
                         for (int j = 0; j < d; ++j) bias->grad.at(0, j) += self.grad.at(i, j);
                     }
                     if (x->requires_grad) {
                       x->ensure_grad();
                       for (int i = 0; i < n; ++i) {
                         double mean_dh = 0.0, mean_dhh = 0.0;
                         for (int j = 0; j < d; ++j) {
                           const double dh = self.grad.at(i, j) * gain->value.at(0, j);
                           mean_dh += dh;
                           mean_dhh += dh * xh.at(i, j);
                         }
                         mean_dh /= d;
                         mean_dhh /= d;
                         for (int j = 0; j < d; ++j) {
                           const double dh = self.grad.at(i, j) * gain->value.at(0, j);
                           x->grad.at(i, j) +=
                               is[i] * (dh - mean_dh - xh.at(i, j) * mean_dhh);
                         }
                       }
                     }
                   });
}

Var dropout(const Var& a, double rate, std::mt19937_64& rng, bool training) {
  if (!training || rate == 0.0) return a;
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate " + std::to_string(rate) + " outside [0,1)");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double keep = 1.0 - rate;
  std::vector<double> mask(a->value.data.size());
  Tensor out = a->value;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = unif(rng) < rate ? 0.0 : 1.0 / keep;
    out.data[i] *= mask[i];
  }
  return make_node(std::move(out), {a}, "dropout", [m = std::move(mask)](Node& self) {
    auto& a = self.inputs[0];
    a->ensure_grad();
    for (std::size_t i = 0; i < m.size(); ++i) a->grad.data[i] += self.grad.data[i] * m[i];
  });
}

Var relation_scores(const Var& q, const Var& k, const Var& rel_k,
                    const std::vector<int>& labels, double scl) {
  require_rank2(q, "relation_scores");
  const int n = q->value.rows(), d = q->value.cols();
  if (k->value.rows() != n || k->value.cols() != d) shape_error("relation_scores", q->value, k->value);
  if (rel_k->value.cols() != d) shape_error("relation_scores", q->value, rel_k->value);
  if (static_cast<int>(labels.size()) != n * n)
    throw std::invalid_argument("relation_scores: label matrix size mismatch");
  Tensor out({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int l = labels[static_cast<std::size_t>(i) * n + j];
      double s = 0.0;
      for (int c = 0; c < d; ++c)
        s += q->value.at(i, c) * (k->value.at(j, c) + rel_k->value.at(l, c));
      out.at(i, j) = s * scl;
    }
  return make_node(std::move(out), {q, k, rel_k}, "relation_scores",
                   [labels, scl](Node& self) {
                     auto& q = self.inputs[0];
                     auto& k = self.inputs[1];
                     auto& rk = self.inputs[2];
                     const int n = q->value.rows(), d = q->value.cols();
                     q->ensure_grad();
                     k->ensure_grad();
                     rk->ensure_grad();
                     for (int i = 0; i < n; ++i)
                       for (int j = 0; j < n; ++j) {
                         const double g = self.grad.at(i, j) * scl;
                         if (g == 0.0) continue;
                         const int l = labels[static_cast<std::size_t>(i) * n + j];
                         for (int c = 0; c < d; ++c) {
                           q->grad.at(i, c) += g * (k->value.at(j, c) + rk->value.at(l, c));
                           k->grad.at(j, c) += g * q->value.at(i, c);
                           rk->grad.at(l, c) += g * q->value.at(i, c);
                         }
                       }
                   });
}

Var relation_values(const Var& attn, const Var& v, const Var& rel_v,
                    const std::vector<int>& labels) {
  require_rank2(attn, "relation_values");
  const int n = attn->value.rows();
  if (attn->value.cols() != n) shape_error("relation_values", attn->value, v->value);
  const int d = v->value.cols();
  if (v->value.rows() != n) shape_error("relation_values", attn->value, v->value);
  if (rel_v->value.cols() != d) shape_error("relation_values", v->value, rel_v->value);
  if (static_cast<int>(labels.size()) != n * n)
    throw std::invalid_argument("relation_values: label matrix size mismatch");
  Tensor out({n, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = attn->value.at(i, j);
      if (a == 0.0) continue;
      const int l = labels[static_cast<std::size_t>(i) * n + j];
      for (int c = 0; c < d; ++c)
        out.at(i, c) += a * (v->value.at(j, c) + rel_v->value.at(l, c));
    }
  return make_node(std::move(out), {attn, v, rel_v}, "relation_values",
                   [labels](Node& self) {
                     auto& attn = self.inputs[0];
                     auto& v = self.inputs[1];
                     auto& rv = self.inputs[2];
                     const int n = attn->value.rows(), d = v->value.cols();
                     attn->ensure_grad();
                     v->ensure_grad();
                     rv->ensure_grad();
                     for (int i = 0; i < n; ++i)
                       for (int j = 0; j < n; ++j) {
                         const int l = labels[static_cast<std::size_t>(i) * n + j];
                         const double a = attn->value.at(i, j);
                         double da = 0.0;
                         for (int c = 0; c < d; ++c) {
                           const double g = self.grad.at(i, c);
                           da += g * (v->value.at(j, c) + rv->value.at(l, c));
                           v->grad.at(j, c) += g * a;
                           rv->grad.at(l, c) += g * a;
                         }
                         attn->grad.at(i, j) += da;
                       }
                   });
}

Var gather_elems(const Var& m, const std::vector<std::pair<int, int>>& ij) {
  require_rank2(m, "gather_elems");
  Tensor out({1, static_cast<int>(ij.size())});
  for (std::size_t t = 0; t < ij.size(); ++t) {
    const auto [i, j] = ij[t];
    if (i < 0 || i >= m->value.rows() || j < 0 || j >= m->value.cols())
      throw std::invalid_argument("gather_elems: index out of " + m->value.shape_str());
    out.at(0, static_cast<int>(t)) = m->value.at(i, j);
  }
  return make_node(std::move(out), {m}, "gather_elems", [ij](Node& self) {
    auto& m = self.inputs[0];
    m->ensure_grad();
    for (std::size_t t = 0; t < ij.size(); ++t)
      m->grad.at(ij[t].first, ij[t].second) += self.grad.at(0, static_cast<int>(t));
  });
}

Var cross_entropy(const Var& logits, const std::vector<int>& gold) {
  require_rank2(logits, "cross_entropy");
  if (logits->value.rows() != 1)
    throw std::invalid_argument("cross_entropy: expected 1 x n logits, got " +
                                logits->value.shape_str());
  if (!logits->value.all_finite())
    throw std::invalid_argument("cross_entropy: non-finite logits");
  const int n = logits->value.cols();
  if (gold.empty()) throw std::invalid_argument("cross_entropy: no gold indices");
  for (int g : gold)
    if (g < 0 || g >= n) throw std::invalid_argument("cross_entropy: gold index out of range");
  double mx = logits->value.at(0, 0);
  for (int j = 1; j < n; ++j) mx = std::max(mx, logits->value.at(0, j));
  double lse = 0.0;
  for (int j = 0; j < n; ++j) lse += std::exp(logits->value.at(0, j) - mx);
  lse = std::log(lse) + mx;
  double loss = 0.0;
  for (int g : gold) loss += lse - logits->value.at(0, g);
  return make_node(Tensor::scalar(loss), {logits}, "cross_entropy",
                   [gold, lse](Node& self) {
                     auto& lg = self.inputs[0];
                     lg->ensure_grad();
                     const int n = lg->value.cols();
                     const double g0 = self.grad.data[0];
                     const double w = static_cast<double>(gold.size());
                     for (int j = 0; j < n; ++j)
                       lg->grad.at(0, j) += g0 * w * std::exp(lg->value.at(0, j) - lse);
                     for (int g : gold) lg->grad.at(0, g) -= g0;
                   });
}

void backward(const Var& loss) {
  if (loss->value.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + loss->value.shape_str());
  if (loss->backward_done)
    throw std::logic_error("backward: already run on this root; rebuild the graph first");
  loss->backward_done = true;

  // Iterative post-order over grad-requiring nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (loss->requires_grad) stack.emplace_back(loss.get(), 0);
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    bool descended = false;
    while (next < node->inputs.size()) {
      Node* in = node->inputs[next++].get();
      if (in->requires_grad && !seen.count(in)) {
        seen.insert(in);
        stack.emplace_back(in, 0);
        descended = true;
        break;
      }
    }
    if (descended) continue;
    order.push_back(node);
    stack.pop_back();
  }

  loss->ensure_grad();
  loss->grad.data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop(*node);
    }
  }
}

}  // namespace rasap::ag

#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rasap/tensor.hpp"

namespace rasap::ag {

struct Node;
using Var = std::shared_ptr<Node>;

// One value in the computation graph. Operations record their inputs and a
// backprop closure; backward() runs the closures in reverse topological order.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first use, same shape as value
  bool requires_grad = false;
  bool backward_done = false;  // guards double backward() on the same root
  std::vector<Var> inputs;
  std::function<void(Node&)> backprop;
  const char* op = "leaf";

  void ensure_grad();
  void add_grad(const Tensor& g);
};

Var constant(Tensor t);
Var leaf(Tensor t, bool requires_grad = true);

// -- elementwise / structural ------------------------------------------------
Var add(const Var& a, const Var& b);
Var add_rowvec(const Var& x, const Var& b);  // x: n x d, b: 1 x d
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // Hadamard
Var scale(const Var& a, double c);
Var relu(const Var& a);
Var transpose(const Var& a);
Var concat_cols(const std::vector<Var>& parts);  // concat along last axis
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int start, int len);
Var gather_rows(const Var& a, std::vector<int> indices);
Var mean_rows(const Var& a);  // n x d -> 1 x d
Var sum_all(const Var& a);    // -> 1 x 1

// -- dense algebra -----------------------------------------------------------
Var matmul(const Var& a, const Var& b);

// -- nonlinear blocks --------------------------------------------------------
// Numerically stabilized softmax along `axis` (0 or 1 for rank-2, 0 or -1 for
// rank-1). Rejects non-finite inputs.
Var softmax(const Var& a, int axis);
// Per-row normalization with epsilon 1e-5 inside the square root. Constant
// rows normalize to zero before gain/bias are applied.
Var layer_norm(const Var& x, const Var& gain, const Var& bias);
// Inverted dropout; identity when `training` is false or rate == 0.
Var dropout(const Var& a, double rate, std::mt19937_64& rng, bool training);

// -- relation-biased attention kernels ---------------------------------------
// scores[i][j] = scale * dot(q[i], k[j] + rel_k[labels[i*n+j]])
Var relation_scores(const Var& q, const Var& k, const Var& rel_k,
                    const std::vector<int>& labels, double scale);
// out[i] = sum_j attn[i][j] * (v[j] + rel_v[labels[i*n+j]])
Var relation_values(const Var& attn, const Var& v, const Var& rel_v,
                    const std::vector<int>& labels);

// -- scoring helpers ----------------------------------------------------------
// Picks matrix entries into a 1 x k row, in the order given.
Var gather_elems(const Var& m, const std::vector<std::pair<int, int>>& ij);
// -sum_g log softmax(logits)[g] over a 1 x n row of logits.
Var cross_entropy(const Var& logits, const std::vector<int>& gold);

// Runs reverse-mode accumulation from a scalar loss. Throws if called twice
// on the same root without rebuilding the graph.
void backward(const Var& loss);

}  // namespace rasap::ag

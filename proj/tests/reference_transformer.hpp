#pragma once

// Plain-loop reference for one post-LN transformer encoder layer with
// per-head projections, no output projection, and no relation terms.
// Written independently of the autodiff stack on purpose: only raw tensors.

#include <cmath>
#include <vector>

#include "rasap/param_store.hpp"
#include "rasap/tensor.hpp"

namespace rasap::testing {

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (int i = 0; i < t.rows(); ++i)
    for (int j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
  const int n = static_cast<int>(a.size());
  const int k = static_cast<int>(b.size());
  const int m = static_cast<int>(b[0].size());
  Matrix out(n, std::vector<double>(m, 0.0));
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < k; ++p)
      for (int j = 0; j < m; ++j) out[i][j] += a[i][p] * b[p][j];
  return out;
}

inline std::vector<double> layer_norm_row(const std::vector<double>& x,
                                          const std::vector<double>& gain,
                                          const std::vector<double>& bias) {
  const int d = static_cast<int>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= d;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= d;
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  std::vector<double> out(d);
  for (int j = 0; j < d; ++j) out[j] = (x[j] - mean) * inv * gain[j] + bias[j];
  return out;
}

struct ReferenceLayerWeights {
  std::vector<Matrix> wq, wk, wv;  // per head: d_x x (d_x/H)
  std::vector<double> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  Matrix ff1_w, ff2_w;
  std::vector<double> ff1_b, ff2_b;

  static ReferenceLayerWeights from_params(const ParamStore& params, int layer, int heads) {
    ReferenceLayerWeights w;
    const std::string lp = "enc.l" + std::to_string(layer) + ".";
    for (int h = 0; h < heads; ++h) {
      const std::string hp = lp + "h" + std::to_string(h) + ".";
      w.wq.push_back(to_matrix(params.get(hp + "wq")->value));
      w.wk.push_back(to_matrix(params.get(hp + "wk")->value));
      w.wv.push_back(to_matrix(params.get(hp + "wv")->value));
    }
    w.ln1_gain = to_matrix(params.get(lp + "ln1.gain")->value)[0];
    w.ln1_bias = to_matrix(params.get(lp + "ln1.bias")->value)[0];
    w.ln2_gain = to_matrix(params.get(lp + "ln2.gain")->value)[0];
    w.ln2_bias = to_matrix(params.get(lp + "ln2.bias")->value)[0];
    w.ff1_w = to_matrix(params.get(lp + "ff1.w")->value);
    w.ff2_w = to_matrix(params.get(lp + "ff2.w")->value);
    w.ff1_b = to_matrix(params.get(lp + "ff1.b")->value)[0];
    w.ff2_b = to_matrix(params.get(lp + "ff2.b")->value)[0];
    return w;
  }
};

inline Matrix reference_transformer_layer(const Matrix& x, const ReferenceLayerWeights& w) {
  const int n = static_cast<int>(x.size());
  const int d = static_cast<int>(x[0].size());
  const int heads = static_cast<int>(w.wq.size());
  const int dh = static_cast<int>(w.wq[0][0].size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix z(n, std::vector<double>(d, 0.0));
  for (int h = 0; h < heads; ++h) {
    Matrix q = mat_mul(x, w.wq[h]);
    Matrix k = mat_mul(x, w.wk[h]);
    Matrix v = mat_mul(x, w.wv[h]);
    for (int i = 0; i < n; ++i) {
      std::vector<double> e(n);
      double mx = -1e300;
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int c = 0; c < dh; ++c) s += q[i][c] * k[j][c];
        e[j] = s * scale;
        mx = std::max(mx, e[j]);
      }
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        e[j] = std::exp(e[j] - mx);
        sum += e[j];
      }
      for (int j = 0; j < n; ++j) {
        const double a = e[j] / sum;
        for (int c = 0; c < dh; ++c) z[i][h * dh + c] += a * v[j][c];
      }
    }
  }

  Matrix y(n, std::vector<double>(d));
  for (int i = 0; i < n; ++i) {
    std::vector<double> res(d);
    for (int j = 0; j < d; ++j) res[j] = x[i][j] + z[i][j];
    std::vector<double> y1 = layer_norm_row(res, w.ln1_gain, w.ln1_bias);
    const int dff = static_cast<int>(w.ff1_w[0].size());
    std::vector<double> hid(dff, 0.0);
    for (int j = 0; j < dff; ++j) {
      double s = w.ff1_b[j];
      for (int c = 0; c < d; ++c) s += y1[c] * w.ff1_w[c][j];
      hid[j] = s > 0.0 ? s : 0.0;
    }
    std::vector<double> ff(d, 0.0);
    for (int j = 0; j < d; ++j) {
      double s = w.ff2_b[j];
      for (int c = 0; c < dff; ++c) s += hid[c] * w.ff2_w[c][j];
      ff[j] = y1[j] + s;
    }
    y[i] = layer_norm_row(ff, w.ln2_gain, w.ln2_bias);
  }
  return y;
}

}  // namespace rasap::testing

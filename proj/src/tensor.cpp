#include "rasap/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace rasap {

Tensor::Tensor(std::vector<int> shp, double fill) : shape(std::move(shp)) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_str());
    n *= d;
  }
  data.assign(static_cast<std::size_t>(n), fill);
}

Tensor Tensor::scalar(double v) {
  Tensor t({1, 1});
  t.data[0] = v;
  return t;
}

Tensor Tensor::row(std::vector<double> v) {
  Tensor t;
  t.shape = {1, static_cast<int>(v.size())};
  t.data = std::move(v);
  return t;
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
  if (static_cast<std::int64_t>(v.size()) != static_cast<std::int64_t>(rows) * cols)
    throw std::invalid_argument("matrix(): data size does not match " + rasap::shape_str({rows, cols}));
  Tensor t;
  t.shape = {rows, cols};
  t.data = std::move(v);
  return t;
}

std::int64_t Tensor::numel() const {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

int Tensor::rows() const {
  if (shape.empty()) return 0;
  return shape[0];
}

int Tensor::cols() const {
  if (ndim() == 1) return shape[0];
  if (ndim() == 2) return shape[1];
  throw std::logic_error("cols() on tensor of rank " + std::to_string(ndim()));
}

double& Tensor::at(int i, int j) {
  return data[static_cast<std::size_t>(i) * cols() + j];
}

double Tensor::at(int i, int j) const {
  return data[static_cast<std::size_t>(i) * cols() + j];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const { return rasap::shape_str(shape); }

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

}  // namespace rasap

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rasap {

// Dense row-major tensor of 64-bit floats. Rank is arbitrary but almost
// everything in the model is rank 1 or 2.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp, double fill = 0.0);

  static Tensor zeros(std::vector<int> shp) { return Tensor(std::move(shp)); }
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> v);  // 1 x n
  static Tensor matrix(int rows, int cols, std::vector<double> v);

  std::int64_t numel() const;
  int ndim() const { return static_cast<int>(shape.size()); }
  int rows() const;
  int cols() const;

  double& at(int i, int j);
  double at(int i, int j) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace rasap

#pragma once

#include <string>
#include <vector>

namespace wg {

class Rng;

// Dense row-major tensor of doubles. Shapes use int dimensions; everything in
// this library runs at desk scale.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v);
  static Tensor ones(std::vector<int> shape) { return full(std::move(shape), 1.0); }
  static Tensor scalar(double v);
  static Tensor randn(std::vector<int> shape, Rng& rng, double std = 1.0);
  static Tensor uniform(std::vector<int> shape, Rng& rng, double lo, double hi);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int numel() const { return static_cast<int>(data_.size()); }
  bool defined() const { return !shape_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<size_t>(i)]; }

  // (C,H,W) indexing convenience for the common 3-D case.
  double& at3(int c, int y, int x) {
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
  }
  double at3(int c, int y, int x) const {
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
  }
  // (R,C) indexing for the 2-D case.
  double& at2(int r, int c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  double at2(int r, int c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  std::string shape_str() const { return shape_str(shape_); }
  static std::string shape_str(const std::vector<int>& s);
  static int product(const std::vector<int>& s);

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// Throws ShapeError naming `where` unless the two shapes match.
void check_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace wg

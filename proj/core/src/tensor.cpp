#include "warpgrad/tensor.hpp"

#include <cmath>
#include <sstream>

#include "warpgrad/error.hpp"
#include "warpgrad/rng.hpp"

namespace wg {

namespace {
void check_dims(const std::vector<int>& shape) {
  for (int d : shape) {
    if (d <= 0) {
      throw ShapeError("tensor shape " + Tensor::shape_str(shape) +
                       " has a non-positive dimension");
    }
  }
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(static_cast<size_t>(product(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (product(shape_) != static_cast<int>(data_.size())) {
    throw ShapeError("tensor shape " + shape_str(shape_) + " expects " +
                     std::to_string(product(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
  if (!all_finite()) {
    throw NumericError("tensor constructed with non-finite values");
  }
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = v;
  return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double std) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = rng.normal(0.0, std);
  return t;
}

Tensor Tensor::uniform(std::vector<int> shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = rng.uniform(lo, hi);
  return t;
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

int Tensor::product(const std::vector<int>& s) {
  int p = 1;
  for (int d : s) p *= d;
  return p;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}

}  // namespace wg

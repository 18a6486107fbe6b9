#include "jtanet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jtanet {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor extents must be positive: " + shape_to_string(shape_));
  }
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor extents must be positive: " + shape_to_string(shape_));
  }
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_to_string(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for shape " + shape_to_string(shape_));
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("add: " + shape_to_string(shape_) + " vs " + shape_to_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError(what + " contains NaN or Inf");
}

Tensor operator*(double s, Tensor t) {
  t *= s;
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("dot: " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return acc;
}

void require_shape(const Tensor& t, const Shape& expected, const std::string& what) {
  if (t.shape() != expected) {
    throw ShapeError(what + ": expected shape " + shape_to_string(expected) + ", got " + shape_to_string(t.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const std::string& what) {
  if (t.rank() != rank) {
    throw ShapeError(what + ": expected rank " + std::to_string(rank) + ", got shape " + shape_to_string(t.shape()));
  }
}

}  // namespace jtanet

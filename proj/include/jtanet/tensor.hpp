#pragma once

#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jtanet {

using Shape = std::vector<std::size_t>;

/// Raised for any shape or argument contract violation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a NaN or Inf shows up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles. Image batches use NCHW layout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// 4-D accessor (n, c, h, w).
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  void fill(double value);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  bool all_finite() const;
  /// Throws NumericError naming `what` if any element is NaN/Inf.
  void check_finite(const std::string& what) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator*(double s, Tensor t);
double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& t);

void require_shape(const Tensor& t, const Shape& expected, const std::string& what);
void require_rank(const Tensor& t, std::size_t rank, const std::string& what);

/// Gradient bundle returned by every backward primitive.
struct LayerGrad {
  Tensor input_grad;
  std::map<std::string, Tensor> param_grads;
};

}  // namespace jtanet

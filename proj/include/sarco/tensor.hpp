#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sarco/error.hpp"

namespace sarco {

using Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape);

/// Dense row-major N-d array with an optional gradient buffer of the same
/// shape. Activations use NCHW layout.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape();
    data_ = Vector::Zero(shape_size(shape_));
  }

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_size(shape_)) {
      throw Error(ErrorKind::kDimension, "data length " + std::to_string(data_.size()) +
                                             " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }
  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& at(Index n, Index c, Index h, Index w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Scalar at(Index n, Index c, Index h, Index w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Sample `n` of an [N, C, ...] tensor as a C x (rest) matrix.
  MatrixMap sample(Index n) {
    const Index per = data_.size() / shape_[0];
    return MatrixMap(data_.data() + n * per, shape_[1], per / shape_[1]);
  }
  ConstMatrixMap sample(Index n) const {
    const Index per = data_.size() / shape_[0];
    return ConstMatrixMap(data_.data() + n * per, shape_[1], per / shape_[1]);
  }

  bool has_grad() const { return grad_allocated_; }
  /// Gradient buffer, allocated as zeros on first access.
  Vector& grad() {
    if (!grad_allocated_) {
      grad_ = Vector::Zero(data_.size());
      grad_allocated_ = true;
    }
    return grad_;
  }
  const Vector& grad() const { return grad_; }
  void zero_grad() {
    if (grad_allocated_) grad_.setZero();
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

 private:
  void check_shape() const {
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (shape_[i] <= 0) {
        throw Error(ErrorKind::kDimension, "axis " + std::to_string(i) + " of shape " +
                                               shape_string(shape_) + " is not positive");
      }
    }
  }

  Shape shape_;
  Vector data_;
  Vector grad_;
  bool grad_allocated_ = false;
};

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace sarco

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "twostream/errors.hpp"
#include "twostream/real.hpp"

namespace twostream {

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

/// N-dimensional array with row-major flat storage.
///
/// Storage is an Eigen column vector so that any tensor can be viewed as a
/// row-major matrix (leading axis = rows) without copying. There is no
/// broadcasting; every operation checks shapes explicitly.
template <typename Scalar>
class BasicTensor {
 public:
  using Storage = ColVector<Scalar>;
  using MatrixView = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixView = Eigen::Map<const RowMatrix<Scalar>>;

  BasicTensor() : shape_{0} {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(Storage::Zero(checked_size(shape_))) {}

  BasicTensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  BasicTensor(Shape shape, std::initializer_list<Scalar> values)
      : BasicTensor(std::move(shape), Eigen::Map<const Storage>(values.begin(), Index(values.size()))) {}

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

  static BasicTensor constant(Shape shape, Scalar value) {
    BasicTensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  /// Copies a matrix expression into an [rows x cols] tensor.
  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    BasicTensor t({m.rows(), m.cols()});
    t.matrix() = m;
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index ndim() const { return Index(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(std::size_t(axis)); }
  Index size() const { return data_.size(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }

  Scalar& operator[](Index flat) { return data_[flat]; }
  Scalar operator[](Index flat) const { return data_[flat]; }

  template <typename... Ix>
  Scalar& operator()(Ix... ix) { return data_[offset(ix...)]; }
  template <typename... Ix>
  Scalar operator()(Ix... ix) const { return data_[offset(ix...)]; }

  /// Leading axis as rows, the remaining axes flattened into columns.
  MatrixView matrix() { return MatrixView(data(), rows(), cols()); }
  ConstMatrixView matrix() const { return ConstMatrixView(data(), rows(), cols()); }

  Eigen::Map<Storage> vector() { return Eigen::Map<Storage>(data(), size()); }
  Eigen::Map<const Storage> vector() const { return Eigen::Map<const Storage>(data(), size()); }

  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Index checked_size(const Shape& shape) {
    for (Index d : shape) {
      if (d < 0) throw DimensionError("negative extent in shape " + shape_string(shape));
    }
    return shape_size(shape);
  }

  Index rows() const { return shape_.empty() ? 1 : shape_[0]; }
  Index cols() const {
    if (shape_.empty()) return 1;
    return shape_[0] == 0 ? shape_size(Shape(shape_.begin() + 1, shape_.end())) : size() / shape_[0];
  }

  template <typename... Ix>
  Index offset(Ix... ix) const {
    const Index idx[] = {Index(ix)...};
    Index flat = 0;
    for (std::size_t a = 0; a < sizeof...(Ix); ++a) flat = flat * shape_[a] + idx[a];
    return flat;
  }

  Shape shape_;
  Storage data_;
};

using Tensor = BasicTensor<Real>;

// ---------------------------------------------------------------------------
// Primitives. All allocate their output and leave inputs untouched.

template <typename Scalar>
BasicTensor<Scalar> matmul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  }
  return BasicTensor<Scalar>::from_matrix(a.matrix() * b.matrix());
}

enum class UnaryOp { Sigmoid, Tanh, Relu };
enum class BinaryOp { Multiply, Add };

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
BasicTensor<Scalar> elementwise(UnaryOp op, const BasicTensor<Scalar>& x) {
  BasicTensor<Scalar> y(x.shape());
  auto in = x.vector().array();
  switch (op) {
    case UnaryOp::Sigmoid: y.vector() = in.unaryExpr([](Scalar v) { return sigmoid(v); }); break;
    case UnaryOp::Tanh: y.vector() = in.tanh(); break;
    case UnaryOp::Relu: y.vector() = in.max(Scalar(0)); break;
  }
  return y;
}

template <typename Scalar>
BasicTensor<Scalar> elementwise(BinaryOp op, const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("elementwise: shape " + shape_string(a.shape()) + " differs from " +
                         shape_string(b.shape()));
  }
  BasicTensor<Scalar> y(a.shape());
  if (op == BinaryOp::Multiply) {
    y.vector() = a.vector().cwiseProduct(b.vector());
  } else {
    y.vector() = a.vector() + b.vector();
  }
  return y;
}

/// Row-wise softmax with max subtraction, on any matrix expression.
template <typename Derived>
RowMatrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out = logits;
  for (Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> softmax(const BasicTensor<Scalar>& logits) {
  if (logits.ndim() != 2 || logits.dim(1) < 1) {
    throw DimensionError("softmax expects [n x k] with k >= 1, got " + shape_string(logits.shape()));
  }
  return BasicTensor<Scalar>::from_matrix(softmax_rows(logits.matrix()));
}

/// [n x p] ++ [n x q] -> [n x (p+q)], a's columns first.
template <typename Scalar>
BasicTensor<Scalar> concat_last(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_last: leading dimensions of " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
  BasicTensor<Scalar> out({a.dim(0), a.dim(1) + b.dim(1)});
  auto m = out.matrix();
  m.leftCols(a.dim(1)) = a.matrix();
  m.rightCols(b.dim(1)) = b.matrix();
  return out;
}

/// Divides each row by its Euclidean norm; all-zero rows pass through.
template <typename Derived>
RowMatrix<typename Derived::Scalar> l2_normalize_rows(const Eigen::MatrixBase<Derived>& v) {
  RowMatrix<typename Derived::Scalar> out = v;
  for (Index r = 0; r < out.rows(); ++r) {
    const auto norm = out.row(r).norm();
    if (norm > 0) out.row(r) /= norm;
  }
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> l2_normalize(const BasicTensor<Scalar>& v) {
  if (v.ndim() != 2) throw DimensionError("l2_normalize expects [n x d], got " + shape_string(v.shape()));
  return BasicTensor<Scalar>::from_matrix(l2_normalize_rows(v.matrix()));
}

}  // namespace twostream

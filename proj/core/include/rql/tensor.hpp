#ifndef RQL_TENSOR_HPP
#define RQL_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rql/errors.hpp"
#include "rql/rng.hpp"

namespace rql {

// Dense N-dimensional row-major array. The scalar type selects the precision
// mode: float for training, double for gradient-check builds.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (shape_[i] <= 0) {
        throw ShapeError("tensor extent must be positive at axis " +
                         std::to_string(i) + ", got " +
                         std::to_string(shape_[i]));
      }
    }
    data_.assign(numel(shape_), T(0));
  }

  Tensor(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (numel(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape product " +
                       std::to_string(numel(shape_)));
    }
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  // Checked multi-index access; handy in tests, too slow for kernels.
  T& at(std::initializer_list<int> idx) { return data_[offset(idx)]; }
  const T& at(std::initializer_list<int> idx) const { return data_[offset(idx)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  Tensor reshaped(std::vector<int> new_shape) const {
    if (numel(new_shape) != data_.size()) {
      throw ShapeError("reshape from " + shape_string() + " changes element count");
    }
    return Tensor(std::move(new_shape), data_);
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool bitwise_equal(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

  std::string shape_string() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      os << (i ? "," : "") << shape_[i];
    }
    os << "]";
    return os.str();
  }

  static size_t numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
  }

 private:
  size_t offset(std::initializer_list<int> idx) const {
    if (idx.size() != shape_.size()) {
      throw ShapeError("index rank " + std::to_string(idx.size()) +
                       " does not match tensor rank " +
                       std::to_string(shape_.size()));
    }
    size_t off = 0;
    size_t axis = 0;
    for (int i : idx) {
      if (i < 0 || i >= shape_[axis]) {
        throw ShapeError("index " + std::to_string(i) +
                         " out of range at axis " + std::to_string(axis) +
                         " for shape " + shape_string());
      }
      off = off * static_cast<size_t>(shape_[axis]) + static_cast<size_t>(i);
      ++axis;
    }
    return off;
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// NaN policy: every layer validates its output and aborts the step with a
// diagnostic instead of letting Q-learning diverge silently.
template <typename T>
void check_finite(const Tensor<T>& t, const char* context) {
  if (!t.all_finite()) {
    throw NumericalError(std::string("non-finite value in ") + context +
                         " with shape " + t.shape_string());
  }
}

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double lo, double hi) {
  for (size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<T>(rng.uniform(lo, hi));
  }
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  if (!dst.same_shape(src)) {
    throw ShapeError("accumulate shape mismatch: " + dst.shape_string() +
                     " vs " + src.shape_string());
  }
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace rql

#endif  // RQL_TENSOR_HPP

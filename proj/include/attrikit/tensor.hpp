#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "attrikit/error.hpp"

namespace attrikit {

inline std::string shape_to_string(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

/// Dense multi-dimensional array, row-major (last axis fastest).
/// Values are validated finite when constructed from explicit data;
/// kernels that fill a zeroed tensor call validate_finite() where the
/// contract demands it.
template <typename Scalar>
class Tensor {
  static_assert(std::is_arithmetic_v<Scalar>, "Tensor holds numeric values");

 public:
  Tensor() = default;

  Tensor(std::vector<std::size_t> shape, std::vector<Scalar> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (count(shape_) != data_.size()) {
      raise(ErrorKind::shape_mismatch,
            "tensor data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_to_string(shape_));
    }
    validate_finite("tensor constructor");
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(count(t.shape_), Scalar(0));
    return t;
  }

  static Tensor full(std::vector<std::size_t> shape, Scalar value) {
    if (!std::isfinite(static_cast<double>(value)))
      raise(ErrorKind::non_finite, "fill value is not finite");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(count(t.shape_), value);
    return t;
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  std::span<const Scalar> data() const noexcept { return data_; }
  std::span<Scalar> data() noexcept { return data_; }

  Scalar operator[](std::size_t i) const { return data_[i]; }
  Scalar& operator[](std::size_t i) { return data_[i]; }

  Scalar at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  Scalar& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }

  Scalar at3(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  Scalar& at3(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor reshaped(std::vector<std::size_t> shape) const {
    if (count(shape) != data_.size())
      raise(ErrorKind::shape_mismatch, "reshape " + shape_to_string(shape_) + " -> " +
                                           shape_to_string(shape) + " changes element count");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out = Tensor<Other>::zeros(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<Other>(data_[i]);
    return out;
  }

  void validate_finite(const std::string& context) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(static_cast<double>(data_[i]))) {
        raise(ErrorKind::non_finite,
              context + ": non-finite value at flat index " + std::to_string(i));
      }
    }
  }

  bool all_finite() const noexcept {
    for (const Scalar v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
      if (e == 0) raise(ErrorKind::shape_mismatch, "zero extent in shape " + shape_to_string(shape));
      n *= e;
    }
    return n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<Scalar> data_;
};

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (!a.same_shape(b))
    raise(ErrorKind::shape_mismatch, std::string(op) + ": " + shape_to_string(a.shape()) +
                                         " vs " + shape_to_string(b.shape()));
}

template <typename Scalar, typename Fn>
Tensor<Scalar> map(const Tensor<Scalar>& a, Fn fn) {
  Tensor<Scalar> out = Tensor<Scalar>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return out;
}

template <typename Scalar, typename Fn>
Tensor<Scalar> zip(const Tensor<Scalar>& a, const Tensor<Scalar>& b, Fn fn, const char* op) {
  require_same_shape(a, b, op);
  Tensor<Scalar> out = Tensor<Scalar>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return zip(a, b, [](Scalar x, Scalar y) { return x + y; }, "add");
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return zip(a, b, [](Scalar x, Scalar y) { return x - y; }, "sub");
}

template <typename Scalar>
Tensor<Scalar> hadamard(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return zip(a, b, [](Scalar x, Scalar y) { return x * y; }, "hadamard");
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar c) {
  return map(a, [c](Scalar x) { return x * c; });
}

template <typename Scalar>
void accumulate(Tensor<Scalar>& dst, const Tensor<Scalar>& src) {
  require_same_shape(dst, src, "accumulate");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Reductions accumulate strictly left to right over the flat layout.
template <typename Scalar>
Scalar sum(const Tensor<Scalar>& a) {
  Scalar s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

template <typename Scalar>
Scalar min_value(const Tensor<Scalar>& a) {
  Scalar m = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) m = a[i] < m ? a[i] : m;
  return m;
}

template <typename Scalar>
Scalar max_value(const Tensor<Scalar>& a) {
  Scalar m = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) m = a[i] > m ? a[i] : m;
  return m;
}

/// Index of the maximum element, lowest flat index on ties.
template <typename Scalar>
std::size_t argmax(const Tensor<Scalar>& a) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < a.size(); ++i)
    if (a[i] > a[best]) best = i;
  return best;
}

template <typename Scalar>
Scalar max_abs_value(const Tensor<Scalar>& a) {
  Scalar m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Scalar v = a[i] < 0 ? -a[i] : a[i];
    m = v > m ? v : m;
  }
  return m;
}

}  // namespace attrikit

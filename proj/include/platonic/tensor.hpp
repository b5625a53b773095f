#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace platonic {

using Shape = std::vector<int>;

inline std::int64_t shape_size(const Shape& dims) {
  std::int64_t n = 1;
  for (int d : dims) n *= d;
  return n;
}

// Dense multi-dimensional array, row-major, backed by an Eigen array so
// elementwise expressions stay cheap.
template <class S>
struct Tensor {
  using Storage = Eigen::Array<S, Eigen::Dynamic, 1>;

  Shape dims;
  Storage v;

  Tensor() = default;
  explicit Tensor(Shape d) : dims(std::move(d)), v(Storage::Zero(shape_size(dims))) {}
  Tensor(Shape d, Storage data) : dims(std::move(d)), v(std::move(data)) {
    assert(v.size() == shape_size(dims));
  }

  static Tensor zeros(Shape d) { return Tensor(std::move(d)); }
  static Tensor full(Shape d, S value) {
    Tensor t;
    t.dims = std::move(d);
    t.v = Storage::Constant(shape_size(t.dims), value);
    return t;
  }
  static Tensor scalar(S value) { return full({1}, value); }
  static Tensor from(Shape d, std::initializer_list<S> vals) {
    Tensor t(std::move(d));
    assert(static_cast<std::int64_t>(vals.size()) == t.size());
    std::int64_t i = 0;
    for (S x : vals) t.v[i++] = x;
    return t;
  }

  std::int64_t size() const { return v.size(); }
  S& operator[](std::int64_t i) { return v[i]; }
  S operator[](std::int64_t i) const { return v[i]; }

  bool all_finite() const {
    for (std::int64_t i = 0; i < v.size(); ++i)
      if (!std::isfinite(static_cast<double>(v[i]))) return false;
    return true;
  }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.dims = dims;
    out.v = v.template cast<T>();
    return out;
  }
};

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

// Decomposes dims around `axis` into (outer, n, inner) strides so scan and
// reduction kernels can treat any rank uniformly.
struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t n = 1;
  std::int64_t inner = 1;
};

inline AxisSplit split_axis(const Shape& dims, int axis) {
  assert(axis >= 0 && axis < static_cast<int>(dims.size()));
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= dims[i];
  s.n = dims[axis];
  for (int i = axis + 1; i < static_cast<int>(dims.size()); ++i) s.inner *= dims[i];
  return s;
}

}  // namespace platonic

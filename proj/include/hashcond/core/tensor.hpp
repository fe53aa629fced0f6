#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hashcond/core/errors.hpp"

namespace hashcond {

// Dense shape of rank 1..4. Rank-4 tensors follow NCHW layout.
struct Shape {
  std::array<int, 4> d{0, 0, 0, 0};
  int rank = 0;

  static Shape of(int a) { return Shape{{a, 0, 0, 0}, 1}; }
  static Shape of(int a, int b) { return Shape{{a, b, 0, 0}, 2}; }
  static Shape of(int a, int b, int c) { return Shape{{a, b, c, 0}, 3}; }
  static Shape of(int a, int b, int c, int e) { return Shape{{a, b, c, e}, 4}; }

  int64_t numel() const {
    int64_t n = 1;
    for (int i = 0; i < rank; ++i) n *= d[i];
    return rank == 0 ? 0 : n;
  }

  bool operator==(const Shape& o) const { return rank == o.rank && d == o.d; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "(";
    for (int i = 0; i < rank; ++i) s += (i ? "," : "") + std::to_string(d[i]);
    return s + ")";
  }
};

template <typename S>
struct Tensor {
  Shape shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(Shape sh) : shape(sh), data(static_cast<size_t>(sh.numel()), S(0)) {}
  Tensor(Shape sh, S fill) : shape(sh), data(static_cast<size_t>(sh.numel()), fill) {}

  static Tensor zeros(Shape sh) { return Tensor(sh); }
  static Tensor full(Shape sh, S v) { return Tensor(sh, v); }
  static Tensor scalar(S v) {
    Tensor t(Shape::of(1));
    t.data[0] = v;
    return t;
  }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }
  int64_t numel() const { return static_cast<int64_t>(data.size()); }

  // NCHW accessors.
  S& at(int n, int c, int y, int x) {
    return data[((static_cast<int64_t>(n) * shape.d[1] + c) * shape.d[2] + y) * shape.d[3] + x];
  }
  S at(int n, int c, int y, int x) const {
    return data[((static_cast<int64_t>(n) * shape.d[1] + c) * shape.d[2] + y) * shape.d[3] + x];
  }
  S& at(int r, int c) { return data[static_cast<int64_t>(r) * shape.d[1] + c]; }
  S at(int r, int c) const { return data[static_cast<int64_t>(r) * shape.d[1] + c]; }

  // View of row-block n in a rank-4 tensor (one image, c*h*w values).
  S* image(int n) { return data.data() + static_cast<int64_t>(n) * image_size(); }
  const S* image(int n) const { return data.data() + static_cast<int64_t>(n) * image_size(); }
  int64_t image_size() const {
    return static_cast<int64_t>(shape.d[1]) * shape.d[2] * shape.d[3];
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }

  S sum() const {
    S s = 0;
    for (S v : data) s += v;
    return s;
  }

  double norm() const {
    double s = 0;
    for (S v : data) s += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(s);
  }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

template <typename S>
inline void check_shape(const Tensor<S>& t, const Shape& want, const char* where) {
  if (t.shape != want)
    throw ValidationError(std::string(where) + ": expected shape " + want.str() + ", got " +
                          t.shape.str());
}

}  // namespace hashcond

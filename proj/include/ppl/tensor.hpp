#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppl/rng.hpp"

namespace ppl {

// Scalar type used by the production pipeline. Tests instantiate the same
// templated kernels at double for finite-difference checks.
using Real = float;

template <class S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> v;

  TensorT() = default;
  explicit TensorT(std::vector<int> sh) : shape(std::move(sh)), v(count(shape), S(0)) {}
  TensorT(std::vector<int> sh, std::vector<S> data) : shape(std::move(sh)), v(std::move(data)) {
    if (static_cast<int64_t>(v.size()) != count(shape))
      throw std::invalid_argument("TensorT: data size does not match shape");
  }

  static int64_t count(const std::vector<int>& sh) {
    int64_t n = 1;
    for (int d : sh) {
      if (d < 0) throw std::invalid_argument("TensorT: negative dim");
      n *= d;
    }
    return n;
  }

  static TensorT zeros(std::vector<int> sh) { return TensorT(std::move(sh)); }
  static TensorT full(std::vector<int> sh, S value) {
    TensorT t(std::move(sh));
    std::fill(t.v.begin(), t.v.end(), value);
    return t;
  }
  static TensorT gaussian(std::vector<int> sh, RngStream& rng, S std_dev, S mean = S(0)) {
    TensorT t(std::move(sh));
    for (auto& x : t.v) x = mean + std_dev * static_cast<S>(rng.next_gaussian());
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  S* data() { return v.data(); }
  const S* data() const { return v.data(); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }

  template <class T2>
  TensorT<T2> cast() const {
    TensorT<T2> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<T2>(v[i]);
    return out;
  }
};

using Tensor = TensorT<Real>;

}  // namespace ppl

#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "intentkit/common.hpp"

namespace intentkit::nn {

/// Row-major dense tensor. The last dimension is the "column" dimension;
/// every leading dimension is flattened into rows by the layer kernels.
template <class Real>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, Real fill = Real(0)) : shape(std::move(s)) {
    data.assign(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), fill);
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  Real* row(std::size_t r) { return data.data() + r * cols(); }
  const Real* row(std::size_t r) const { return data.data() + r * cols(); }
  Real& operator[](std::size_t i) { return data[i]; }
  const Real& operator[](std::size_t i) const { return data[i]; }

  void fill(Real v) { std::fill(data.begin(), data.end(), v); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (Real v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline std::string shape_string(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

template <class Real>
struct Param {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> shape) : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() { grad.fill(Real(0)); }
  std::size_t size() const { return value.size(); }
};

template <class Real>
using ParamList = std::vector<Param<Real>*>;

/// Uniform Glorot initialization with limit sqrt(6 / (fan_in + fan_out)).
template <class Real>
void xavier_uniform(Param<Real>& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : p.value.data) v = static_cast<Real>(dist(rng));
}

template <class Real>
void zero_grads(const ParamList<Real>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace intentkit::nn

#pragma once

// Differentiable building blocks. Layers are stateless apart from their
// parameters: forward returns whatever backward needs, so a frozen model can
// be evaluated from several threads.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "intentkit/featurizer.hpp"
#include "intentkit/nn/tensor.hpp"

namespace intentkit::nn {

namespace kernel {

template <class Real>
inline void axpy(Real* __restrict y, const Real* __restrict x, Real a, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class Real>
inline Real dot(const Real* __restrict a, const Real* __restrict b, std::size_t n) {
  Real s = 0;
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace kernel

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

/// y = x W + b applied to every row of x (the same weights at every sequence step).
/// Weight layout is [in, out].
template <class Real>
class Linear {
 public:
  Param<Real> weight;
  Param<Real> bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
      : weight(name + ".weight", {in, out}), bias(name + ".bias", {out}) {
    xavier_uniform(weight, in, out, rng);
  }

  std::size_t in_dim() const { return weight.value.dim(0); }
  std::size_t out_dim() const { return weight.value.dim(1); }

  Tensor<Real> forward(const Tensor<Real>& x) const {
    check_shape(x.cols() == in_dim(), "linear: input width " + std::to_string(x.cols()) + " != " +
                                          std::to_string(in_dim()));
    auto shape = x.shape;
    shape.back() = out_dim();
    Tensor<Real> y(shape);
    const std::size_t in = in_dim(), out = out_dim();
    for (std::size_t n = 0; n < x.rows(); ++n) {
      Real* yr = y.row(n);
      std::copy_n(bias.value.data.data(), out, yr);
      const Real* xr = x.row(n);
      for (std::size_t i = 0; i < in; ++i)
        if (xr[i] != Real(0)) kernel::axpy(yr, weight.value.row(i), xr[i], out);
    }
    return y;
  }

  /// Accumulates into weight/bias grads; returns dL/dx unless need_dx is false.
  Tensor<Real> backward(const Tensor<Real>& x, const Tensor<Real>& dy, bool need_dx = true) {
    check_shape(dy.cols() == out_dim() && dy.rows() == x.rows(), "linear backward: shape mismatch");
    const std::size_t in = in_dim(), out = out_dim();
    Tensor<Real> dx;
    if (need_dx) dx = Tensor<Real>(x.shape);
    for (std::size_t n = 0; n < x.rows(); ++n) {
      const Real* g = dy.row(n);
      kernel::axpy(bias.grad.data.data(), g, Real(1), out);
      const Real* xr = x.row(n);
      for (std::size_t i = 0; i < in; ++i) {
        if (xr[i] != Real(0)) kernel::axpy(weight.grad.row(i), g, xr[i], out);
        if (need_dx) dx.row(n)[i] = kernel::dot(weight.value.row(i), g, out);
      }
    }
    return dx;
  }

  void collect(ParamList<Real>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

/// Fully-connected layer over multi-hot rows: y = sum of active weight rows + b.
/// A null row is padding and yields zeros.
template <class Real>
class SparseLinear {
 public:
  Param<Real> weight;  // [sparse_dim, out]
  Param<Real> bias;

  SparseLinear() = default;
  SparseLinear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
      : weight(name + ".weight", {in, out}), bias(name + ".bias", {out}) {
    xavier_uniform(weight, in, out, rng);
  }

  std::size_t in_dim() const { return weight.value.dim(0); }
  std::size_t out_dim() const { return weight.value.dim(1); }

  Tensor<Real> forward(std::span<const SparseVector* const> rows) const {
    const std::size_t out = out_dim();
    Tensor<Real> y({rows.size(), out});
    for (std::size_t n = 0; n < rows.size(); ++n) {
      if (!rows[n]) continue;
      Real* yr = y.row(n);
      std::copy_n(bias.value.data.data(), out, yr);
      for (auto idx : *rows[n]) {
        check_shape(idx < in_dim(), "sparse linear: feature index out of range");
        kernel::axpy(yr, weight.value.row(idx), Real(1), out);
      }
    }
    return y;
  }

  void backward(std::span<const SparseVector* const> rows, const Tensor<Real>& dy) {
    const std::size_t out = out_dim();
    for (std::size_t n = 0; n < rows.size(); ++n) {
      if (!rows[n]) continue;
      const Real* g = dy.row(n);
      kernel::axpy(bias.grad.data.data(), g, Real(1), out);
      for (auto idx : *rows[n]) kernel::axpy(weight.grad.row(idx), g, Real(1), out);
    }
  }

  void collect(ParamList<Real>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

// ---------------------------------------------------------------------------
// Normalization

template <class Real>
struct LayerNormCache {
  Tensor<Real> xhat;
  std::vector<double> inv_std;
};

/// Normalizes each row to zero mean and unit variance; statistics in double.
template <class Real>
Tensor<Real> normalize_rows(const Tensor<Real>& x, double eps, std::vector<double>* inv_std_out = nullptr) {
  Tensor<Real> y(x.shape);
  const std::size_t d = x.cols();
  if (inv_std_out) inv_std_out->assign(x.rows(), 0.0);
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const Real* xr = x.row(n);
    double mean = 0;
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    if (inv_std_out) (*inv_std_out)[n] = inv;
    for (std::size_t i = 0; i < d; ++i) y.row(n)[i] = static_cast<Real>((xr[i] - mean) * inv);
  }
  return y;
}

/// Plain layer normalization (no affine parameters).
template <class Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, double eps = 1e-6) {
  return normalize_rows(x, eps);
}

template <class Real>
class LayerNorm {
 public:
  Param<Real> gamma;
  Param<Real> beta;
  double eps = 1e-6;

  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t d) : gamma(name + ".gamma", {d}), beta(name + ".beta", {d}) {
    gamma.value.fill(Real(1));
  }

  std::size_t dim() const { return gamma.size(); }

  Tensor<Real> forward(const Tensor<Real>& x, LayerNormCache<Real>& cache) const {
    check_shape(x.cols() == dim(), "layer norm: width mismatch");
    cache.xhat = normalize_rows(x, eps, &cache.inv_std);
    Tensor<Real> y(x.shape);
    const std::size_t d = dim();
    for (std::size_t n = 0; n < x.rows(); ++n)
      for (std::size_t i = 0; i < d; ++i)
        y.row(n)[i] = cache.xhat.row(n)[i] * gamma.value[i] + beta.value[i];
    return y;
  }

  Tensor<Real> backward(const LayerNormCache<Real>& cache, const Tensor<Real>& dy) {
    const std::size_t d = dim();
    Tensor<Real> dx(dy.shape);
    std::vector<double> g(d);
    for (std::size_t n = 0; n < dy.rows(); ++n) {
      const Real* dyr = dy.row(n);
      const Real* xh = cache.xhat.row(n);
      double sum_g = 0, sum_gx = 0;
      for (std::size_t i = 0; i < d; ++i) {
        gamma.grad[i] += dyr[i] * xh[i];
        beta.grad[i] += dyr[i];
        g[i] = static_cast<double>(dyr[i]) * gamma.value[i];
        sum_g += g[i];
        sum_gx += g[i] * xh[i];
      }
      const double inv_d = 1.0 / static_cast<double>(d);
      for (std::size_t i = 0; i < d; ++i)
        dx.row(n)[i] = static_cast<Real>(cache.inv_std[n] * (g[i] - inv_d * sum_g - inv_d * xh[i] * sum_gx));
    }
    return dx;
  }

  void collect(ParamList<Real>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

// ---------------------------------------------------------------------------
// Activations

namespace detail {
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}

/// tanh-approximated GELU.
template <class Real>
Tensor<Real> gelu(const Tensor<Real>& x) {
  Tensor<Real> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = static_cast<Real>(0.5 * v * (1.0 + std::tanh(detail::kGeluC * (v + 0.044715 * v * v * v))));
  }
  return y;
}

template <class Real>
Tensor<Real> gelu_backward(const Tensor<Real>& x, const Tensor<Real>& dy) {
  Tensor<Real> dx(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double t = std::tanh(detail::kGeluC * (v + 0.044715 * v * v * v));
    const double dt = (1.0 - t * t) * detail::kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
    dx[i] = static_cast<Real>(dy[i] * (0.5 * (1.0 + t) + 0.5 * v * dt));
  }
  return dx;
}

template <class Real>
Tensor<Real> relu(const Tensor<Real>& x) {
  Tensor<Real> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > Real(0) ? x[i] : Real(0);
  return y;
}

template <class Real>
Tensor<Real> relu_backward(const Tensor<Real>& x, const Tensor<Real>& dy) {
  Tensor<Real> dx(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > Real(0) ? dy[i] : Real(0);
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout

/// Inverted-dropout mask (entries 0 or 1/(1-p)); empty means identity.
template <class Real>
std::vector<Real> dropout_mask(std::size_t n, double p, Rng* rng) {
  if (!rng || p <= 0.0) return {};
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const Real scale = static_cast<Real>(1.0 / (1.0 - p));
  std::vector<Real> mask(n);
  for (auto& m : mask) m = keep(*rng) ? scale : Real(0);
  return mask;
}

template <class Real>
void apply_mask(Tensor<Real>& x, const std::vector<Real>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

/// Identity when `training` is false.
template <class Real>
Tensor<Real> dropout(const Tensor<Real>& x, double p, Rng& rng, bool training) {
  Tensor<Real> y = x;
  if (training) apply_mask(y, dropout_mask<Real>(x.size(), p, &rng));
  return y;
}

// ---------------------------------------------------------------------------
// Softmax

/// In-place softmax over a row, computed in double.
inline void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  const double m = *std::max_element(v.begin(), v.end());
  double z = 0;
  for (auto& x : v) {
    x = std::exp(x - m);
    z += x;
  }
  for (auto& x : v) x /= z;
}

inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double z = 0;
  for (double x : v) z += std::exp(x - m);
  return m + std::log(z);
}

/// Softmax over the last dimension.
template <class Real>
Tensor<Real> softmax(const Tensor<Real>& x) {
  Tensor<Real> y(x.shape);
  std::vector<double> buf(x.cols());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    for (std::size_t i = 0; i < x.cols(); ++i) buf[i] = x.row(n)[i];
    softmax_inplace(buf);
    for (std::size_t i = 0; i < x.cols(); ++i) y.row(n)[i] = static_cast<Real>(buf[i]);
  }
  return y;
}

}  // namespace intentkit::nn

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "intentkit/nn/tensor.hpp"

namespace intentkit::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class Real>
struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;

  AdamState() = default;
  AdamState(AdamConfig cfg, const ParamList<Real>& params) : config(cfg) {
    for (auto* p : params) {
      first.emplace_back(p->size(), 0.0);
      second.emplace_back(p->size(), 0.0);
    }
  }
};

/// Bias-corrected Adam update; zeroes the gradients afterwards.
template <class Real>
void adam_step(AdamState<Real>& state, const ParamList<Real>& params) {
  if (state.first.size() != params.size()) throw ShapeError("adam: state does not match parameter list");
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param<Real>& p = *params[k];
    auto& m = state.first[k];
    auto& v = state.second[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      if (g == 0.0 && m[i] == 0.0) continue;
      const double mhat = m[i] / corr1;
      const double vhat = v[i] / corr2;
      p.value[i] = static_cast<Real>(p.value[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps));
    }
    p.zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t checked = 0;
  bool passed = false;
};

/// `loss_fn(with_grad)` must be deterministic. With with_grad=true it also
/// back-propagates into the parameters' grads (which are zeroed beforehand).
/// Each coordinate is compared against a central difference with step h;
/// relative error = |a - n| / max(|a|, |n|, 1e-8).
/// `max_per_param` (0 = all) limits how many coordinates of each parameter are probed.
template <class Real>
GradCheckReport grad_check(const std::function<double(bool)>& loss_fn, const ParamList<Real>& params, double h,
                           double tolerance, std::size_t max_per_param = 0) {
  zero_grads(params);
  const double base = loss_fn(true);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");
  std::vector<std::vector<double>> analytic;
  for (auto* p : params) analytic.emplace_back(p->grad.data.begin(), p->grad.data.end());

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param<Real>& p = *params[k];
    const std::size_t n = p.size();
    const std::size_t stride = (max_per_param == 0 || n <= max_per_param) ? 1 : n / max_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const Real saved = p.value[i];
      p.value[i] = static_cast<Real>(saved + h);
      const double up = loss_fn(false);
      p.value[i] = static_cast<Real>(saved - h);
      const double down = loss_fn(false);
      p.value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("grad_check: non-finite loss");
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_param.empty()) {
        report.max_rel_error = rel;
        report.worst_param = p.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  zero_grads(params);
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace intentkit::nn

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "adgan/core/tensor.hpp"

namespace adgan {

struct GradCheckReport {
  /// Max relative error per input, |analytic - numeric| / max(1, |analytic|).
  std::vector<double> max_rel_error;
  double tolerance = 0.0;

  double worst() const {
    return max_rel_error.empty() ? 0.0
                                 : *std::max_element(max_rel_error.begin(), max_rel_error.end());
  }
  bool passed() const { return worst() <= tolerance; }
};

/// Analytic gradient of a scalar-valued `fn` with respect to each input,
/// given in the same layout as the input data.
using GradientSource =
    std::function<std::vector<std::vector<double>>(const std::function<Tensor<double>()>&,
                                                   std::vector<Tensor<double>>&)>;

/// Reverse-mode gradients: zero, evaluate, backward, read off.
inline std::vector<std::vector<double>> backprop_gradients(
    const std::function<Tensor<double>()>& fn, std::vector<Tensor<double>>& inputs) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  fn().backward();
  std::vector<std::vector<double>> grads;
  for (auto& t : inputs) grads.emplace_back(t.grad().begin(), t.grad().end());
  return grads;
}

/// Compares analytic gradients against central differences at step h.
/// `analytic` defaults to backprop; tests swap in a faulty source to make
/// sure the checker notices.
inline GradCheckReport grad_check(const std::function<Tensor<double>()>& fn,
                                  std::vector<Tensor<double>> inputs, double h, double tolerance,
                                  const GradientSource& analytic = backprop_gradients) {
  GradCheckReport report;
  report.tolerance = tolerance;
  const auto grads = analytic(fn, inputs);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_data();
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = fn().item();
      values[i] = saved - h;
      const double minus = fn().item();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = grads[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
    report.max_rel_error.push_back(worst);
  }
  return report;
}

}  // namespace adgan

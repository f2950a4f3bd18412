#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adgan/models.hpp"

namespace adgan {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamMoments {
  std::vector<T> m;
  std::vector<T> v;
};

/// One bias-corrected Adam update of a single tensor at step t (1-based).
template <class T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments<T>& state,
                 std::uint64_t t, const AdamConfig& cfg) {
  if (grad.size() != param.size()) throw ContractError("adam_update: gradient shape mismatch");
  if (state.m.empty()) {
    state.m.assign(param.size(), T(0));
    state.v.assign(param.size(), T(0));
  }
  if (state.m.size() != param.size() || state.v.size() != param.size()) {
    throw ContractError("adam_update: moment shape mismatch");
  }
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const T m_hat = state.m[i] / c1;
    const T v_hat = state.v[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

/// Adam over a named parameter set. The step counter advances once per step().
template <class T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParamMap<T>& params) {
    ++steps_;
    for (auto& [name, tensor] : params) {
      auto& state = moments_[name];
      if (tensor.grad().size() != tensor.numel()) {
        throw ContractError("adam: parameter " + name + " has no gradient");
      }
      adam_update<T>(tensor.mutable_data(), tensor.grad(), state, steps_, cfg_);
    }
  }

  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t s) { steps_ = s; }
  const AdamConfig& config() const { return cfg_; }
  std::map<std::string, AdamMoments<T>>& moments() { return moments_; }
  const std::map<std::string, AdamMoments<T>>& moments() const { return moments_; }

 private:
  AdamConfig cfg_{};
  std::uint64_t steps_ = 0;
  std::map<std::string, AdamMoments<T>> moments_;
};

}  // namespace adgan

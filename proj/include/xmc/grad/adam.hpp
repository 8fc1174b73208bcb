#pragma once

#include <xmc/grad/tensor.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace xmc::grad {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Moment buffers are created on the first step and are
// matched positionally to the parameter list.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

  void step(std::span<Parameter<T>> params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.value.shape());
        v_.emplace_back(p.value.shape());
      }
    }
    if (m_.size() != params.size()) throw ShapeError("adam: parameter count changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    const T lr = static_cast<T>(config_.learning_rate), eps = static_cast<T>(config_.epsilon);
    const T c1 = static_cast<T>(bc1), c2 = static_cast<T>(bc2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (p.grad.shape() != p.value.shape() || m_[i].shape() != p.value.shape())
        throw ShapeError("adam: gradient shape " + shape_string(p.grad.shape()) + " does not match parameter '" +
                         p.name + "' shape " + shape_string(p.value.shape()));
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        const T g = p.grad[k];
        m[k] = b1 * m[k] + (T(1) - b1) * g;
        v[k] = b2 * v[k] + (T(1) - b2) * g * g;
        const T mhat = m[k] / c1;
        const T vhat = v[k] / c2;
        p.value[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace xmc::grad

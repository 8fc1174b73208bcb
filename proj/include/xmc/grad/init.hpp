#pragma once

#include <xmc/grad/tensor.hpp>
#include <xmc/rng.hpp>

#include <cmath>

namespace xmc::grad {

// He-uniform: U(-b, b) with b = scale * sqrt(6/fan_in).
template <class T>
void he_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng, double scale = 1.0) {
  const double bound = scale * std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace xmc::grad

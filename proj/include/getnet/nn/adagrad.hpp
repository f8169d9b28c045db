#pragma once

#include <span>
#include <vector>

#include "getnet/nn/tensor.hpp"

namespace getnet::nn {

/// Accumulated squared gradients, one vector per parameter in network order.
template <typename T>
struct AdagradState {
  std::vector<std::vector<T>> accumulators;

  static AdagradState zeros_like(std::span<Param<T>* const> params);
};

/// acc += g^2;  p -= lr * g / (sqrt(acc) + eps).  No decay.
template <typename T>
void adagrad_step(std::span<Param<T>* const> params, AdagradState<T>& state, double learning_rate, double eps);

}  // namespace getnet::nn

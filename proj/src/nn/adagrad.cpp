#include "getnet/nn/adagrad.hpp"

#include <cmath>

#include "getnet/errors.hpp"

namespace getnet::nn {

template <typename T>
AdagradState<T> AdagradState<T>::zeros_like(std::span<Param<T>* const> params) {
  AdagradState<T> state;
  for (const Param<T>* p : params) state.accumulators.emplace_back(p->size(), T(0));
  return state;
}

template <typename T>
void adagrad_step(std::span<Param<T>* const> params, AdagradState<T>& state, double learning_rate, double eps) {
  if (state.accumulators.size() != params.size())
    throw ShapeError("adagrad: optimizer state has " + std::to_string(state.accumulators.size()) +
                     " slots for " + std::to_string(params.size()) + " parameters");
  const T lr = static_cast<T>(learning_rate);
  const T epsilon = static_cast<T>(eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<T>& p = *params[i];
    std::vector<T>& acc = state.accumulators[i];
    if (acc.size() != p.size() || p.grad.size() != p.size())
      throw ShapeError("adagrad: state shape does not match parameter " + p.name);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const T g = p.grad[k];
      acc[k] += g * g;
      p.value[k] -= lr * g / (std::sqrt(acc[k]) + epsilon);
    }
  }
}

template struct AdagradState<float>;
template struct AdagradState<double>;
template void adagrad_step<float>(std::span<Param<float>* const>, AdagradState<float>&, double, double);
template void adagrad_step<double>(std::span<Param<double>* const>, AdagradState<double>&, double, double);

}  // namespace getnet::nn

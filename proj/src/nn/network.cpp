#include "getnet/nn/network.hpp"

#include "getnet/errors.hpp"

namespace getnet::nn {

template <typename T>
Network<T>::Network(std::size_t b, std::size_t m, std::uint64_t seed, NetworkOptions options)
    : b_(b), m_(m), options_(options), masks_(derive_region_masks(b, m)) {
  std::size_t channels = 1;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    const std::string tag = "lsconv" + std::to_string(i + 1);
    convs_[i] = LSConv<T>(tag, channels, kConvChannels[i], kConvKernels[i], masks_.layers[i]);
    conv_norms_[i] = BatchNorm<T>(tag + ".bn", kConvChannels[i], options.bn_momentum, options.bn_eps);
    channels = kConvChannels[i];
  }
  const std::size_t side = pooled_sides(n()).back();
  fc1_ = FullyConnected<T>("fc1", channels * side * side, kFc1Units);
  fc1_norm_ = BatchNorm<T>("fc1.bn", kFc1Units, options.bn_momentum, options.bn_eps);
  fc2_ = FullyConnected<T>("fc2", kFc1Units, kClasses);

  Rng rng(seed);
  for (auto& conv : convs_) conv.init(rng);
  fc1_.init(rng);
  fc2_.init(rng);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input, Mode mode, std::span<const T> multiplicity) {
  if (input.c != 1 || input.h != n() || input.w != n())
    throw ShapeError("network built for 1x" + std::to_string(n()) + "x" + std::to_string(n()) + " inputs, got " +
                     input.shape_string());
  const Tensor<T>* x = &input;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    x = &convs_[i].forward(*x);
    x = &conv_norms_[i].forward(*x, mode, multiplicity);
    x = &conv_tanh_[i].forward(*x);
    x = &pools_[i].forward(*x);
  }
  x = &fc1_.forward(*x);
  x = &fc1_norm_.forward(*x, mode, multiplicity);
  x = &fc1_tanh_.forward(*x);
  return fc2_.forward(*x);
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& grad_logits, bool input_grad) {
  const Tensor<T>* g = &fc2_.backward(grad_logits);
  g = &fc1_tanh_.backward(*g);
  g = &fc1_norm_.backward(*g);
  g = &fc1_.backward(*g);
  for (std::size_t i = kConvLayers; i-- > 0;) {
    g = &pools_[i].backward(*g);
    g = &conv_tanh_[i].backward(*g);
    g = &conv_norms_[i].backward(*g);
    g = &convs_[i].backward(*g, i > 0 || input_grad);
  }
  return *g;
}

template <typename T>
std::vector<Param<T>*> Network<T>::parameters() {
  std::vector<Param<T>*> out;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    out.push_back(&convs_[i].spectral);
    out.push_back(&convs_[i].abundance);
    out.push_back(&convs_[i].bias);
    out.push_back(&conv_norms_[i].scale);
    out.push_back(&conv_norms_[i].shift);
  }
  out.push_back(&fc1_.weight);
  out.push_back(&fc1_.bias);
  out.push_back(&fc1_norm_.scale);
  out.push_back(&fc1_norm_.shift);
  out.push_back(&fc2_.weight);
  out.push_back(&fc2_.bias);
  return out;
}

template <typename T>
std::vector<const Param<T>*> Network<T>::parameters() const {
  auto mutable_params = const_cast<Network<T>*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

template <typename T>
std::vector<Buffer<T>*> Network<T>::buffers() {
  std::vector<Buffer<T>*> out;
  for (auto& norm : conv_norms_) {
    out.push_back(&norm.running_mean);
    out.push_back(&norm.running_var);
  }
  out.push_back(&fc1_norm_.running_mean);
  out.push_back(&fc1_norm_.running_var);
  return out;
}

template <typename T>
std::vector<const Buffer<T>*> Network<T>::buffers() const {
  auto mutable_buffers = const_cast<Network<T>*>(this)->buffers();
  return {mutable_buffers.begin(), mutable_buffers.end()};
}

template <typename T>
bool Network<T>::statistics_initialized() const {
  for (const auto& norm : conv_norms_)
    if (!norm.initialized()) return false;
  return fc1_norm_.initialized();
}

template <typename T>
void Network<T>::set_statistics_initialized(bool value) {
  for (auto& norm : conv_norms_) norm.set_initialized(value);
  fc1_norm_.set_initialized(value);
}

template <typename T>
void Network<T>::set_options(const NetworkOptions& options) {
  options_ = options;
  for (auto& norm : conv_norms_) norm.set_hyper(options.bn_momentum, options.bn_eps);
  fc1_norm_.set_hyper(options.bn_momentum, options.bn_eps);
}

template <typename T>
std::vector<std::uint8_t> argmax_labels(const Tensor<T>& logits) {
  if (logits.sample_size() != kClasses) throw ShapeError("argmax_labels: logits must have 2 columns");
  std::vector<std::uint8_t> labels(logits.n);
  for (std::size_t b = 0; b < logits.n; ++b) labels[b] = logits.data[b * 2 + 1] > logits.data[b * 2] ? 1 : 0;
  return labels;
}

template class Network<float>;
template class Network<double>;
template class Network<long double>;
template std::vector<std::uint8_t> argmax_labels<float>(const Tensor<float>&);
template std::vector<std::uint8_t> argmax_labels<double>(const Tensor<double>&);

}  // namespace getnet::nn

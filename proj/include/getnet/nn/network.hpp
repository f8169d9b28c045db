#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "getnet/nn/layers.hpp"

namespace getnet::nn {

struct NetworkOptions {
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
};

/// The four-stage locally-shared CNN:
///   [LSConv + BN + tanh + maxpool] x 4 (32/64/128/96 channels, kernels 5/3/3/1)
///   FC 512 + BN + tanh, FC 2.
template <typename T>
class Network {
 public:
  Network(std::size_t b, std::size_t m, std::uint64_t seed, NetworkOptions options = {});

  /// `input` is (B, 1, n, n). `multiplicity`, when given, weights each sample
  /// in the batch-norm statistics as if it appeared that many times.
  Tensor<T> forward(const Tensor<T>& input, Mode mode, std::span<const T> multiplicity = {});

  /// Backpropagates d(loss)/d(logits) from the most recent forward call and
  /// fills every parameter gradient. Returns d(loss)/d(input) when requested.
  Tensor<T> backward(const Tensor<T>& grad_logits, bool input_grad = false);

  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  std::vector<Buffer<T>*> buffers();
  std::vector<const Buffer<T>*> buffers() const;

  /// True once every batch-norm layer has seen a train-mode batch.
  bool statistics_initialized() const;
  void set_statistics_initialized(bool value);
  void set_options(const NetworkOptions& options);

  std::size_t b() const noexcept { return b_; }
  std::size_t m() const noexcept { return m_; }
  std::size_t n() const noexcept { return b_ + 2 * m_; }
  std::size_t fc1_inputs() const noexcept { return fc1_.inputs(); }
  const NetworkOptions& options() const noexcept { return options_; }
  const RegionMaskSet& masks() const noexcept { return masks_; }

  std::array<LSConv<T>, kConvLayers>& convs() noexcept { return convs_; }
  FullyConnected<T>& fc1() noexcept { return fc1_; }
  FullyConnected<T>& fc2() noexcept { return fc2_; }

 private:
  std::size_t b_, m_;
  NetworkOptions options_;
  RegionMaskSet masks_;
  std::array<LSConv<T>, kConvLayers> convs_;
  std::array<BatchNorm<T>, kConvLayers> conv_norms_;
  std::array<TanhLayer<T>, kConvLayers> conv_tanh_;
  std::array<MaxPool2<T>, kConvLayers> pools_;
  FullyConnected<T> fc1_;
  BatchNorm<T> fc1_norm_;
  TanhLayer<T> fc1_tanh_;
  FullyConnected<T> fc2_;
};

/// Class decision per row of a (B, 2) logit tensor; ties resolve to 0.
template <typename T>
std::vector<std::uint8_t> argmax_labels(const Tensor<T>& logits);

}  // namespace getnet::nn

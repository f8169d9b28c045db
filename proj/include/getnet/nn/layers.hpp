#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "getnet/nn/tensor.hpp"
#include "getnet/random.hpp"

namespace getnet::nn {

/// Spatial mask of one locally-shared convolution: 1 where the output position
/// uses the spectral kernel bank, 0 where it uses the abundance bank.
struct RegionMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t spectral_extent = 0;  // spectral square is [0, extent)^2
  std::vector<std::uint8_t> values;

  bool spectral(std::size_t r, std::size_t c) const { return values[r * width + c] != 0; }
  static RegionMask square(std::size_t side, std::size_t extent);
};

inline constexpr std::size_t kConvLayers = 4;
inline constexpr std::array<std::size_t, kConvLayers> kConvChannels{32, 64, 128, 96};
inline constexpr std::array<std::size_t, kConvLayers> kConvKernels{5, 3, 3, 1};
inline constexpr std::size_t kFc1Units = 512;
inline constexpr std::size_t kClasses = 2;
inline constexpr std::size_t kMinSide = 16;  // four 2x2 pools leave >= 1 cell

struct RegionMaskSet {
  std::array<RegionMask, kConvLayers> layers;
};

/// Masks for the four convolutions of an n x n input, n = b + 2m. The spectral
/// extent at a layer preceded by p pools is ceil(b / 2^p).
RegionMaskSet derive_region_masks(std::size_t b, std::size_t m);

/// Side length after each of the four pools: n/2, n/4, n/8, n/16 (floored
/// step by step).
std::array<std::size_t, kConvLayers> pooled_sides(std::size_t n);

/// Same-padding convolution whose kernel bank is picked per output position
/// by a region mask. Both banks share one bias per output channel.
template <typename T>
class LSConv {
 public:
  LSConv() = default;
  LSConv(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel, RegionMask mask);

  const Tensor<T>& forward(const Tensor<T>& input);
  /// Fills parameter gradients. Returns the input gradient when requested,
  /// otherwise an empty tensor.
  const Tensor<T>& backward(const Tensor<T>& grad_output, bool input_grad = true);

  void init(Rng& rng);

  Param<T> spectral;   // (out, in, k, k)
  Param<T> abundance;  // (out, in, k, k)
  Param<T> bias;       // (out)

  std::size_t in_channels() const noexcept { return in_; }
  std::size_t out_channels() const noexcept { return out_; }
  std::size_t kernel() const noexcept { return k_; }
  const RegionMask& mask() const noexcept { return mask_; }

 private:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  // A group of output positions that share a kernel bank, as runs of
  // consecutive columns within a row.
  struct Run {
    std::size_t row, col, length, offset;
  };
  // `stride` pads the column count to a whole number of GEMM column blocks,
  // so every position goes through the same kernel path and its value does
  // not depend on how the mask splits the map.
  struct Group {
    std::vector<Run> runs;
    std::size_t count = 0;
    std::size_t stride = 0;
  };

  // Work is done one sample at a time: the patch matrices stay cache-resident
  // and every product has the same shape whatever the batch size, so a
  // pixel's output does not depend on the batch it was evaluated in.
  void pad_sample(const T* sample);
  void im2col(const Group& group, RowMatrix& cols) const;
  void col2im(const Group& group, const RowMatrix& cols);

  std::size_t in_ = 0, out_ = 0, k_ = 0;
  RegionMask mask_;
  Group spectral_group_, abundance_group_;
  Tensor<T> input_, output_, grad_input_;
  std::vector<T> padded_, padded_grad_;
  RowMatrix cols_, grad_cols_, result_;
  // Column-major so the GEMM runs with channels as rows: each position is
  // then one column of the product, computed the same way in every group.
  Matrix product_;
};

// Layers own their outputs and input gradients; the references returned by
// forward/backward stay valid until the next call on the same layer.

/// Per-channel batch normalization. In train mode statistics are taken over
/// batch and spatial positions, with optional per-sample multiplicities so a
/// batch with repeated samples can be evaluated once per distinct sample.
template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(std::string name, std::size_t channels, double momentum = 0.9, double eps = 1e-5);

  const Tensor<T>& forward(const Tensor<T>& input, Mode mode, std::span<const T> multiplicity = {});
  const Tensor<T>& backward(const Tensor<T>& grad_output);

  void set_hyper(double momentum, double eps) {
    momentum_ = momentum;
    eps_ = eps;
  }
  bool initialized() const noexcept { return initialized_; }
  void set_initialized(bool v) noexcept { initialized_ = v; }

  Param<T> scale;
  Param<T> shift;
  Buffer<T> running_mean;
  Buffer<T> running_var;

 private:
  std::size_t channels_ = 0;
  double momentum_ = 0.9;
  double eps_ = 1e-5;
  bool initialized_ = false;

  Mode mode_ = Mode::train;
  Tensor<T> xhat_, output_, grad_input_;
  std::vector<double> inv_std_;
  std::vector<double> weight_;  // per-sample share of the statistics
};

template <typename T>
class TanhLayer {
 public:
  const Tensor<T>& forward(const Tensor<T>& input);
  const Tensor<T>& backward(const Tensor<T>& grad_output);

 private:
  Tensor<T> output_, grad_input_;
};

/// 2x2 stride-2 max pooling; odd trailing rows/columns are dropped. Ties go
/// to the first element in row-major order.
template <typename T>
class MaxPool2 {
 public:
  const Tensor<T>& forward(const Tensor<T>& input);
  const Tensor<T>& backward(const Tensor<T>& grad_output);

 private:
  std::size_t n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<std::size_t> argmax_;
  Tensor<T> output_, grad_input_;
};

template <typename T>
class FullyConnected {
 public:
  FullyConnected() = default;
  FullyConnected(std::string name, std::size_t inputs, std::size_t outputs);

  /// Input of shape (B, C, H, W) is flattened to (B, C*H*W). Each row is a
  /// separate matrix-vector product, so results do not depend on the batch.
  const Tensor<T>& forward(const Tensor<T>& input);
  const Tensor<T>& backward(const Tensor<T>& grad_output, bool input_grad = true);

  void init(Rng& rng);

  Param<T> weight;  // (out, in)
  Param<T> bias;    // (out)

  std::size_t inputs() const noexcept { return in_; }
  std::size_t outputs() const noexcept { return out_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  Tensor<T> input_, output_, grad_input_;
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // same shape as logits
};

/// Weighted mean softmax cross-entropy over a (B, 2) logit tensor. With unit
/// multiplicities this is the plain batch mean.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> labels,
                                    std::span<const T> multiplicity = {});

/// Uniform Glorot initialisation in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(std::vector<T>& values, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace getnet::nn

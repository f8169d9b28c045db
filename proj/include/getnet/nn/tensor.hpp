#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace getnet::nn {

/// Dense NCHW tensor. Feature vectors use h = w = 1.
template <typename T>
struct Tensor {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t batch, std::size_t channels, std::size_t height = 1, std::size_t width = 1)
      : n(batch), c(channels), h(height), w(width), data(batch * channels * height * width, T(0)) {}

  /// Changes the shape, reusing the allocation when it is large enough.
  /// Contents are unspecified afterwards.
  void reshape(std::size_t batch, std::size_t channels, std::size_t height = 1, std::size_t width = 1) {
    n = batch;
    c = channels;
    h = height;
    w = width;
    data.resize(batch * channels * height * width);
  }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return h * w; }
  std::size_t sample_size() const noexcept { return c * h * w; }

  T& at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) { return data[((b * c + ch) * h + y) * w + x]; }
  const T& at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const {
    return data[((b * c + ch) * h + y) * w + x];
  }

  std::string shape_string() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) +
           ")";
  }
};

/// Learnable tensor and its gradient.
template <typename T>
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string name_, std::vector<std::size_t> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
    std::size_t count = 1;
    for (std::size_t d : shape) count *= d;
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }
  std::size_t size() const noexcept { return value.size(); }
};

/// Non-learnable state saved with the model (batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<T> value;
};

enum class Mode { train, eval };

}  // namespace getnet::nn

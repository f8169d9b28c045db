#include "getnet/nn/layers.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "getnet/errors.hpp"

namespace getnet::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

// Sum of term(0..count) in a fixed lane order. Eigen's vectorised reductions
// peel a prefix chosen from the data address, so their rounding would depend
// on where a buffer happened to be allocated.
template <typename T, typename F>
T fixed_order_sum(std::size_t count, F term) {
  constexpr std::size_t kLanes = 16;
  std::array<T, kLanes> lanes{};
  std::size_t i = 0;
  for (; i + kLanes <= count; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += term(i + l);
  for (std::size_t l = 0; i < count; ++i, ++l) lanes[l] += term(i);
  T total = 0;
  for (T v : lanes) total += v;
  return total;
}

}  // namespace

RegionMask RegionMask::square(std::size_t side, std::size_t extent) {
  RegionMask mask{side, side, std::min(extent, side), std::vector<std::uint8_t>(side * side, 0)};
  for (std::size_t r = 0; r < mask.spectral_extent; ++r)
    for (std::size_t c = 0; c < mask.spectral_extent; ++c) mask.values[r * side + c] = 1;
  return mask;
}

std::array<std::size_t, kConvLayers> pooled_sides(std::size_t n) {
  std::array<std::size_t, kConvLayers> sides{};
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    n /= 2;
    sides[i] = n;
  }
  return sides;
}

RegionMaskSet derive_region_masks(std::size_t b, std::size_t m) {
  const std::size_t n = b + 2 * m;
  if (b == 0) throw ShapeError("region masks need b >= 1");
  if (n < kMinSide)
    throw ShapeError("input side n = b + 2m = " + std::to_string(n) + " is below the minimum of " +
                     std::to_string(kMinSide));
  RegionMaskSet set;
  std::size_t side = n;
  std::size_t extent = b;
  for (std::size_t layer = 0; layer < kConvLayers; ++layer) {
    set.layers[layer] = RegionMask::square(side, extent);
    side /= 2;
    extent = (extent + 1) / 2;
  }
  return set;
}

template <typename T>
void glorot_uniform(std::vector<T>& values, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (T& v : values) v = static_cast<T>(uniform(rng, -limit, limit));
}

// ---------------------------------------------------------------------------

template <typename T>
LSConv<T>::LSConv(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  RegionMask mask)
    : spectral(name + ".spectral", {out_channels, in_channels, kernel, kernel}),
      abundance(name + ".abundance", {out_channels, in_channels, kernel, kernel}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels),
      k_(kernel),
      mask_(std::move(mask)) {
  if (kernel % 2 == 0) throw ShapeError("LSConv needs an odd kernel size for same padding");
  for (std::size_t r = 0; r < mask_.height; ++r)
    for (std::size_t c = 0; c < mask_.width; ++c) {
      Group& g = mask_.spectral(r, c) ? spectral_group_ : abundance_group_;
      if (!g.runs.empty() && g.runs.back().row == r && g.runs.back().col + g.runs.back().length == c)
        ++g.runs.back().length;
      else
        g.runs.push_back({r, c, 1, g.count});
      ++g.count;
    }
  for (Group* g : {&spectral_group_, &abundance_group_}) g->stride = (g->count + 7) / 8 * 8;
}

template <typename T>
void LSConv<T>::init(Rng& rng) {
  const std::size_t fan_in = in_ * k_ * k_;
  const std::size_t fan_out = out_ * k_ * k_;
  glorot_uniform(spectral.value, fan_in, fan_out, rng);
  glorot_uniform(abundance.value, fan_in, fan_out, rng);
  std::fill(bias.value.begin(), bias.value.end(), T(0));
}

template <typename T>
void LSConv<T>::pad_sample(const T* sample) {
  const std::size_t pad = k_ / 2, h = mask_.height, w = mask_.width;
  const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
  padded_.assign(in_ * ph * pw, T(0));
  for (std::size_t ci = 0; ci < in_; ++ci)
    for (std::size_t r = 0; r < h; ++r)
      std::copy_n(sample + (ci * h + r) * w, w, padded_.data() + (ci * ph + r + pad) * pw + pad);
}

// Row (ci, kh, kw) of `cols` holds input[ci][r + kh - pad][c + kw - pad] for
// every position (r, c) of the group.
template <typename T>
void LSConv<T>::im2col(const Group& group, RowMatrix& cols) const {
  const std::size_t pad = k_ / 2;
  const std::size_t ph = mask_.height + 2 * pad, pw = mask_.width + 2 * pad;
  cols.resize(static_cast<Eigen::Index>(in_ * k_ * k_), static_cast<Eigen::Index>(group.stride));
  T* dst = cols.data();
  for (std::size_t ci = 0; ci < in_; ++ci)
    for (std::size_t kh = 0; kh < k_; ++kh)
      for (std::size_t kw = 0; kw < k_; ++kw, dst += group.stride) {
        for (const Run& run : group.runs)
          std::copy_n(padded_.data() + (ci * ph + run.row + kh) * pw + run.col + kw, run.length, dst + run.offset);
        std::fill(dst + group.count, dst + group.stride, T(0));
      }
}

template <typename T>
void LSConv<T>::col2im(const Group& group, const RowMatrix& cols) {
  const std::size_t pad = k_ / 2;
  const std::size_t ph = mask_.height + 2 * pad, pw = mask_.width + 2 * pad;
  const T* src = cols.data();
  for (std::size_t ci = 0; ci < in_; ++ci)
    for (std::size_t kh = 0; kh < k_; ++kh)
      for (std::size_t kw = 0; kw < k_; ++kw, src += group.stride)
        for (const Run& run : group.runs) {
          T* dst = padded_grad_.data() + (ci * ph + run.row + kh) * pw + run.col + kw;
          const T* from = src + run.offset;
          for (std::size_t i = 0; i < run.length; ++i) dst[i] += from[i];
        }
}

template <typename T>
const Tensor<T>& LSConv<T>::forward(const Tensor<T>& input) {
  if (input.c != in_ || input.h != mask_.height || input.w != mask_.width)
    throw ShapeError(spectral.name + ": input " + input.shape_string() + " does not match " + std::to_string(in_) +
                     " channels of " + std::to_string(mask_.height) + "x" + std::to_string(mask_.width));
  input_ = input;
  Tensor<T>& output = output_;
  output.reshape(input.n, out_, input.h, input.w);
  const auto rows = static_cast<Eigen::Index>(in_ * k_ * k_);
  const std::size_t plane = input.plane();

  for (std::size_t b = 0; b < input.n; ++b) {
    pad_sample(input.data.data() + b * input.sample_size());
    T* out = output.data.data() + b * out_ * plane;
    for (const Group* group : {&spectral_group_, &abundance_group_}) {
      if (group->count == 0) continue;
      const Param<T>& bank = group == &spectral_group_ ? spectral : abundance;
      im2col(*group, cols_);
      const Eigen::Map<const RowMatrix> weights(bank.value.data(), static_cast<Eigen::Index>(out_), rows);
      product_.noalias() = weights * cols_;
      for (std::size_t co = 0; co < out_; ++co) {
        const T bias_value = bias.value[co];
        const T* src = product_.data() + co;
        T* dst = out + co * plane;
        for (const Run& run : group->runs) {
          T* d = dst + run.row * mask_.width + run.col;
          const T* from = src + run.offset * out_;
          for (std::size_t i = 0; i < run.length; ++i) d[i] = from[i * out_] + bias_value;
        }
      }
    }
  }
  return output;
}

template <typename T>
const Tensor<T>& LSConv<T>::backward(const Tensor<T>& grad_output, bool input_grad) {
  if (grad_output.n != input_.n || grad_output.c != out_ || grad_output.h != mask_.height ||
      grad_output.w != mask_.width)
    throw ShapeError(spectral.name + ": gradient shape " + grad_output.shape_string() + " does not match forward");
  const auto rows = static_cast<Eigen::Index>(in_ * k_ * k_);
  const std::size_t plane = grad_output.plane();
  const std::size_t pad = k_ / 2, h = mask_.height, w = mask_.width;
  const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
  Tensor<T>& grad_input = grad_input_;
  if (input_grad)
    grad_input.reshape(input_.n, in_, h, w);
  else
    grad_input = Tensor<T>();

  std::fill(bias.grad.begin(), bias.grad.end(), T(0));
  std::fill(spectral.grad.begin(), spectral.grad.end(), T(0));
  std::fill(abundance.grad.begin(), abundance.grad.end(), T(0));
  for (std::size_t b = 0; b < grad_output.n; ++b)
    for (std::size_t co = 0; co < out_; ++co) {
      const T* src = grad_output.data.data() + (b * out_ + co) * plane;
      T sum = 0;
      for (std::size_t p = 0; p < plane; ++p) sum += src[p];
      bias.grad[co] += sum;
    }

  for (std::size_t b = 0; b < grad_output.n; ++b) {
    pad_sample(input_.data.data() + b * input_.sample_size());
    if (input_grad) padded_grad_.assign(in_ * ph * pw, T(0));
    const T* dy = grad_output.data.data() + b * out_ * plane;
    for (const Group* group : {&spectral_group_, &abundance_group_}) {
      if (group->count == 0) continue;
      Param<T>& bank = group == &spectral_group_ ? spectral : abundance;
      result_.resize(static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(group->stride));
      for (std::size_t co = 0; co < out_; ++co) {
        const T* src = dy + co * plane;
        T* dst = result_.data() + co * group->stride;
        for (const Run& run : group->runs)
          std::copy_n(src + run.row * w + run.col, run.length, dst + run.offset);
        std::fill(dst + group->count, dst + group->stride, T(0));
      }
      im2col(*group, cols_);
      Eigen::Map<RowMatrix> grad_weights(bank.grad.data(), static_cast<Eigen::Index>(out_), rows);
      grad_weights.noalias() += result_ * cols_.transpose();
      if (input_grad) {
        const Eigen::Map<const RowMatrix> weights(bank.value.data(), static_cast<Eigen::Index>(out_), rows);
        grad_cols_.noalias() = weights.transpose() * result_;
        col2im(*group, grad_cols_);
      }
    }
    if (input_grad) {
      T* gi = grad_input.data.data() + b * grad_input.sample_size();
      for (std::size_t ci = 0; ci < in_; ++ci)
        for (std::size_t r = 0; r < h; ++r)
          std::copy_n(padded_grad_.data() + (ci * ph + r + pad) * pw + pad, w, gi + (ci * h + r) * w);
    }
  }
  return grad_input;
}

// ---------------------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels, double momentum, double eps)
    : scale(name + ".scale", {channels}),
      shift(name + ".shift", {channels}),
      running_mean{name + ".running_mean", std::vector<T>(channels, T(0))},
      running_var{name + ".running_var", std::vector<T>(channels, T(1))},
      channels_(channels),
      momentum_(momentum),
      eps_(eps) {
  std::fill(scale.value.begin(), scale.value.end(), T(1));
}

template <typename T>
const Tensor<T>& BatchNorm<T>::forward(const Tensor<T>& input, Mode mode, std::span<const T> multiplicity) {
  if (input.c != channels_)
    throw ShapeError(scale.name + ": expected " + std::to_string(channels_) + " channels, got " + input.shape_string());
  if (!multiplicity.empty() && multiplicity.size() != input.n)
    throw ShapeError(scale.name + ": multiplicity length does not match batch");
  const std::size_t batch = input.n;
  const std::size_t spatial = input.plane();
  mode_ = mode;
  xhat_.reshape(input.n, input.c, input.h, input.w);
  inv_std_.assign(channels_, 0.0);
  Tensor<T>& output = output_;
  output.reshape(input.n, input.c, input.h, input.w);

  auto plane = [&](const Tensor<T>& t, std::size_t b, std::size_t ch) {
    return Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(t.data.data() + (b * channels_ + ch) * spatial,
                                                                 static_cast<Eigen::Index>(spatial));
  };
  auto normalize = [&](std::size_t ch, double mean, double inv) {
    inv_std_[ch] = inv;
    const T m = static_cast<T>(mean), iv = static_cast<T>(inv);
    const T gamma = scale.value[ch], beta = shift.value[ch];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * channels_ + ch) * spatial;
      Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> xh(xhat_.data.data() + base, static_cast<Eigen::Index>(spatial));
      Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> y(output.data.data() + base, static_cast<Eigen::Index>(spatial));
      xh = (plane(input, b, ch) - m) * iv;
      y = xh * gamma + beta;
    }
  };

  if (mode == Mode::train) {
    double total = 0.0;
    weight_.assign(batch, 1.0);
    for (std::size_t b = 0; b < batch; ++b) {
      if (!multiplicity.empty()) weight_[b] = static_cast<double>(multiplicity[b]);
      total += weight_[b];
    }
    if (total < 2.0) throw ShapeError(scale.name + ": train-mode batch norm needs a batch of at least 2");
    for (double& wgt : weight_) wgt /= total * static_cast<double>(spatial);

    for (std::size_t ch = 0; ch < channels_; ++ch) {
      // Sums are taken around the channel's first value: better conditioned,
      // and a constant channel gets its mean exactly, hence output = shift.
      // Per-plane sums run in T (vectorised); planes are combined in double.
      const T origin = input.data[ch * spatial];
      double offset = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* x = input.data.data() + (b * channels_ + ch) * spatial;
        offset += weight_[b] * static_cast<double>(fixed_order_sum<T>(spatial, [&](std::size_t i) { return x[i] - origin; }));
      }
      const double mean = static_cast<double>(origin) + offset;
      const T mean_t = static_cast<T>(mean);
      double var = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* x = input.data.data() + (b * channels_ + ch) * spatial;
        var += weight_[b] * static_cast<double>(fixed_order_sum<T>(spatial, [&](std::size_t i) {
                 const T d = x[i] - mean_t;
                 return d * d;
               }));
      }
      normalize(ch, mean, 1.0 / std::sqrt(var + eps_));
      running_mean.value[ch] =
          static_cast<T>(momentum_ * static_cast<double>(running_mean.value[ch]) + (1.0 - momentum_) * mean);
      running_var.value[ch] =
          static_cast<T>(momentum_ * static_cast<double>(running_var.value[ch]) + (1.0 - momentum_) * var);
    }
    initialized_ = true;
  } else {
    if (!initialized_)
      throw DataError(scale.name + ": running statistics are uninitialised (no train-mode pass yet)");
    for (std::size_t ch = 0; ch < channels_; ++ch)
      normalize(ch, static_cast<double>(running_mean.value[ch]),
                1.0 / std::sqrt(static_cast<double>(running_var.value[ch]) + eps_));
  }
  return output;
}

template <typename T>
const Tensor<T>& BatchNorm<T>::backward(const Tensor<T>& grad_output) {
  if (grad_output.size() != xhat_.size()) throw ShapeError(scale.name + ": gradient shape does not match forward");
  const std::size_t batch = xhat_.n;
  const std::size_t spatial = xhat_.plane();
  Tensor<T>& grad_input = grad_input_;
  grad_input.reshape(xhat_.n, xhat_.c, xhat_.h, xhat_.w);

  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto len = static_cast<Eigen::Index>(spatial);
  for (std::size_t ch = 0; ch < channels_; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * channels_ + ch) * spatial;
      const T* dy = grad_output.data.data() + base;
      const T* xh = xhat_.data.data() + base;
      sum_dy += static_cast<double>(fixed_order_sum<T>(spatial, [&](std::size_t i) { return dy[i]; }));
      sum_dy_xhat += static_cast<double>(fixed_order_sum<T>(spatial, [&](std::size_t i) { return dy[i] * xh[i]; }));
    }
    scale.grad[ch] = static_cast<T>(sum_dy_xhat);
    shift.grad[ch] = static_cast<T>(sum_dy);

    // dx = inv * gamma * (dy - w * sum(dy) - w * xhat * sum(dy * xhat))
    const double a = inv_std_[ch] * static_cast<double>(scale.value[ch]);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * channels_ + ch) * spatial;
      const double w = mode_ == Mode::train ? weight_[b] : 0.0;
      const Eigen::Map<const Array> dy(grad_output.data.data() + base, len);
      const Eigen::Map<const Array> xh(xhat_.data.data() + base, len);
      Eigen::Map<Array> dx(grad_input.data.data() + base, len);
      dx = dy * static_cast<T>(a) - static_cast<T>(a * w * sum_dy) - xh * static_cast<T>(a * w * sum_dy_xhat);
    }
  }
  return grad_input;
}

// ---------------------------------------------------------------------------

template <typename T>
const Tensor<T>& TanhLayer<T>::forward(const Tensor<T>& input) {
  output_.reshape(input.n, input.c, input.h, input.w);
  const auto len = static_cast<Eigen::Index>(input.size());
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> y(output_.data.data(), len);
  y = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(input.data.data(), len).tanh();
  return output_;
}

template <typename T>
const Tensor<T>& TanhLayer<T>::backward(const Tensor<T>& grad_output) {
  if (grad_output.size() != output_.size()) throw ShapeError("tanh: gradient shape does not match forward");
  grad_input_.reshape(output_.n, output_.c, output_.h, output_.w);
  const auto len = static_cast<Eigen::Index>(output_.size());
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> dx(grad_input_.data.data(), len);
  const Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> dy(grad_output.data.data(), len);
  const Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> y(output_.data.data(), len);
  dx = dy * (T(1) - y.square());
  return grad_input_;
}

template <typename T>
const Tensor<T>& MaxPool2<T>::forward(const Tensor<T>& input) {
  if (input.h < 2 || input.w < 2) throw ShapeError("maxpool: input " + input.shape_string() + " is smaller than 2x2");
  n_ = input.n;
  c_ = input.c;
  h_ = input.h;
  w_ = input.w;
  Tensor<T>& output = output_;
  output.reshape(input.n, input.c, input.h / 2, input.w / 2);
  argmax_.resize(output.size());
  for (std::size_t bc = 0; bc < input.n * input.c; ++bc) {
    const std::size_t in_base = bc * input.plane();
    const std::size_t out_base = bc * output.plane();
    for (std::size_t r = 0; r < output.h; ++r)
      for (std::size_t c = 0; c < output.w; ++c) {
        std::size_t best = in_base + (2 * r) * input.w + 2 * c;
        for (std::size_t dr = 0; dr < 2; ++dr)
          for (std::size_t dc = 0; dc < 2; ++dc) {
            const std::size_t idx = in_base + (2 * r + dr) * input.w + 2 * c + dc;
            if (input.data[idx] > input.data[best]) best = idx;
          }
        output.data[out_base + r * output.w + c] = input.data[best];
        argmax_[out_base + r * output.w + c] = best;
      }
  }
  return output;
}

template <typename T>
const Tensor<T>& MaxPool2<T>::backward(const Tensor<T>& grad_output) {
  if (grad_output.size() != argmax_.size()) throw ShapeError("maxpool: gradient shape does not match forward");
  grad_input_.reshape(n_, c_, h_, w_);
  std::fill(grad_input_.data.begin(), grad_input_.data.end(), T(0));
  for (std::size_t i = 0; i < argmax_.size(); ++i) grad_input_.data[argmax_[i]] += grad_output.data[i];
  return grad_input_;
}

// ---------------------------------------------------------------------------

template <typename T>
FullyConnected<T>::FullyConnected(std::string name, std::size_t inputs, std::size_t outputs)
    : weight(name + ".weight", {outputs, inputs}), bias(name + ".bias", {outputs}), in_(inputs), out_(outputs) {}

template <typename T>
void FullyConnected<T>::init(Rng& rng) {
  glorot_uniform(weight.value, in_, out_, rng);
  std::fill(bias.value.begin(), bias.value.end(), T(0));
}

template <typename T>
const Tensor<T>& FullyConnected<T>::forward(const Tensor<T>& input) {
  if (input.sample_size() != in_)
    throw ShapeError(weight.name + ": expected " + std::to_string(in_) + " features, got " + input.shape_string());
  input_ = input;
  Tensor<T>& output = output_;
  output.reshape(input.n, out_);
  const auto batch = static_cast<Eigen::Index>(input.n);
  Eigen::Map<const RowMatrix<T>> x(input.data.data(), batch, static_cast<Eigen::Index>(in_));
  Eigen::Map<const RowMatrix<T>> w(weight.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
  Eigen::Map<RowMatrix<T>> y(output.data.data(), batch, static_cast<Eigen::Index>(out_));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.value.data(), static_cast<Eigen::Index>(out_));
  for (Eigen::Index i = 0; i < batch; ++i) y.row(i).noalias() = (w * x.row(i).transpose()).transpose() + b;
  return output;
}

template <typename T>
const Tensor<T>& FullyConnected<T>::backward(const Tensor<T>& grad_output, bool input_grad) {
  if (grad_output.n != input_.n || grad_output.sample_size() != out_)
    throw ShapeError(weight.name + ": gradient shape does not match forward");
  const auto batch = static_cast<Eigen::Index>(input_.n);
  Eigen::Map<const RowMatrix<T>> x(input_.data.data(), batch, static_cast<Eigen::Index>(in_));
  Eigen::Map<const RowMatrix<T>> w(weight.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
  Eigen::Map<const RowMatrix<T>> dy(grad_output.data.data(), batch, static_cast<Eigen::Index>(out_));
  Eigen::Map<RowMatrix<T>> dw(weight.grad.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias.grad.data(), static_cast<Eigen::Index>(out_));
  dw.noalias() = dy.transpose() * x;
  db.setZero();
  for (Eigen::Index i = 0; i < batch; ++i) db += dy.row(i);
  Tensor<T>& grad_input = grad_input_;
  grad_input = Tensor<T>();
  if (input_grad) {
    grad_input.reshape(input_.n, input_.c, input_.h, input_.w);
    Eigen::Map<RowMatrix<T>> dx(grad_input.data.data(), batch, static_cast<Eigen::Index>(in_));
    dx.noalias() = dy * w;
  }
  return grad_input;
}

// ---------------------------------------------------------------------------

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> labels,
                                    std::span<const T> multiplicity) {
  if (logits.sample_size() != kClasses) throw ShapeError("softmax_cross_entropy: logits must have 2 columns");
  if (labels.size() != logits.n) throw ShapeError("softmax_cross_entropy: label count does not match batch");
  if (!multiplicity.empty() && multiplicity.size() != logits.n)
    throw ShapeError("softmax_cross_entropy: multiplicity length does not match batch");
  double total = 0.0;
  for (std::size_t b = 0; b < logits.n; ++b) total += multiplicity.empty() ? 1.0 : static_cast<double>(multiplicity[b]);
  if (!(total > 0.0)) throw ShapeError("softmax_cross_entropy: empty batch");

  LossResult<T> result{0.0, Tensor<T>(logits.n, logits.c, logits.h, logits.w)};
  for (std::size_t b = 0; b < logits.n; ++b) {
    if (labels[b] > 1) throw DataError("softmax_cross_entropy: label must be 0 or 1");
    const double z0 = static_cast<double>(logits.data[b * 2]);
    const double z1 = static_cast<double>(logits.data[b * 2 + 1]);
    const double top = std::max(z0, z1);
    const double e0 = std::exp(z0 - top), e1 = std::exp(z1 - top);
    const double log_sum = top + std::log(e0 + e1);
    const double weight = (multiplicity.empty() ? 1.0 : static_cast<double>(multiplicity[b])) / total;
    result.loss += weight * (log_sum - (labels[b] ? z1 : z0));
    const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
    result.grad.data[b * 2] = static_cast<T>(weight * (p0 - (labels[b] == 0 ? 1.0 : 0.0)));
    result.grad.data[b * 2 + 1] = static_cast<T>(weight * (p1 - (labels[b] == 1 ? 1.0 : 0.0)));
  }
  return result;
}

#define GETNET_INSTANTIATE_LAYERS(T)                                                                          \
  template class LSConv<T>;                                                                                   \
  template class BatchNorm<T>;                                                                                \
  template class TanhLayer<T>;                                                                                \
  template class MaxPool2<T>;                                                                                 \
  template class FullyConnected<T>;                                                                           \
  template LossResult<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const std::uint8_t>,           \
                                                  std::span<const T>);                                        \
  template void glorot_uniform<T>(std::vector<T>&, std::size_t, std::size_t, Rng&);

GETNET_INSTANTIATE_LAYERS(float)
GETNET_INSTANTIATE_LAYERS(double)
// extended-precision reference for finite-difference checks
GETNET_INSTANTIATE_LAYERS(long double)

}  // namespace getnet::nn

// Finite-difference checks of every layer's backward pass in 64-bit mode.
// Each check builds one random instance from a seed, projects the layer
// output onto a random direction to get a scalar loss, and compares the
// analytic gradient against central differences with step 1e-6.
//
// The two perturbed outputs are subtracted element-wise before projecting:
// summing a few hundred O(1) terms first would leave rounding of order
// 1e-14 in each loss, i.e. 1e-8 in the difference quotient, which is the
// same size as the gradients being checked.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "getnet/nn/layers.hpp"
#include "getnet/nn/network.hpp"
#include "getnet/random.hpp"
#include "oracles.hpp"

namespace gradcheck {

using getnet::Rng;
using getnet::nn::Mode;
using getnet::nn::Tensor;

inline constexpr double kStep = 1e-6;

struct Result {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;

  void add(double analytic, double numeric) {
    max_relative_error = std::max(max_relative_error, oracle::relative_error(analytic, numeric));
    ++coordinates;
  }
  void merge(const Result& other) {
    max_relative_error = std::max(max_relative_error, other.max_relative_error);
    coordinates += other.coordinates;
  }
};

inline Tensor<double> random_tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, Rng& rng,
                                    double scale = 1.0) {
  Tensor<double> t(n, c, h, w);
  for (double& v : t.data) v = scale * getnet::standard_normal(rng);
  return t;
}

using Output = std::function<std::vector<double>()>;

// d/dv of dot(output(), dir) by central differences.
inline double projected_difference(const Output& output, const std::vector<double>& dir, double& v) {
  const double saved = v;
  v = saved + kStep;
  const std::vector<double> plus = output();
  v = saved - kStep;
  const std::vector<double> minus = output();
  v = saved;
  double s = 0.0;
  for (std::size_t i = 0; i < dir.size(); ++i) s += dir[i] * (plus[i] - minus[i]);
  return s / (2.0 * kStep);
}

// Compares `analytic` with central differences of dot(output(), dir) along
// every coordinate of `values`, or along `limit` randomly chosen ones when
// limit > 0.
inline Result compare(std::vector<double>& values, const std::vector<double>& analytic, const Output& output,
                      const std::vector<double>& dir, Rng& rng, std::size_t limit = 0) {
  Result r;
  std::vector<std::size_t> coords;
  if (limit == 0 || limit >= values.size()) {
    for (std::size_t i = 0; i < values.size(); ++i) coords.push_back(i);
  } else {
    for (std::size_t k = 0; k < limit; ++k) coords.push_back(getnet::uniform_index(rng, values.size()));
  }
  for (std::size_t i : coords) r.add(analytic[i], projected_difference(output, dir, values[i]));
  return r;
}

// Scalar losses: the output is the loss itself.
inline Result compare(std::vector<double>& values, const std::vector<double>& analytic,
                      const std::function<double()>& loss, Rng& rng, std::size_t limit = 0) {
  return compare(values, analytic, [&] { return std::vector<double>{loss()}; }, {1.0}, rng, limit);
}

// Locally-shared convolution: both banks, bias and input.
inline Result lsconv(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t k = seed % 2 ? 3 : 5;
  const std::size_t side = 8, extent = 2 + getnet::uniform_index(rng, 6);
  getnet::nn::LSConv<double> conv("conv", 3, 4, k, getnet::nn::RegionMask::square(side, extent));
  conv.init(rng);
  for (double& v : conv.bias.value) v = getnet::standard_normal(rng);
  Tensor<double> x = random_tensor(2, 3, side, side, rng);
  const Tensor<double> dir = random_tensor(2, 4, side, side, rng);
  auto output = [&] { return conv.forward(x).data; };

  conv.forward(x);
  const std::vector<double> dx = conv.backward(dir, true).data;
  const std::vector<double> ds = conv.spectral.grad, da = conv.abundance.grad, db = conv.bias.grad;
  Result r = compare(x.data, dx, output, dir.data, rng);
  r.merge(compare(conv.spectral.value, ds, output, dir.data, rng));
  r.merge(compare(conv.abundance.value, da, output, dir.data, rng));
  r.merge(compare(conv.bias.value, db, output, dir.data, rng));
  return r;
}

// Train-mode batch normalisation: input, scale and shift.
inline Result batchnorm(std::uint64_t seed) {
  Rng rng(seed);
  getnet::nn::BatchNorm<double> bn("bn", 3);
  for (double& v : bn.scale.value) v = getnet::uniform(rng, 0.5, 2.0);
  for (double& v : bn.shift.value) v = getnet::standard_normal(rng);
  Tensor<double> x = random_tensor(4, 3, 3, 2, rng, 2.0);
  const Tensor<double> dir = random_tensor(4, 3, 3, 2, rng);
  auto output = [&] { return bn.forward(x, Mode::train).data; };

  bn.forward(x, Mode::train);
  const std::vector<double> dx = bn.backward(dir).data;
  const std::vector<double> dg = bn.scale.grad, dbeta = bn.shift.grad;
  Result r = compare(x.data, dx, output, dir.data, rng);
  r.merge(compare(bn.scale.value, dg, output, dir.data, rng));
  r.merge(compare(bn.shift.value, dbeta, output, dir.data, rng));
  return r;
}

inline Result tanh_layer(std::uint64_t seed) {
  Rng rng(seed);
  getnet::nn::TanhLayer<double> layer;
  Tensor<double> x = random_tensor(2, 16, 3, 3, rng, 1.5);
  const Tensor<double> dir = random_tensor(2, 16, 3, 3, rng);
  auto output = [&] { return layer.forward(x).data; };
  layer.forward(x);
  const std::vector<double> dx = layer.backward(dir).data;
  return compare(x.data, dx, output, dir.data, rng);
}

// Max pooling on tie-free input with odd spatial sizes.
inline Result maxpool(std::uint64_t seed) {
  Rng rng(seed);
  getnet::nn::MaxPool2<double> pool;
  Tensor<double> x(2, 3, 5, 7);
  // distinct values at least 1e-3 apart so a 1e-6 step never flips an argmax
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = 1e-3 * static_cast<double>(i);
  for (std::size_t i = x.size(); i > 1; --i) std::swap(x.data[i - 1], x.data[getnet::uniform_index(rng, i)]);
  const Tensor<double> dir = random_tensor(2, 3, 2, 3, rng);
  auto output = [&] { return pool.forward(x).data; };
  pool.forward(x);
  const std::vector<double> dx = pool.backward(dir).data;
  return compare(x.data, dx, output, dir.data, rng);
}

inline Result fully_connected(std::uint64_t seed) {
  Rng rng(seed);
  getnet::nn::FullyConnected<double> fc("fc", 12, 5);
  fc.init(rng);
  for (double& v : fc.bias.value) v = getnet::standard_normal(rng);
  Tensor<double> x = random_tensor(3, 3, 2, 2, rng);
  const Tensor<double> dir = random_tensor(3, 5, 1, 1, rng);
  auto output = [&] { return fc.forward(x).data; };
  fc.forward(x);
  const std::vector<double> dx = fc.backward(dir, true).data;
  const std::vector<double> dw = fc.weight.grad, db = fc.bias.grad;
  Result r = compare(x.data, dx, output, dir.data, rng);
  r.merge(compare(fc.weight.value, dw, output, dir.data, rng));
  r.merge(compare(fc.bias.value, db, output, dir.data, rng));
  return r;
}

inline Result softmax_cross_entropy(std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> z = random_tensor(6, 2, 1, 1, rng, 3.0);
  std::vector<std::uint8_t> labels(6);
  for (auto& l : labels) l = static_cast<std::uint8_t>(getnet::uniform_index(rng, 2));
  auto loss = [&] { return getnet::nn::softmax_cross_entropy<double>(z, labels).loss; };
  const std::vector<double> dz = getnet::nn::softmax_cross_entropy<double>(z, labels).grad.data;
  return compare(z.data, dz, loss, rng);
}

// Whole network on a 2-sample batch (train-mode batch norm). The analytic
// gradient comes from the 64-bit network. The central differences are taken
// on an extended-precision twin holding the same parameters: the 64-bit loss
// of the full forward pass carries ~1e-14 of rounding noise, which h = 1e-6
// would turn into ~1e-8 of error in every quotient. `inputs` input
// coordinates and `per_param` coordinates of each parameter are sampled.
inline Result network(std::uint64_t seed, std::size_t inputs = 16, std::size_t per_param = 2) {
  using Wide = long double;
  Rng rng(seed);
  const std::size_t b = 8 + getnet::uniform_index(rng, 4), m = 4;
  getnet::nn::Network<double> net(b, m, getnet::sub_seed(seed, 1));
  for (getnet::nn::Param<double>* p : net.parameters())
    if (p->name.find(".bn.") != std::string::npos || p->name.ends_with(".bias"))
      for (double& v : p->value) v += 0.1 * getnet::standard_normal(rng);
  const std::size_t n = net.n();
  const Tensor<double> x = random_tensor(2, 1, n, n, rng);
  const std::vector<std::uint8_t> labels{0, 1};

  const auto first = getnet::nn::softmax_cross_entropy<double>(net.forward(x, Mode::train), labels);
  const std::vector<double> dx = net.backward(first.grad, true).data;

  getnet::nn::Network<Wide> twin(b, m, 0);
  const auto params = net.parameters();
  const auto twin_params = twin.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    std::copy(params[i]->value.begin(), params[i]->value.end(), twin_params[i]->value.begin());
  Tensor<Wide> wx(2, 1, n, n);
  std::copy(x.data.begin(), x.data.end(), wx.data.begin());
  auto loss = [&] {
    return static_cast<Wide>(getnet::nn::softmax_cross_entropy<Wide>(twin.forward(wx, Mode::train), labels).loss);
  };
  auto quotient = [&](Wide& v) {
    const Wide saved = v;
    v = saved + kStep;
    const Wide plus = loss();
    v = saved - kStep;
    const Wide minus = loss();
    v = saved;
    return static_cast<double>((plus - minus) / (2 * static_cast<Wide>(kStep)));
  };

  Result r;
  for (std::size_t k = 0; k < inputs; ++k) {
    const std::size_t i = getnet::uniform_index(rng, wx.data.size());
    r.add(dx[i], quotient(wx.data[i]));
  }
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t k = 0; k < per_param; ++k) {
      const std::size_t i = getnet::uniform_index(rng, params[p]->value.size());
      r.add(params[p]->grad[i], quotient(twin_params[p]->value[i]));
    }
  return r;
}

}  // namespace gradcheck

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "getnet/affinity.hpp"
#include "getnet/nn/adagrad.hpp"
#include "getnet/nn/network.hpp"
#include "getnet/predetect.hpp"

namespace getnet::nn {

struct TrainConfig {
  std::size_t batch_size = 96;
  double learning_rate = 1e-4;
  double adagrad_eps = 1e-8;
  std::size_t steps = 30000;
  std::uint64_t seed = 0;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  std::size_t log_every = 100;

  void validate() const;
};

struct LossPoint {
  std::size_t step;
  double loss;
};

struct TrainResult {
  std::vector<LossPoint> loss_trace;
  double final_loss = 0.0;
};

/// Minibatch Adagrad on pseudo-labelled pixels. Each step draws `batch_size`
/// samples uniformly with replacement; repeated draws are evaluated once and
/// weighted by their multiplicity, which is exact for every layer including
/// batch normalisation. On a non-finite loss or gradient the network and
/// optimizer are left at the last finite state and DivergenceError is thrown.
template <typename T>
TrainResult train(Network<T>& network, AdagradState<T>& optimizer, const LabeledSampleSet& samples,
                  const AffinitySource& source, const TrainConfig& config);

/// CSV `step,loss`.
void write_loss_trace(const std::vector<LossPoint>& trace, const std::filesystem::path& path);

}  // namespace getnet::nn
